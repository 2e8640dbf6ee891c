use serde::{Deserialize, Serialize};

use super::{SceneError, SplatScene};
use crate::geometry::Vec3;

/// Slack, in metres, applied to every "within radius" test between voxel
/// centers so that exact lattice distances (e.g. 3 voxels at 0.1 m against a
/// 0.3 m radius) are classified identically regardless of rounding.
pub const INFLATION_TOLERANCE: f64 = 1e-9;

pub type VoxelIndex = [usize; 3];

/// Dense voxel lattice holding the raw occupancy derived from the scene and
/// its inflation by `inflation_radius`.
///
/// Voxel `[i, j, k]` covers `origin + [i, j, k]·res` to `origin + [i+1, j+1, k+1]·res`.
/// Planning queries (`is_occupied`, `is_free_point`) use the inflated
/// lattice; line-of-sight and clearance checks use the raw one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    origin: Vec3,
    resolution: f64,
    dims: [usize; 3],
    inflation_radius: f64,
    raw: Vec<bool>,
    occupied: Vec<bool>,
}

impl OccupancyGrid {
    /// A grid with nothing occupied.
    pub fn empty(origin: Vec3, resolution: f64, dims: [usize; 3]) -> Self {
        let n = dims.iter().product();
        Self { origin, resolution, dims, inflation_radius: 0.0, raw: vec![false; n], occupied: vec![false; n] }
    }

    /// Builds a grid from a raw lattice (x-fastest order) and inflates it.
    pub fn from_raw(origin: Vec3, resolution: f64, dims: [usize; 3], raw: Vec<bool>, inflation_radius: f64) -> Self {
        assert_eq!(raw.len(), dims.iter().product::<usize>(), "raw lattice size mismatch");
        let mut grid = Self { origin, resolution, dims, inflation_radius: 0.0, occupied: raw.clone(), raw };
        grid.inflate(inflation_radius);
        grid
    }

    /// Same raw occupancy, re-inflated with a different radius.
    pub fn with_inflation(&self, inflation_radius: f64) -> Self {
        Self::from_raw(self.origin, self.resolution, self.dims, self.raw.clone(), inflation_radius)
    }

    fn inflate(&mut self, radius: f64) {
        self.inflation_radius = radius;
        self.occupied.clone_from(&self.raw);
        let reach = (radius / self.resolution).floor() as i64 + 1;
        let mut kernel = Vec::new();
        for k in -reach..=reach {
            for j in -reach..=reach {
                for i in -reach..=reach {
                    let d = self.resolution * (((i * i + j * j + k * k) as f64).sqrt());
                    if (i, j, k) != (0, 0, 0) && d <= radius + INFLATION_TOLERANCE {
                        kernel.push([i, j, k]);
                    }
                }
            }
        }
        if kernel.is_empty() {
            return;
        }
        for lin in 0..self.raw.len() {
            if !self.raw[lin] {
                continue;
            }
            let c = self.unflatten(lin);
            for off in &kernel {
                if let Some(n) = self.offset(c, *off) {
                    let li = self.flatten(n);
                    self.occupied[li] = true;
                }
            }
        }
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn inflation_radius(&self) -> f64 {
        self.inflation_radius
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn raw_lattice(&self) -> &[bool] {
        &self.raw
    }

    pub fn flatten(&self, idx: VoxelIndex) -> usize {
        idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2])
    }

    pub fn unflatten(&self, lin: usize) -> VoxelIndex {
        let i = lin % self.dims[0];
        let j = (lin / self.dims[0]) % self.dims[1];
        let k = lin / (self.dims[0] * self.dims[1]);
        [i, j, k]
    }

    pub fn offset(&self, idx: VoxelIndex, off: [i64; 3]) -> Option<VoxelIndex> {
        let mut out = [0usize; 3];
        for a in 0..3 {
            let v = idx[a] as i64 + off[a];
            if v < 0 || v >= self.dims[a] as i64 {
                return None;
            }
            out[a] = v as usize;
        }
        Some(out)
    }

    /// Lattice coordinates of `p`, possibly outside the grid.
    pub fn lattice_coords(&self, p: &Vec3) -> [i64; 3] {
        let r = (p - self.origin) / self.resolution;
        [r.x.floor() as i64, r.y.floor() as i64, r.z.floor() as i64]
    }

    pub fn voxel_of(&self, p: &Vec3) -> Option<VoxelIndex> {
        let c = self.lattice_coords(p);
        let mut out = [0usize; 3];
        for a in 0..3 {
            if c[a] < 0 || c[a] >= self.dims[a] as i64 {
                return None;
            }
            out[a] = c[a] as usize;
        }
        Some(out)
    }

    pub fn center(&self, idx: VoxelIndex) -> Vec3 {
        self.origin + Vec3::new(idx[0] as f64 + 0.5, idx[1] as f64 + 0.5, idx[2] as f64 + 0.5) * self.resolution
    }

    pub fn is_occupied(&self, idx: VoxelIndex) -> bool {
        self.occupied[self.flatten(idx)]
    }

    pub fn is_raw_occupied(&self, idx: VoxelIndex) -> bool {
        self.raw[self.flatten(idx)]
    }

    /// True iff `p` is inside the grid and its voxel is free after inflation.
    pub fn is_free_point(&self, p: &Vec3) -> bool {
        self.voxel_of(p).is_some_and(|v| !self.is_occupied(v))
    }

    /// True if every cell the closed segment `[a, b]` touches is inside the
    /// grid and free on the inflated lattice, by exact voxel traversal.
    pub fn segment_is_free(&self, a: &Vec3, b: &Vec3) -> bool {
        let (Some(mut v), Some(end)) = (self.voxel_of(a), self.voxel_of(b)) else { return false };
        if self.is_occupied(end) {
            return false;
        }
        let ra = (a - self.origin) / self.resolution;
        let d = (b - self.origin) / self.resolution - ra;
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for k in 0..3 {
            if d[k] > 0.0 {
                step[k] = 1;
                t_max[k] = ((v[k] + 1) as f64 - ra[k]) / d[k];
                t_delta[k] = 1.0 / d[k];
            } else if d[k] < 0.0 {
                step[k] = -1;
                t_max[k] = (v[k] as f64 - ra[k]) / d[k];
                t_delta[k] = -1.0 / d[k];
            }
        }
        loop {
            if self.is_occupied(v) {
                return false;
            }
            if v == end {
                return true;
            }
            let k = (0..3).min_by(|&i, &j| t_max[i].total_cmp(&t_max[j])).unwrap_or(0);
            if t_max[k] > 1.0 {
                return true;
            }
            let next = v[k] as i64 + step[k];
            if next < 0 || next >= self.dims[k] as i64 {
                return false;
            }
            v[k] = next as usize;
            t_max[k] += t_delta[k];
        }
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|o| **o).count()
    }

    pub fn raw_count(&self) -> usize {
        self.raw.iter().filter(|o| **o).count()
    }

    /// Centers of every raw-occupied voxel, in lattice order.
    pub fn raw_centers(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.raw.iter().enumerate().filter(|(_, o)| **o).map(|(lin, _)| self.center(self.unflatten(lin)))
    }

    /// Visits raw-occupied voxels whose lattice cell intersects the axis-aligned
    /// cube of half-size `half` around `p`. Stops early when `visit` returns true.
    pub fn any_raw_near(&self, p: &Vec3, half: f64, mut visit: impl FnMut(VoxelIndex, Vec3) -> bool) -> bool {
        let lo = self.lattice_coords(&(p - Vec3::repeat(half)));
        let hi = self.lattice_coords(&(p + Vec3::repeat(half)));
        let clamp = |v: i64, a: usize| v.clamp(0, self.dims[a] as i64 - 1) as usize;
        if (0..3).any(|a| hi[a] < 0 || lo[a] >= self.dims[a] as i64) {
            return false;
        }
        for k in clamp(lo[2], 2)..=clamp(hi[2], 2) {
            for j in clamp(lo[1], 1)..=clamp(hi[1], 1) {
                for i in clamp(lo[0], 0)..=clamp(hi[0], 0) {
                    let idx = [i, j, k];
                    if self.raw[self.flatten(idx)] && visit(idx, self.center(idx)) {
                        return true;
                    }
                }
            }
        }
        false
    }
}

/// Voxelizes primitive means with opacity at or above `opacity_threshold`
/// and inflates the result.
///
/// The lattice is aligned to integer multiples of `resolution` and padded by
/// `inflation_radius + resolution` around the scene bounds.
pub fn build_occupancy(
    scene: &SplatScene,
    resolution: f64,
    opacity_threshold: f64,
    inflation_radius: f64,
) -> Result<OccupancyGrid, SceneError> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(SceneError::Invalid(format!("resolution must be positive, got {resolution}")));
    }
    if !(0.0..=1.0).contains(&opacity_threshold) {
        return Err(SceneError::Invalid(format!("opacity threshold must lie in [0, 1], got {opacity_threshold}")));
    }
    if !(inflation_radius >= 0.0 && inflation_radius.is_finite()) {
        return Err(SceneError::Invalid(format!("inflation radius must be non-negative, got {inflation_radius}")));
    }
    if scene.primitives.is_empty() && scene.aabb.extent() == Vec3::zeros() {
        let origin = scene.center - Vec3::repeat(0.5 * resolution);
        let mut grid = OccupancyGrid::empty(origin, resolution, [1, 1, 1]);
        grid.inflation_radius = inflation_radius;
        return Ok(grid);
    }

    let pad = inflation_radius + resolution;
    let lo = scene.aabb.min - Vec3::repeat(pad);
    let hi = scene.aabb.max + Vec3::repeat(pad);
    let origin = (lo / resolution).map(f64::floor) * resolution;
    let mut dims = [0usize; 3];
    for a in 0..3 {
        dims[a] = ((hi[a] - origin[a]) / resolution).floor() as usize + 1;
    }
    let mut grid = OccupancyGrid::empty(origin, resolution, dims);
    let mut raw = vec![false; grid.len()];
    for p in &scene.primitives {
        if p.opacity >= opacity_threshold {
            if let Some(v) = grid.voxel_of(&p.position) {
                raw[grid.flatten(v)] = true;
            }
        }
    }
    grid.raw = raw;
    grid.inflate(inflation_radius);
    Ok(grid)
}
