//! Depth images by ray casting against primitive spheres.
//!
//! Each primitive is treated as a sphere of radius `max(scale)`. A pixel's
//! depth is the distance along its ray to the first sphere surface entered
//! in front of the camera, or `f64::INFINITY` when nothing is hit. Spheres
//! that contain the camera are not hits.

use serde::{Deserialize, Serialize};

use super::SplatScene;
use crate::camera::CameraPose;
use crate::geometry::{Aabb, Vec3};

/// Pinhole camera parameters, pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Square-pixel intrinsics from a horizontal field of view.
    pub fn from_hfov(width: u32, height: u32, hfov: f64) -> Self {
        let f = 0.5 * width as f64 / (0.5 * hfov).tan();
        Self { width, height, fx: f, fy: f, cx: 0.5 * width as f64, cy: 0.5 * height as f64 }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.width == 0 || self.height == 0 {
            return Err("image resolution must be non-zero".into());
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(format!("focal lengths must be positive, got {} / {}", self.fx, self.fy));
        }
        Ok(())
    }

    pub fn hfov(&self) -> f64 {
        2.0 * (0.5 * self.width as f64 / self.fx).atan()
    }

    pub fn vfov(&self) -> f64 {
        2.0 * (0.5 * self.height as f64 / self.fy).atan()
    }

    /// Unit world-frame ray through the center of pixel `(u, v)`.
    pub fn pixel_ray(&self, pose: &CameraPose, u: u32, v: u32) -> Vec3 {
        let x = (u as f64 + 0.5 - self.cx) / self.fx;
        let y = (v as f64 + 0.5 - self.cy) / self.fy;
        (pose.direction + pose.right() * x - pose.up() * y).normalize()
    }

    /// Pixel coordinates of a world point, if it lies in front of the camera
    /// and inside the image.
    pub fn project(&self, pose: &CameraPose, p: &Vec3) -> Option<(f64, f64)> {
        let rel = p - pose.position;
        let z = rel.dot(&pose.direction);
        if z <= 0.0 {
            return None;
        }
        let u = self.cx + self.fx * rel.dot(&pose.right()) / z;
        let v = self.cy - self.fy * rel.dot(&pose.up()) / z;
        (u >= 0.0 && u <= self.width as f64 && v >= 0.0 && v <= self.height as f64).then_some((u, v))
    }
}

/// Row-major depth image, metres.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f64>,
}

impl DepthImage {
    pub fn at(&self, u: u32, v: u32) -> f64 {
        self.data[(v * self.width + u) as usize]
    }

    /// Fraction of pixels without a hit.
    pub fn infinite_fraction(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().filter(|d| d.is_infinite()).count() as f64 / self.data.len() as f64
    }

    pub fn min_depth(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// First entering intersection of the ray with a sphere, if in front.
pub(crate) fn ray_sphere(origin: &Vec3, dir: &Vec3, center: &Vec3, radius: f64) -> Option<f64> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.norm_squared() - radius * radius;
    if c <= 0.0 {
        return None;
    }
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t >= 0.0).then_some(t)
}

/// Uniform-grid index over primitive spheres for repeated depth queries.
pub struct DepthRenderer<'a> {
    scene: &'a SplatScene,
    bounds: Aabb,
    cell: f64,
    dims: [usize; 3],
    cells: Vec<Vec<u32>>,
}

impl<'a> DepthRenderer<'a> {
    pub fn new(scene: &'a SplatScene) -> Self {
        let mut bounds: Option<Aabb> = None;
        for p in &scene.primitives {
            let r = Vec3::repeat(p.radius());
            let b = Aabb { min: p.position - r, max: p.position + r };
            match &mut bounds {
                None => bounds = Some(b),
                Some(acc) => {
                    acc.grow(&b.min);
                    acc.grow(&b.max);
                }
            }
        }
        let Some(bounds) = bounds else {
            return Self { scene, bounds: Aabb::point(Vec3::zeros()), cell: 1.0, dims: [0; 3], cells: Vec::new() };
        };
        let extent = bounds.extent().max().max(1e-6);
        let cell = (extent / 48.0).max(0.05);
        let dims: [usize; 3] = std::array::from_fn(|a| ((bounds.extent()[a] / cell).floor() as usize + 1).max(1));
        let mut cells = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        let coord =
            |x: f64, a: usize| -> usize { (((x - bounds.min[a]) / cell).floor().max(0.0) as usize).min(dims[a] - 1) };
        for (i, p) in scene.primitives.iter().enumerate() {
            let r = p.radius();
            let lo: Vec<usize> = (0..3).map(|a| coord(p.position[a] - r, a)).collect();
            let hi: Vec<usize> = (0..3).map(|a| coord(p.position[a] + r, a)).collect();
            for z in lo[2]..=hi[2] {
                for y in lo[1]..=hi[1] {
                    for x in lo[0]..=hi[0] {
                        cells[x + dims[0] * (y + dims[1] * z)].push(i as u32);
                    }
                }
            }
        }
        Self { scene, bounds, cell, dims, cells }
    }

    /// Distance along the unit ray to the first primitive surface.
    pub fn cast(&self, origin: &Vec3, dir: &Vec3) -> f64 {
        if self.cells.is_empty() {
            return f64::INFINITY;
        }
        let Some((t_enter, t_exit)) = self.bounds.ray_interval(origin, dir) else {
            return f64::INFINITY;
        };
        let entry = origin + dir * t_enter;
        let mut idx = [0i64; 3];
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for a in 0..3 {
            let c = ((entry[a] - self.bounds.min[a]) / self.cell).floor() as i64;
            idx[a] = c.clamp(0, self.dims[a] as i64 - 1);
            if dir[a] > 0.0 {
                step[a] = 1;
                let boundary = self.bounds.min[a] + (idx[a] + 1) as f64 * self.cell;
                t_max[a] = (boundary - origin[a]) / dir[a];
                t_delta[a] = self.cell / dir[a];
            } else if dir[a] < 0.0 {
                step[a] = -1;
                let boundary = self.bounds.min[a] + idx[a] as f64 * self.cell;
                t_max[a] = (boundary - origin[a]) / dir[a];
                t_delta[a] = -self.cell / dir[a];
            }
        }
        let mut best = f64::INFINITY;
        loop {
            let lin = idx[0] as usize + self.dims[0] * (idx[1] as usize + self.dims[1] * idx[2] as usize);
            for &i in &self.cells[lin] {
                let p = &self.scene.primitives[i as usize];
                if let Some(t) = ray_sphere(origin, dir, &p.position, p.radius()) {
                    best = best.min(t);
                }
            }
            let axis = (0..3).min_by(|&a, &b| t_max[a].total_cmp(&t_max[b])).unwrap();
            let cell_exit = t_max[axis];
            if best <= cell_exit || cell_exit > t_exit {
                break;
            }
            idx[axis] += step[axis];
            if idx[axis] < 0 || idx[axis] >= self.dims[axis] as i64 {
                break;
            }
            t_max[axis] += t_delta[axis];
        }
        best
    }

    pub fn render(&self, pose: &CameraPose, intrinsics: &Intrinsics) -> DepthImage {
        let mut data = Vec::with_capacity((intrinsics.width * intrinsics.height) as usize);
        for v in 0..intrinsics.height {
            for u in 0..intrinsics.width {
                data.push(self.cast(&pose.position, &intrinsics.pixel_ray(pose, u, v)));
            }
        }
        DepthImage { width: intrinsics.width, height: intrinsics.height, data }
    }
}

/// One-shot depth render. Build a [`DepthRenderer`] when rendering many views.
pub fn query_depth(scene: &SplatScene, pose: &CameraPose, intrinsics: &Intrinsics) -> DepthImage {
    DepthRenderer::new(scene).render(pose, intrinsics)
}
