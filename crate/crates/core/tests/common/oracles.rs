//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use forge_core::annotate::{Box3D, SelectionParams};
use forge_core::scene::OccupancyGrid;
use forge_core::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Unsigned angle between the horizontal projections of `a` and `b`, via
/// atan2 of cross and dot products. Zero if either projection vanishes.
pub fn horizontal_angle(a: &Vec3, b: &Vec3) -> f64 {
    let (ax, ay, bx, by) = (a.x, a.y, b.x, b.y);
    if ax.hypot(ay) < 1e-9 || bx.hypot(by) < 1e-9 {
        return 0.0;
    }
    (ax * by - ay * bx).abs().atan2(ax * bx + ay * by)
}

fn lex(a: &Box3D, b: &Box3D) -> Ordering {
    a.center
        .x
        .total_cmp(&b.center.x)
        .then(a.center.y.total_cmp(&b.center.y))
        .then(a.center.z.total_cmp(&b.center.z))
        .then(a.label.cmp(&b.label))
}

/// Statement-by-statement simulation of the greedy listing.
pub fn distance_aware_selection(o: &[Box3D], c: &Vec3, p: &SelectionParams) -> Vec<Box3D> {
    // d_i = ||x_i - c||
    let mut items: Vec<(f64, Box3D)> = o.iter().map(|b| ((b.center - c).norm(), b.clone())).collect();
    // Sort descending by d_i (stable, so ties keep the lexicographic pre-order).
    items.sort_by(|a, b| lex(&a.1, &b.1));
    items.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut t: Vec<usize> = Vec::new();
    let mut a: Vec<bool> = vec![true; items.len()];
    for i in 0..items.len() {
        if !a[i] {
            continue;
        }
        if items[i].0 <= p.d_th2 {
            continue;
        }
        t.push(i);
        let d_prune = p.d_th1;
        for j in 0..items.len() {
            if j == i || !a[j] {
                continue;
            }
            let xi = items[i].1.center;
            let xj = items[j].1.center;
            let az = horizontal_angle(&(xi - c), &(xj - c));
            if (xj - xi).norm() < d_prune || az < p.theta_th {
                a[j] = false;
            }
        }
        if t.len() == p.n_t {
            break;
        }
    }
    if t.is_empty() {
        let q: Vec<usize> = (0..items.len()).filter(|&i| p.d_th1 < items[i].0 && items[i].0 <= p.d_th2).collect();
        if !q.is_empty() {
            let mut best = q[0];
            for &i in &q {
                if items[i].0 > items[best].0 {
                    best = i;
                }
            }
            t.push(best);
        }
    }
    t.into_iter().map(|i| items[i].1.clone()).collect()
}

pub fn random_candidates(r: &mut ChaCha8Rng, max: usize) -> Vec<Box3D> {
    const LABELS: [&str; 4] = ["chair", "sofa", "lamp", "table"];
    let n = r.random_range(0..=max);
    (0..n)
        .map(|_| {
            let c = Vec3::new(r.random_range(-9.0..9.0), r.random_range(-9.0..9.0), r.random_range(-1.5..1.5));
            let h = Vec3::new(r.random_range(0.1..0.8), r.random_range(0.1..0.8), r.random_range(0.1..0.8));
            Box3D::new(LABELS[r.random_range(0..LABELS.len())], c, h)
        })
        .collect()
}

/// Grid with independent random raw occupancy, inflated by `inflation`.
pub fn random_grid(r: &mut ChaCha8Rng, dims: [usize; 3], density: f64, inflation: f64) -> OccupancyGrid {
    let n = dims.iter().product();
    let raw = (0..n).map(|_| r.random::<f64>() < density).collect();
    OccupancyGrid::from_raw(Vec3::zeros(), 0.1, dims, raw, inflation)
}

/// Plain Dijkstra over the 26-connected free voxels, without corner
/// cutting; cost in metres.
pub fn dijkstra_cost(grid: &OccupancyGrid, start: [usize; 3], goal: [usize; 3]) -> Option<f64> {
    #[derive(PartialEq)]
    struct Item(f64, usize);
    impl Eq for Item {}
    impl PartialOrd for Item {
        fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Item {
        fn cmp(&self, o: &Self) -> Ordering {
            o.0.total_cmp(&self.0)
        }
    }
    let [nx, ny, nz] = grid.dims();
    let lin = |v: [usize; 3]| v[0] + nx * (v[1] + ny * v[2]);
    let free = |v: [usize; 3]| !grid.is_occupied(v);
    if !free(start) || !free(goal) {
        return None;
    }
    let mut dist = vec![f64::INFINITY; nx * ny * nz];
    let mut heap = BinaryHeap::new();
    dist[lin(start)] = 0.0;
    heap.push(Item(0.0, lin(start)));
    while let Some(Item(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        let v = [u % nx, (u / nx) % ny, u / (nx * ny)];
        if v == goal {
            return Some(d);
        }
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let w = [v[0] as i64 + dx, v[1] as i64 + dy, v[2] as i64 + dz];
                    if w.iter().zip([nx, ny, nz]).any(|(a, n)| *a < 0 || *a >= n as i64) {
                        continue;
                    }
                    let w = [w[0] as usize, w[1] as usize, w[2] as usize];
                    if !free(w) {
                        continue;
                    }
                    // Every other voxel of the block spanned by the move must be free.
                    let mut clear = true;
                    for sz in [0, dz] {
                        for sy in [0, dy] {
                            for sx in [0, dx] {
                                let u = [v[0] as i64 + sx, v[1] as i64 + sy, v[2] as i64 + sz];
                                clear &= free([u[0] as usize, u[1] as usize, u[2] as usize]);
                            }
                        }
                    }
                    if !clear {
                        continue;
                    }
                    let nd = d + grid.resolution() * ((dx * dx + dy * dy + dz * dz) as f64).sqrt();
                    if nd < dist[lin(w)] {
                        dist[lin(w)] = nd;
                        heap.push(Item(nd, lin(w)));
                    }
                }
            }
        }
    }
    None
}

fn local(b: &Box3D, p: &Vec3) -> Vec3 {
    let d = p - b.center;
    let (s, c) = (b.yaw.sin(), b.yaw.cos());
    Vec3::new(c * d.x + s * d.y, c * d.y - s * d.x, d.z)
}

/// First parameter in `[0, 1]` at which `a + s (b - a)` is inside the
/// closed box, by slab clipping in the box frame.
pub fn entry_parameter(bx: &Box3D, a: &Vec3, b: &Vec3) -> Option<f64> {
    let la = local(bx, a);
    let lb = local(bx, b);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for k in 0..3 {
        let d = lb[k] - la[k];
        let h = bx.half_extents[k];
        if d.abs() < 1e-15 {
            if la[k].abs() > h {
                return None;
            }
        } else {
            let (t1, t2) = ((-h - la[k]) / d, (h - la[k]) / d);
            lo = lo.max(t1.min(t2));
            hi = hi.min(t1.max(t2));
        }
    }
    (lo <= hi).then_some(lo)
}

pub fn segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let ab = b - a;
    let l2 = ab.dot(&ab);
    let t = if l2 == 0.0 { 0.0 } else { ((p - a).dot(&ab) / l2).clamp(0.0, 1.0) };
    (a + ab * t - p).norm()
}

/// Brute force over every raw-occupied voxel of the grid.
pub fn dense_visible(grid: &OccupancyGrid, drone: &Vec3, b: &Box3D, radius: f64) -> bool {
    let s = entry_parameter(b, drone, &b.center).unwrap_or(1.0);
    let end = drone + (b.center - drone) * s;
    let margin = 0.5 * 3f64.sqrt() * grid.resolution();
    let [nx, ny, nz] = grid.dims();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if !grid.is_raw_occupied([x, y, z]) {
                    continue;
                }
                let v = grid.center([x, y, z]);
                let l = local(b, &v);
                let exempt = (0..3).all(|k| l[k].abs() <= b.half_extents[k] + margin);
                if !exempt && segment_distance(&v, drone, &end) <= radius {
                    return false;
                }
            }
        }
    }
    true
}
