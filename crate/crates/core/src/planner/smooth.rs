use super::WaypointPath;
use crate::geometry::Vec3;
use crate::scene::OccupancyGrid;

/// Per-pass diagnostics of [`laplacian_smooth_with_report`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SmoothingReport {
    /// Second-difference energy before the first pass and after each pass.
    pub energies: Vec<f64>,
    /// Rejected interior updates per pass.
    pub rejected: Vec<usize>,
}

/// `Σ ‖q_{k-1} − 2 q_k + q_{k+1}‖²` over interior waypoints.
pub fn second_difference_energy(points: &[Vec3]) -> f64 {
    points.windows(3).map(|w| (w[0] - 2.0 * w[1] + w[2]).norm_squared()).sum()
}

pub fn laplacian_smooth(path: &WaypointPath, grid: &OccupancyGrid, alpha: f64, iterations: usize) -> WaypointPath {
    laplacian_smooth_with_report(path, grid, alpha, iterations).0
}

/// Moves each interior waypoint a fraction `alpha` toward the midpoint of
/// its neighbours, keeping endpoints fixed.
///
/// Targets for a pass are computed from the previous pass (Jacobi), then
/// applied in order; an update is rejected if the new point or either
/// adjacent segment (sampled every half voxel, against the current
/// neighbours) touches inflated occupancy.
pub fn laplacian_smooth_with_report(
    path: &WaypointPath,
    grid: &OccupancyGrid,
    alpha: f64,
    iterations: usize,
) -> (WaypointPath, SmoothingReport) {
    let mut q = path.waypoints().to_vec();
    let mut report = SmoothingReport { energies: vec![second_difference_energy(&q)], rejected: Vec::new() };
    if q.len() < 3 {
        report.energies.extend(std::iter::repeat_n(report.energies[0], iterations));
        report.rejected.extend(std::iter::repeat_n(0, iterations));
        return (path.clone(), report);
    }
    for _ in 0..iterations {
        let prev = q.clone();
        let mut rejected = 0;
        for k in 1..q.len() - 1 {
            let target = prev[k] + ((prev[k - 1] + prev[k + 1]) * 0.5 - prev[k]) * alpha;
            if target == q[k] {
                continue;
            }
            let ok = target != q[k - 1]
                && target != q[k + 1]
                && grid.is_free_point(&target)
                && grid.segment_is_free(&q[k - 1], &target)
                && grid.segment_is_free(&target, &q[k + 1]);
            if ok {
                q[k] = target;
            } else {
                rejected += 1;
            }
        }
        report.energies.push(second_difference_energy(&q));
        report.rejected.push(rejected);
    }
    (WaypointPath::new(q).expect("smoothing keeps consecutive waypoints distinct"), report)
}
