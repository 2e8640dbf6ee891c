//! Target eligibility checks.
//!
//! Clearance and line-of-sight tests look at raw (pre-inflation) occupancy;
//! inflation is a planning margin and would otherwise shadow every target.

use super::NavError;
use crate::annotate::Box3D;
use crate::geometry::{point_segment_distance, Vec3};
use crate::scene::OccupancyGrid;

/// The drone must not be inside the box; faces count as inside.
pub fn position_valid(drone: &Vec3, b: &Box3D) -> bool {
    !b.contains(drone)
}

/// Margin around the target box within which voxels belong to the target:
/// a voxel touching the box has its center at most half a voxel diagonal out.
pub fn target_exemption_margin(grid: &OccupancyGrid) -> f64 {
    0.5 * 3f64.sqrt() * grid.resolution()
}

/// Line of sight from `drone` to the box center.
///
/// The ray is cut where it first enters the box; the object is occluded if
/// a raw-occupied voxel center that is not part of the target lies within
/// `cylinder_radius` of the cut segment.
pub fn visible(grid: &OccupancyGrid, drone: &Vec3, b: &Box3D, cylinder_radius: f64) -> bool {
    let s_star = b.segment_entry(drone, &b.center).unwrap_or(1.0);
    let end = drone + (b.center - drone) * s_star;
    let margin = target_exemption_margin(grid);
    let len = (end - drone).norm();
    let chunk = (4.0 * grid.resolution()).max(0.5);
    let n = (len / chunk).ceil().max(1.0) as usize;
    for c in 0..n {
        let mid = drone + (end - drone) * ((c as f64 + 0.5) / n as f64);
        let half = 0.5 * len / n as f64 + cylinder_radius;
        let blocked = grid.any_raw_near(&mid, half, |_, v| {
            point_segment_distance(&v, drone, &end) <= cylinder_radius && !b.contains_with_margin(&v, margin)
        });
        if blocked {
            return false;
        }
    }
    true
}

/// Target point on the way from the box center to `from`, one bounding
/// radius plus `clearance` out, but never past `from`.
pub fn approach_point(b: &Box3D, from: &Vec3, clearance: f64) -> Result<Vec3, NavError> {
    if b.contains(from) {
        return Err(NavError::StartInsideTarget { label: b.label.clone() });
    }
    let d = from - b.center;
    let dist = d.norm();
    let reach = b.bounding_radius() + clearance;
    if dist <= reach {
        Ok(*from)
    } else {
        Ok(b.center + d * (reach / dist))
    }
}

/// No raw-occupied voxel center within `safety_radius` of `point`.
pub fn waypoint_safe(grid: &OccupancyGrid, point: &Vec3, safety_radius: f64) -> bool {
    !grid.any_raw_near(point, safety_radius, |_, v| (v - point).norm() <= safety_radius)
}
