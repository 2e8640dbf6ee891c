use serde::{Deserialize, Serialize};

use super::checks::{position_valid, visible, waypoint_safe};
use super::targets::travel_distance;
use super::{NavConfig, NavTarget};
use crate::geometry::Vec3;
use crate::scene::OccupancyGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditFailure {
    pub set_id: usize,
    pub target_index: usize,
    pub criterion: String,
    pub detail: String,
}

/// Re-checks every target of a set against the eligibility criteria, from
/// the position the drone actually occupied when the target was chosen.
pub fn audit_target_set(
    grid: &OccupancyGrid,
    start: &Vec3,
    set_id: usize,
    targets: &[NavTarget],
    config: &NavConfig,
) -> Vec<AuditFailure> {
    let mut out = Vec::new();
    let mut from = *start;
    for (i, t) in targets.iter().enumerate() {
        let mut fail = |criterion: &str, detail: String| {
            out.push(AuditFailure { set_id, target_index: i, criterion: criterion.into(), detail })
        };
        if (t.from_position - from).norm() > 1e-9 {
            fail("chain", format!("recorded start {:?} differs from {:?}", t.from_position, from));
        }
        if !position_valid(&from, &t.object) {
            fail("inside", format!("drone at {from:?} inside `{}`", t.object.label));
        }
        if !position_valid(&t.target_point, &t.object) {
            fail("inside", format!("target point inside `{}`", t.object.label));
        }
        if !visible(grid, &from, &t.object, config.cylinder_radius) {
            fail("occluded", format!("`{}` not visible from {from:?}", t.object.label));
        }
        if !grid.is_free_point(&t.target_point) || !waypoint_safe(grid, &t.target_point, config.safety_radius) {
            fail("unsafe", format!("target point {:?} lacks clearance", t.target_point));
        }
        match travel_distance(grid, &from, &t.target_point, config.travel_metric) {
            Some(d) if config.distance_ok(d) => {}
            d => fail("distance", format!("travel distance {d:?} outside [{}, {}]", config.d_min, config.d_max)),
        }
        from = t.target_point;
    }
    out
}
