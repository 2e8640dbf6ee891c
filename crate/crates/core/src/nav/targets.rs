use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checks::{approach_point, position_valid, visible, waypoint_safe};
use super::{NavConfig, NavError, NavTarget, TravelMetric};
use crate::annotate::{Box3D, CandidateSet};
use crate::geometry::{to_array, Vec3};
use crate::planner::{astar, path_length};
use crate::scene::{OccupancyGrid, SplatScene};
use crate::services::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    Inside,
    Occluded,
    Unsafe,
    Distance,
}

impl Rejection {
    pub fn as_str(self) -> &'static str {
        match self {
            Rejection::Inside => "inside",
            Rejection::Occluded => "occluded",
            Rejection::Unsafe => "unsafe",
            Rejection::Distance => "distance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSet {
    pub set_id: usize,
    pub targets: Vec<NavTarget>,
    /// Fewer than `targets_per_set` targets were found.
    pub partial: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TargetGeneration {
    pub sets: Vec<TargetSet>,
    /// Candidate evaluations rejected, per criterion.
    pub rejections: BTreeMap<String, usize>,
}

pub(crate) fn travel_distance(grid: &OccupancyGrid, from: &Vec3, to: &Vec3, metric: TravelMetric) -> Option<f64> {
    match metric {
        TravelMetric::StraightLine => Some((to - from).norm()),
        TravelMetric::PlannedPath => astar(grid, from, to).ok().map(|p| path_length(&p)),
    }
}

/// Runs the four checks in order (position, visibility, safety, distance).
pub(crate) fn evaluate(grid: &OccupancyGrid, from: &Vec3, b: &Box3D, cfg: &NavConfig) -> Result<NavTarget, Rejection> {
    if !position_valid(from, b) {
        return Err(Rejection::Inside);
    }
    if !visible(grid, from, b, cfg.cylinder_radius) {
        return Err(Rejection::Occluded);
    }
    let tp = approach_point(b, from, cfg.approach_clearance).map_err(|_| Rejection::Inside)?;
    if !grid.is_free_point(&tp) || !waypoint_safe(grid, &tp, cfg.safety_radius) {
        return Err(Rejection::Unsafe);
    }
    match travel_distance(grid, from, &tp, cfg.travel_metric) {
        Some(d) if cfg.distance_ok(d) => Ok(NavTarget { object: b.clone(), target_point: tp, from_position: *from }),
        _ => Err(Rejection::Distance),
    }
}

/// Builds up to `n_sets` target sets, each starting at the scene center.
///
/// Candidates are tried in a per-set seeded shuffle of the annotation
/// list. After every acceptance the drone moves to the new target point and
/// the scan restarts over the unused candidates; a set ends at
/// `targets_per_set` targets or after a full scan without acceptance.
/// Empty sets are dropped, short ones are kept and flagged partial.
pub fn generate_target_sets(
    scene: &SplatScene,
    grid: &OccupancyGrid,
    annotations: &CandidateSet,
    config: &NavConfig,
) -> Result<TargetGeneration, NavError> {
    config.validate().map_err(NavError::Invalid)?;
    let start = scene.center;
    if !grid.is_free_point(&start) {
        return Err(NavError::StartOccupied(to_array(&start)));
    }
    let boxes = &annotations.boxes;
    let mut out = TargetGeneration::default();
    for set_id in 0..config.n_sets {
        let mut order: Vec<usize> = (0..boxes.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &format!("target-set/{set_id}"))));
        let mut used = vec![false; boxes.len()];
        let mut pos = start;
        let mut targets = Vec::new();
        while targets.len() < config.targets_per_set {
            let mut accepted = None;
            for &i in &order {
                if used[i] {
                    continue;
                }
                match evaluate(grid, &pos, &boxes[i], config) {
                    Ok(t) => {
                        accepted = Some((i, t));
                        break;
                    }
                    Err(r) => *out.rejections.entry(r.as_str().to_string()).or_default() += 1,
                }
            }
            let Some((i, t)) = accepted else { break };
            used[i] = true;
            pos = t.target_point;
            targets.push(t);
        }
        if !targets.is_empty() {
            let partial = targets.len() < config.targets_per_set;
            out.sets.push(TargetSet { set_id, targets, partial });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::GaussianPrimitive;

    fn open_scene() -> (SplatScene, OccupancyGrid) {
        let scene = SplatScene::new(Vec::new(), Vec3::zeros());
        let grid = OccupancyGrid::empty(Vec3::new(-12.0, -12.0, -3.0), 0.1, [240, 240, 60]);
        (scene, grid)
    }

    fn one(b: Box3D, cfg: NavConfig) -> Result<TargetGeneration, NavError> {
        let (scene, grid) = open_scene();
        generate_target_sets(&scene, &grid, &CandidateSet { boxes: vec![b], scene_center: Vec3::zeros() }, &cfg)
    }

    #[test]
    fn single_object_five_metres_away() {
        let cfg = NavConfig { n_sets: 1, targets_per_set: 1, ..NavConfig::default() };
        let out = one(Box3D::new("sofa", Vec3::new(0.0, 5.0, 0.0), Vec3::repeat(0.4)), cfg).unwrap();
        assert_eq!(out.sets.len(), 1);
        let t = &out.sets[0].targets[0];
        assert!(!out.sets[0].partial);
        let d = t.target_point.norm();
        assert!((2.0..=10.0).contains(&d));
        assert!((t.target_point.y - (5.0 - (0.48f64.sqrt() + 0.5))).abs() < 1e-12);
    }

    #[test]
    fn too_close_is_rejected_for_distance() {
        let cfg = NavConfig { n_sets: 1, targets_per_set: 1, ..NavConfig::default() };
        let out = one(Box3D::new("sofa", Vec3::new(0.0, 1.0, 0.0), Vec3::repeat(0.2)), cfg).unwrap();
        assert!(out.sets.is_empty());
        assert_eq!(out.rejections.get("distance"), Some(&1));
    }

    #[test]
    fn occluded_behind_wall() {
        // Two rooms split by a wall at y = 2.5.
        let mut prims = Vec::new();
        for i in -40..40 {
            for k in -15..15 {
                let p = Vec3::new(i as f64 * 0.1 + 0.05, 2.55, k as f64 * 0.1 + 0.05);
                prims.push(GaussianPrimitive::sphere(p, 0.05, 0.9));
            }
        }
        let scene = SplatScene::new(prims, Vec3::zeros());
        let grid = crate::scene::build_occupancy(&scene, 0.1, 0.5, 0.3).unwrap();
        let b = Box3D::new("bed", Vec3::new(0.0, 5.0, 0.0), Vec3::repeat(0.4));
        let cfg = NavConfig { n_sets: 1, targets_per_set: 1, ..NavConfig::default() };
        let ann = CandidateSet { boxes: vec![b], scene_center: Vec3::zeros() };
        let out = generate_target_sets(&scene, &grid, &ann, &cfg).unwrap();
        assert!(out.sets.is_empty());
        assert_eq!(out.rejections.get("occluded"), Some(&1));
    }

    #[test]
    fn chains_and_flags_partial_sets() {
        let (scene, grid) = open_scene();
        let boxes = vec![
            Box3D::new("a", Vec3::new(0.0, 5.0, 0.0), Vec3::repeat(0.3)),
            Box3D::new("b", Vec3::new(5.0, 5.0, 0.0), Vec3::repeat(0.3)),
            Box3D::new("c", Vec3::new(5.0, 0.0, 0.0), Vec3::repeat(0.3)),
        ];
        let cfg = NavConfig { n_sets: 2, targets_per_set: 5, seed: 11, ..NavConfig::default() };
        let ann = CandidateSet { boxes, scene_center: Vec3::zeros() };
        let out = generate_target_sets(&scene, &grid, &ann, &cfg).unwrap();
        assert_eq!(out.sets.len(), 2);
        for s in &out.sets {
            assert!(s.partial);
            assert_eq!(s.targets.len(), 3);
            assert_eq!(s.targets[0].from_position, Vec3::zeros());
            for w in s.targets.windows(2) {
                assert_eq!(w[1].from_position, w[0].target_point);
                assert!(cfg.distance_ok((w[1].target_point - w[0].target_point).norm()));
            }
        }
        assert_eq!(out, generate_target_sets(&scene, &grid, &ann, &cfg).unwrap());
    }

    #[test]
    fn occupied_start_is_an_error() {
        let scene =
            SplatScene::new(vec![GaussianPrimitive::sphere(Vec3::new(0.05, 0.05, 0.05), 0.05, 0.9)], Vec3::zeros());
        let grid = crate::scene::build_occupancy(&scene, 0.1, 0.5, 0.3).unwrap();
        let ann = CandidateSet { boxes: vec![], scene_center: Vec3::zeros() };
        assert!(matches!(
            generate_target_sets(&scene, &grid, &ann, &NavConfig::default()),
            Err(NavError::StartOccupied(_))
        ));
    }
}
