//! Navigation target sets, episode execution and recording.

mod audit;
mod checks;
mod episode;
mod targets;

use serde::{Deserialize, Serialize};

use crate::annotate::Box3D;
use crate::geometry::{vec3_array, Vec3};
use crate::planner::PlanError;
use crate::services::ServiceError;

pub use audit::{audit_target_set, AuditFailure};
pub use checks::{approach_point, position_valid, target_exemption_margin, visible, waypoint_safe};
pub use episode::{
    read_episode, run_episode, sample_frames, write_episode, ArchivedEpisode, EpisodeOptions, EpisodePrompt,
    EpisodeRecord, FrameIndex, FRAME_INTERVAL,
};
pub use targets::{generate_target_sets, Rejection, TargetGeneration, TargetSet};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NavError {
    #[error("start inside target `{label}`")]
    StartInsideTarget { label: String },
    #[error("start position {0:?} is not in free space")]
    StartOccupied([f64; 3]),
    #[error("leg {leg} failed: {source}")]
    LegFailed { leg: usize, source: PlanError },
    #[error("episode has no targets")]
    NoTargets,
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error("invalid navigation config: {0}")]
    Invalid(String),
}

/// How the distance window between consecutive targets is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TravelMetric {
    #[default]
    StraightLine,
    /// Length of the A* path on the planning grid.
    PlannedPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavConfig {
    pub n_sets: usize,
    pub targets_per_set: usize,
    pub d_min: f64,
    pub d_max: f64,
    pub cylinder_radius: f64,
    pub safety_radius: f64,
    pub approach_clearance: f64,
    pub seed: u64,
    pub travel_metric: TravelMetric,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            n_sets: 3,
            targets_per_set: 5,
            d_min: 2.0,
            d_max: 10.0,
            cylinder_radius: 0.2,
            safety_radius: 0.3,
            approach_clearance: 0.5,
            seed: 0,
            travel_metric: TravelMetric::StraightLine,
        }
    }
}

impl NavConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_sets == 0 || self.targets_per_set == 0 {
            return Err("n_sets and targets_per_set must be positive".into());
        }
        if !(self.d_min > 0.0 && self.d_min < self.d_max && self.d_max.is_finite()) {
            return Err(format!("need 0 < d_min < d_max, got {} and {}", self.d_min, self.d_max));
        }
        let radii = [self.cylinder_radius, self.safety_radius, self.approach_clearance];
        if !radii.iter().all(|r| *r > 0.0 && r.is_finite()) {
            return Err("radii must be positive".into());
        }
        Ok(())
    }

    pub fn distance_ok(&self, d: f64) -> bool {
        d >= self.d_min && d <= self.d_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavTarget {
    pub object: Box3D,
    #[serde(with = "vec3_array")]
    pub target_point: Vec3,
    #[serde(with = "vec3_array")]
    pub from_position: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskTarget {
    pub label: String,
    pub target_point: [f64; 3],
    pub box_center: [f64; 3],
}

/// `task.json`: one target set as handed to the planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskFile {
    pub scene_id: String,
    pub set_id: usize,
    pub start: [f64; 3],
    pub targets: Vec<TaskTarget>,
}

impl TaskFile {
    pub fn new(scene_id: &str, set_id: usize, start: &Vec3, targets: &[NavTarget]) -> Self {
        Self {
            scene_id: scene_id.to_string(),
            set_id,
            start: [start.x, start.y, start.z],
            targets: targets
                .iter()
                .map(|t| TaskTarget {
                    label: t.object.label.clone(),
                    target_point: [t.target_point.x, t.target_point.y, t.target_point.z],
                    box_center: [t.object.center.x, t.object.center.y, t.object.center.z],
                })
                .collect(),
        }
    }
}
