//! Reference trajectory planner: voxel A*, collision-aware Laplacian
//! smoothing and a trapezoidal time-parameterization.
//!
//! Anything implementing [`Planner`] can replace [`ReferencePlanner`] in the
//! collection stage; the contract is bounded speed and acceleration along a
//! collision-free path that starts and ends at rest.

mod astar;
mod smooth;
mod timing;

use serde::{Deserialize, Serialize};

use crate::camera::path_headings;
use crate::geometry::{vec3_array, Vec3};
use crate::scene::OccupancyGrid;

pub use astar::astar;
pub use smooth::{laplacian_smooth, laplacian_smooth_with_report, second_difference_energy, SmoothingReport};
pub use timing::{time_parameterize, TrapezoidProfile};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("endpoint in collision: {which} at {point:?}")]
    EndpointInCollision { which: &'static str, point: [f64; 3] },
    #[error("unreachable: no free path from {start:?} to {goal:?}")]
    Unreachable { start: [f64; 3], goal: [f64; 3] },
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("invalid planner input: {0}")]
    Invalid(String),
}

/// Ordered waypoints `q_1..q_K`, K ≥ 1, consecutive points distinct.
#[derive(Debug, Clone, PartialEq)]
pub struct WaypointPath {
    waypoints: Vec<Vec3>,
}

impl WaypointPath {
    pub fn new(waypoints: Vec<Vec3>) -> Result<Self, PlanError> {
        if waypoints.is_empty() {
            return Err(PlanError::InvalidPath("a path needs at least one waypoint".into()));
        }
        if let Some(k) = waypoints.windows(2).position(|w| w[0] == w[1]) {
            return Err(PlanError::InvalidPath(format!("waypoints {k} and {} coincide", k + 1)));
        }
        Ok(Self { waypoints })
    }

    pub fn waypoints(&self) -> &[Vec3] {
        &self.waypoints
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn first(&self) -> Vec3 {
        self.waypoints[0]
    }

    pub fn last(&self) -> Vec3 {
        self.waypoints[self.waypoints.len() - 1]
    }
}

/// Sum of consecutive segment lengths.
pub fn path_length(path: &WaypointPath) -> f64 {
    polyline_length(path.waypoints())
}

pub fn polyline_length(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerLimits {
    /// m/s
    pub v_max: f64,
    /// m/s²
    pub a_max: f64,
    /// Hz
    pub sample_rate: f64,
}

impl Default for PlannerLimits {
    fn default() -> Self {
        Self { v_max: 2.0, a_max: 2.0, sample_rate: 30.0 }
    }
}

impl PlannerLimits {
    pub fn validate(&self) -> Result<(), PlanError> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if ok(self.v_max) && ok(self.a_max) && ok(self.sample_rate) {
            Ok(())
        } else {
            Err(PlanError::Invalid(format!("planner limits must be positive: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    #[serde(with = "vec3_array")]
    pub position: Vec3,
    #[serde(with = "vec3_array")]
    pub velocity: Vec3,
    pub yaw: f64,
    pub pitch: f64,
}

/// Time-stamped 6-DoF samples with zero roll.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory6DoF {
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory6DoF {
    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn max_speed(&self) -> f64 {
        self.samples.iter().map(|s| s.velocity.norm()).fold(0.0, f64::max)
    }

    /// Largest change in speed per unit time between consecutive samples.
    pub fn max_tangential_acceleration(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| (w[1].velocity.norm() - w[0].velocity.norm()).abs() / (w[1].t - w[0].t))
            .fold(0.0, f64::max)
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.samples.iter().map(|s| s.position).collect()
    }

    pub fn length(&self) -> f64 {
        polyline_length(&self.positions())
    }

    pub fn timestamps_increasing(&self) -> bool {
        self.samples.windows(2).all(|w| w[1].t > w[0].t)
    }

    /// Appends a leg that starts where this trajectory ends, shifting its
    /// clock and dropping its duplicate first sample.
    pub fn append_leg(&mut self, leg: &Trajectory6DoF) {
        let Some(last) = self.samples.last().copied() else {
            self.samples.extend_from_slice(&leg.samples);
            return;
        };
        let skip = usize::from(leg.samples.first().is_some_and(|s| (s.position - last.position).norm() < 1e-9));
        for s in leg.samples.iter().skip(skip) {
            self.samples.push(TrajectorySample { t: s.t + last.t, ..*s });
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&serde_json::to_string(s).expect("sample serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let samples =
            text.lines().filter(|l| !l.trim().is_empty()).map(serde_json::from_str).collect::<Result<_, _>>()?;
        Ok(Self { samples })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoothingParams {
    pub alpha: f64,
    pub iterations: usize,
}

impl Default for SmoothingParams {
    fn default() -> Self {
        Self { alpha: 0.5, iterations: 10 }
    }
}

pub trait Planner: Send + Sync {
    fn limits(&self) -> PlannerLimits;

    fn plan(&self, grid: &OccupancyGrid, start: &Vec3, goal: &Vec3) -> Result<Trajectory6DoF, PlanError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferencePlanner {
    pub limits: PlannerLimits,
    pub smoothing: SmoothingParams,
    /// Waypoints in the heading smoothing window (odd).
    pub heading_window: usize,
}

impl Default for ReferencePlanner {
    fn default() -> Self {
        Self { limits: PlannerLimits::default(), smoothing: SmoothingParams::default(), heading_window: 5 }
    }
}

impl ReferencePlanner {
    /// A* followed by collision-aware smoothing.
    pub fn waypoints(&self, grid: &OccupancyGrid, start: &Vec3, goal: &Vec3) -> Result<WaypointPath, PlanError> {
        let raw = astar(grid, start, goal)?;
        Ok(laplacian_smooth(&raw, grid, self.smoothing.alpha, self.smoothing.iterations))
    }
}

impl Planner for ReferencePlanner {
    fn limits(&self) -> PlannerLimits {
        self.limits
    }

    fn plan(&self, grid: &OccupancyGrid, start: &Vec3, goal: &Vec3) -> Result<Trajectory6DoF, PlanError> {
        let path = self.waypoints(grid, start, goal)?;
        let headings = path_headings(&path, self.heading_window);
        time_parameterize(&path, &self.limits, &headings)
    }
}
