//! Orbit and rig camera poses.
//!
//! Yaw is measured from +y toward +x and pitch is the elevation above the
//! horizontal plane, so a view direction is
//! `[sin(yaw)·cos(pitch), cos(yaw)·cos(pitch), sin(pitch)]`. Roll is always zero.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::geometry::{bearing, from_array, to_array, Vec3};
use crate::planner::WaypointPath;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "PoseRecord", into = "PoseRecord")]
pub struct CameraPose {
    pub position: Vec3,
    pub direction: Vec3,
    pub yaw: f64,
    pub pitch: f64,
}

/// JSON-lines pose record: `{position, yaw, pitch}`.
#[derive(Serialize, Deserialize)]
struct PoseRecord {
    position: [f64; 3],
    yaw: f64,
    pitch: f64,
}

impl From<PoseRecord> for CameraPose {
    fn from(r: PoseRecord) -> Self {
        CameraPose::new(from_array(r.position), r.yaw, r.pitch)
    }
}

impl From<CameraPose> for PoseRecord {
    fn from(p: CameraPose) -> Self {
        PoseRecord { position: to_array(&p.position), yaw: p.yaw, pitch: p.pitch }
    }
}

impl CameraPose {
    pub fn new(position: Vec3, yaw: f64, pitch: f64) -> Self {
        Self { position, direction: direction_from_angles(yaw, pitch), yaw, pitch }
    }

    /// Camera-frame right vector (horizontal, zero roll).
    pub fn right(&self) -> Vec3 {
        Vec3::new(self.yaw.cos(), -self.yaw.sin(), 0.0)
    }

    pub fn up(&self) -> Vec3 {
        self.right().cross(&self.direction)
    }
}

pub fn direction_from_angles(yaw: f64, pitch: f64) -> Vec3 {
    let (sy, cy) = yaw.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    Vec3::new(sy * cp, cy * cp, sp)
}

/// Inward-facing pose on the orbit: the camera sits at `center − r·d` and
/// looks along `d` through the center.
pub fn orbit_pose(center: &Vec3, yaw: f64, pitch: f64, r_orb: f64) -> CameraPose {
    let d = direction_from_angles(yaw, pitch);
    CameraPose { position: center - d * r_orb, direction: d, yaw, pitch }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrbitConfig {
    /// Orbit radius, metres.
    pub r_orb: f64,
    /// Elevation levels, radians.
    pub pitch_levels: Vec<f64>,
    /// Yaw increment, radians; must divide a full turn.
    pub yaw_step: f64,
}

impl Default for OrbitConfig {
    fn default() -> Self {
        Self {
            r_orb: 0.1,
            pitch_levels: [-60.0f64, -30.0, 0.0, 30.0, 60.0].iter().map(|d| d.to_radians()).collect(),
            yaw_step: 30f64.to_radians(),
        }
    }
}

impl OrbitConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.r_orb.is_nan() || self.r_orb <= 0.0 {
            return Err(format!("r_orb must be positive, got {}", self.r_orb));
        }
        if self.yaw_step.is_nan() || self.yaw_step <= 0.0 {
            return Err(format!("yaw_step must be positive, got {}", self.yaw_step));
        }
        let n = TAU / self.yaw_step;
        if (n - n.round()).abs() * self.yaw_step > 1e-9 {
            return Err(format!("yaw_step {} does not divide a full turn", self.yaw_step));
        }
        if let Some(p) = self.pitch_levels.iter().find(|p| p.abs() > FRAC_PI_2 + 1e-12) {
            return Err(format!("pitch level {p} outside [-π/2, π/2]"));
        }
        Ok(())
    }

    pub fn yaw_count(&self) -> usize {
        (TAU / self.yaw_step).round() as usize
    }
}

/// Full yaw sweep at each pitch level, pitch-major, yaw ascending from 0.
pub fn orbit_sweep(config: &OrbitConfig, center: &Vec3) -> Vec<CameraPose> {
    let n = config.yaw_count();
    config
        .pitch_levels
        .iter()
        .flat_map(|&pitch| (0..n).map(move |k| orbit_pose(center, k as f64 * config.yaw_step, pitch, config.r_orb)))
        .collect()
}

/// Front, left, right and back views at one position. Left is `heading + π/2`.
pub fn four_view_rig(position: &Vec3, heading_yaw: f64) -> [CameraPose; 4] {
    [0.0, FRAC_PI_2, -FRAC_PI_2, PI].map(|off| CameraPose::new(*position, heading_yaw + off, 0.0))
}

/// Per-waypoint yaw from a centered moving average of forward differences.
///
/// `window` counts waypoints, so a window of 3 averages the two segments
/// adjacent to a waypoint.
///
/// The window is truncated at the path ends. Where the averaged tangent has
/// no horizontal component the neighbouring resolved heading is reused.
pub fn path_headings(path: &WaypointPath, window: usize) -> Vec<f64> {
    let q = path.waypoints();
    if q.len() < 2 {
        return vec![0.0; q.len()];
    }
    let diffs: Vec<Vec3> = q.windows(2).map(|w| w[1] - w[0]).collect();
    let half = window.max(1) / 2;
    let tangents: Vec<Option<f64>> = (0..q.len())
        .map(|k| {
            // Differences between consecutive waypoints of the window [k-h, k+h].
            let (lo, hi) = if half == 0 {
                let j = k.min(diffs.len() - 1);
                (j, j)
            } else {
                (k.saturating_sub(half), (k + half - 1).min(diffs.len() - 1))
            };
            let mean = diffs[lo..=hi].iter().sum::<Vec3>() / (hi - lo + 1) as f64;
            (mean.x.hypot(mean.y) > 1e-12).then(|| bearing(&mean))
        })
        .collect();
    let mut last = tangents.iter().flatten().next().copied().unwrap_or(0.0);
    tangents
        .into_iter()
        .map(|t| {
            if let Some(h) = t {
                last = h;
            }
            last
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &Vec3, b: &Vec3) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn direction_special_angles() {
        assert!(close(&direction_from_angles(0.0, 0.0), &Vec3::new(0.0, 1.0, 0.0)));
        assert!(close(&direction_from_angles(FRAC_PI_2, 0.0), &Vec3::new(1.0, 0.0, 0.0)));
        assert!(close(&direction_from_angles(0.0, FRAC_PI_2), &Vec3::new(0.0, 0.0, 1.0)));
    }

    #[test]
    fn orbit_pose_examples() {
        let p = orbit_pose(&Vec3::zeros(), 0.0, 0.0, 0.1);
        assert!(close(&p.position, &Vec3::new(0.0, -0.1, 0.0)));
        assert!(close(&p.direction, &Vec3::new(0.0, 1.0, 0.0)));
        let p = orbit_pose(&Vec3::repeat(1.0), PI, 0.0, 0.1);
        assert!(close(&p.position, &Vec3::new(1.0, 1.1, 1.0)));
    }

    #[test]
    fn sweep_counts_and_order() {
        let cfg = OrbitConfig { r_orb: 0.1, pitch_levels: vec![0.0], yaw_step: FRAC_PI_2 };
        let poses = orbit_sweep(&cfg, &Vec3::zeros());
        let yaws: Vec<f64> = poses.iter().map(|p| p.yaw).collect();
        assert_eq!(yaws, vec![0.0, FRAC_PI_2, PI, 3.0 * FRAC_PI_2]);

        let cfg = OrbitConfig { r_orb: 0.1, pitch_levels: vec![-PI / 6.0, 0.0, PI / 6.0], yaw_step: PI / 6.0 };
        cfg.validate().unwrap();
        let c = Vec3::new(0.3, -2.0, 1.0);
        let poses = orbit_sweep(&cfg, &c);
        assert_eq!(poses.len(), 36);
        assert_eq!(poses[0].pitch, -PI / 6.0);
        assert_eq!(poses[12].pitch, 0.0);
        for p in &poses {
            assert!((p.position + p.direction * 0.1 - c).norm() < 1e-9);
        }
        assert_eq!(orbit_sweep(&OrbitConfig::default(), &c).len(), 60);
    }

    #[test]
    fn config_validation() {
        assert!(OrbitConfig::default().validate().is_ok());
        let bad = OrbitConfig { yaw_step: 0.7, ..OrbitConfig::default() };
        assert!(bad.validate().is_err());
        let bad = OrbitConfig { r_orb: 0.0, ..OrbitConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn rig_layout() {
        let rig = four_view_rig(&Vec3::new(1.0, 2.0, 3.0), 0.0);
        let yaws: Vec<f64> = rig.iter().map(|p| p.yaw).collect();
        assert_eq!(yaws, vec![0.0, FRAC_PI_2, -FRAC_PI_2, PI]);
        assert!(rig.iter().all(|p| p.position == rig[0].position));
        assert!((rig[0].direction + rig[3].direction).norm() < 1e-9);
        // The "left" view is heading + π/2, which for heading 0 looks along +x.
        assert!((rig[1].direction - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    fn path(points: &[[f64; 3]]) -> WaypointPath {
        WaypointPath::new(points.iter().map(|p| from_array(*p)).collect()).unwrap()
    }

    #[test]
    fn straight_headings() {
        let along_y = path(&[[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 2.0, 0.0], [0.0, 3.0, 0.0]]);
        assert!(path_headings(&along_y, 5).iter().all(|h| h.abs() < 1e-12));
        let along_x = path(&[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]);
        assert!(path_headings(&along_x, 5).iter().all(|h| (h - FRAC_PI_2).abs() < 1e-12));
        assert_eq!(path_headings(&path(&[[1.0, 1.0, 1.0]]), 5), vec![0.0]);
    }

    #[test]
    fn right_angle_corner_window_three() {
        // Two +y steps then two +x steps.
        let p = path(&[[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 2.0, 0.0], [1.0, 2.0, 0.0], [2.0, 2.0, 0.0]]);
        let h = path_headings(&p, 3);
        assert!(h[0].abs() < 1e-12);
        assert!(h[1].abs() < 1e-12);
        // Corner: mean of (0,1) and (1,0).
        assert!((h[2] - PI / 4.0).abs() < 1e-12);
        assert!((h[3] - FRAC_PI_2).abs() < 1e-12);
        assert!((h[4] - FRAC_PI_2).abs() < 1e-12);
        // Window 5 at the corner: (0,1),(0,1),(1,0),(1,0).
        assert!((path_headings(&p, 5)[2] - PI / 4.0).abs() < 1e-12);
        // Window 5 at k=1: (0,1),(0,1),(1,0) -> atan2(1/3, 2/3).
        assert!((path_headings(&p, 5)[1] - (1.0f64).atan2(2.0)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn orbit_identity(yaw in -10.0..10.0f64, pitch in -FRAC_PI_2..FRAC_PI_2, cx in -50.0..50.0f64, cy in -50.0..50.0f64, cz in -50.0..50.0f64) {
            let c = Vec3::new(cx, cy, cz);
            let p = orbit_pose(&c, yaw, pitch, 0.1);
            prop_assert!((p.direction.norm() - 1.0).abs() < 1e-9);
            prop_assert!((p.position + p.direction * 0.1 - c).norm() < 1e-9);
            prop_assert!((direction_from_angles(yaw + TAU, pitch) - p.direction).norm() < 1e-9);
        }

        #[test]
        fn headings_shift_equivariant(pts in proptest::collection::vec((-5.0..5.0f64, -5.0..5.0f64, -1.0..1.0f64), 2..12), dx in -100.0..100.0f64, dy in -100.0..100.0f64, dz in -10.0..10.0f64) {
            let mut wp: Vec<Vec3> = pts.iter().map(|p| Vec3::new(p.0, p.1, p.2)).collect();
            wp.dedup_by(|a, b| (*a - *b).norm() < 1e-6);
            prop_assume!(wp.len() >= 2);
            let a = WaypointPath::new(wp.clone()).unwrap();
            let shift = Vec3::new(dx, dy, dz);
            let b = WaypointPath::new(wp.iter().map(|p| p + shift).collect()).unwrap();
            for (x, y) in path_headings(&a, 5).iter().zip(path_headings(&b, 5)) {
                prop_assert!(crate::geometry::wrap_angle(x - y).abs() < 1e-6);
            }
        }
    }
}
