//! Labeled 3D boxes, distance-aware target selection and multi-view fusion.

mod fusion;

use std::cmp::Ordering;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{bearing, vec3_array, wrap_angle, Aabb, Vec3};

pub use fusion::{fuse_detections, iou_aabb};

/// Oriented box: `half_extents` along the box's local axes, which are the
/// world axes rotated counterclockwise by `yaw` about +z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub label: String,
    #[serde(with = "vec3_array")]
    pub center: Vec3,
    #[serde(with = "vec3_array")]
    pub half_extents: Vec3,
    pub yaw: f64,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_frame: Option<u64>,
    /// Free-form appearance attribute ("green sofa"), when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub appearance: Option<String>,
}

impl Box3D {
    pub fn new(label: impl Into<String>, center: Vec3, half_extents: Vec3) -> Self {
        Self {
            label: label.into(),
            center,
            half_extents,
            yaw: 0.0,
            confidence: 1.0,
            source_frame: None,
            appearance: None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !self.half_extents.iter().all(|h| *h > 0.0 && h.is_finite()) {
            return Err(format!("box `{}` has non-positive half extents", self.label));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(format!("box `{}` confidence {} outside [0, 1]", self.label, self.confidence));
        }
        Ok(())
    }

    /// World point expressed in the box frame.
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        let d = p - self.center;
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(c * d.x + s * d.y, -s * d.x + c * d.y, d.z)
    }

    /// World direction expressed in the box frame.
    pub fn rotate_to_local(&self, v: &Vec3) -> Vec3 {
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(c * v.x + s * v.y, -s * v.x + c * v.y, v.z)
    }

    /// Closed containment: points on a face count as inside.
    pub fn contains(&self, p: &Vec3) -> bool {
        let l = self.to_local(p);
        (0..3).all(|i| l[i].abs() <= self.half_extents[i])
    }

    /// Containment in the box grown by `margin` along each local axis.
    pub fn contains_with_margin(&self, p: &Vec3, margin: f64) -> bool {
        let l = self.to_local(p);
        (0..3).all(|i| l[i].abs() <= self.half_extents[i] + margin)
    }

    pub fn bounding_radius(&self) -> f64 {
        self.half_extents.norm()
    }

    /// World-axis-aligned box enclosing the oriented box.
    pub fn enclosing_aabb(&self) -> Aabb {
        let (s, c) = self.yaw.sin_cos();
        let h = self.half_extents;
        let half = Vec3::new(c.abs() * h.x + s.abs() * h.y, s.abs() * h.x + c.abs() * h.y, h.z);
        Aabb { min: self.center - half, max: self.center + half }
    }

    /// First parameter `s ∈ [0, 1]` at which `a + s·(b − a)` is inside the box.
    pub fn segment_entry(&self, a: &Vec3, b: &Vec3) -> Option<f64> {
        let local = Aabb { min: -self.half_extents, max: self.half_extents };
        let dir = self.rotate_to_local(&(b - a));
        local.ray_interval(&self.to_local(a), &dir).map(|(t0, _)| t0).filter(|t| *t <= 1.0)
    }
}

/// The candidate set 𝒪 together with the scene center it is measured from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub boxes: Vec<Box3D>,
    #[serde(with = "vec3_array")]
    pub scene_center: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionParams {
    pub d_th1: f64,
    pub d_th2: f64,
    /// Radians.
    pub theta_th: f64,
    pub n_t: usize,
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self { d_th1: 3.0, d_th2: 4.0, theta_th: 35f64.to_radians(), n_t: 5 }
    }
}

impl SelectionParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.d_th1 > 0.0 && self.d_th1 < self.d_th2 && self.d_th2.is_finite()) {
            return Err(format!("need 0 < d_th1 < d_th2, got {} and {}", self.d_th1, self.d_th2));
        }
        if !(self.theta_th > 0.0 && self.theta_th < PI) {
            return Err(format!("theta_th {} outside (0, π)", self.theta_th));
        }
        if self.n_t == 0 {
            return Err("n_t must be at least 1".into());
        }
        Ok(())
    }
}

pub fn center_distance(b: &Box3D, center: &Vec3) -> f64 {
    (b.center - center).norm()
}

/// Difference of horizontal azimuths about `center`, in `[0, π]`. A box
/// directly above or below the center counts as every direction (0).
pub fn azimuth_difference(a: &Box3D, b: &Box3D, center: &Vec3) -> f64 {
    let da = a.center - center;
    let db = b.center - center;
    if da.xy().norm() < 1e-9 || db.xy().norm() < 1e-9 {
        return 0.0;
    }
    wrap_angle(bearing(&da) - bearing(&db)).abs()
}

/// Descending distance, then ascending center (lexicographic), then label.
fn selection_order(boxes: &[Box3D], dist: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..boxes.len()).collect();
    order.sort_by(|&i, &j| {
        dist[j]
            .total_cmp(&dist[i])
            .then_with(|| {
                (0..3)
                    .map(|k| boxes[i].center[k].total_cmp(&boxes[j].center[k]))
                    .find(|o| *o != Ordering::Equal)
                    .unwrap_or(Ordering::Equal)
            })
            .then_with(|| boxes[i].label.cmp(&boxes[j].label))
    });
    order
}

/// Distance-aware greedy target selection.
///
/// Walks candidates from farthest to nearest; accepts active ones beyond
/// `d_th2` and deactivates the rest that are closer than `d_th1` to the
/// accepted box or within `theta_th` of its azimuth. With no acceptance,
/// falls back to the farthest candidate in `(d_th1, d_th2]`.
pub fn select_targets(candidates: &CandidateSet, params: &SelectionParams) -> Vec<Box3D> {
    let boxes = &candidates.boxes;
    let c = candidates.scene_center;
    let dist: Vec<f64> = boxes.iter().map(|b| center_distance(b, &c)).collect();
    let order = selection_order(boxes, &dist);
    let mut active = vec![true; boxes.len()];
    let mut chosen = Vec::new();
    for (pos, &i) in order.iter().enumerate() {
        if !active[i] || dist[i] <= params.d_th2 {
            continue;
        }
        chosen.push(i);
        for &j in &order[pos + 1..] {
            if active[j]
                && ((boxes[j].center - boxes[i].center).norm() < params.d_th1
                    || azimuth_difference(&boxes[i], &boxes[j], &c) < params.theta_th)
            {
                active[j] = false;
            }
        }
        if chosen.len() == params.n_t {
            break;
        }
    }
    if chosen.is_empty() {
        // `order` is already farthest-first with the tie-break applied.
        if let Some(&i) = order.iter().find(|&&i| dist[i] > params.d_th1 && dist[i] <= params.d_th2) {
            chosen.push(i);
        }
    }
    chosen.into_iter().map(|i| boxes[i].clone()).collect()
}

/// Keeps detections whose center is within `d_th1` of the camera.
pub fn prune_by_camera_distance(detections: &[Box3D], camera_position: &Vec3, d_th1: f64) -> Vec<Box3D> {
    detections.iter().filter(|b| (b.center - camera_position).norm() <= d_th1).cloned().collect()
}

/// On-disk annotation map: `{scene_id, boxes}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub scene_id: String,
    pub boxes: Vec<Box3D>,
}
