use super::{prune_by_camera_distance, Box3D, CandidateSet};
use crate::camera::CameraPose;
use crate::geometry::{Aabb, Vec3};

/// Intersection-over-union of two axis-aligned boxes.
pub fn iou_aabb(a: &Aabb, b: &Aabb) -> f64 {
    let inter = a.intersection(b).map_or(0.0, |i| i.volume());
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

struct Cluster {
    members: Vec<Box3D>,
    fused: Box3D,
}

fn fuse(members: &[Box3D]) -> Box3D {
    if let [only] = members {
        return only.clone();
    }
    let total: f64 = members.iter().map(|b| b.confidence).sum();
    let weight = |b: &Box3D| if total > 0.0 { b.confidence / total } else { 1.0 / members.len() as f64 };
    let mut center = Vec3::zeros();
    let mut half = Vec3::zeros();
    let (mut s, mut c) = (0.0, 0.0);
    for b in members {
        let w = weight(b);
        center += b.center * w;
        half += b.half_extents * w;
        s += w * b.yaw.sin();
        c += w * b.yaw.cos();
    }
    Box3D {
        label: members[0].label.clone(),
        center,
        half_extents: half,
        yaw: s.atan2(c),
        confidence: members.iter().map(|b| b.confidence).fold(0.0, f64::max),
        source_frame: None,
        appearance: members.iter().find_map(|b| b.appearance.clone()),
    }
}

/// Fuses per-frame detections into one box per object.
///
/// Each frame is first pruned to detections within `d_th1` of its camera
/// (pass `f64::INFINITY` to disable). Survivors are visited in input order
/// and joined to the same-label cluster whose current fused box overlaps
/// them most, if that IoU (of world-aligned enclosing boxes) reaches
/// `iou_threshold`; otherwise they start a new cluster. A cluster reports
/// confidence-weighted mean center, extents and yaw, and its maximum
/// confidence.
pub fn fuse_detections(
    frames: &[(CameraPose, Vec<Box3D>)],
    iou_threshold: f64,
    d_th1: f64,
    scene_center: Vec3,
) -> CandidateSet {
    let mut clusters: Vec<Cluster> = Vec::new();
    for (pose, dets) in frames {
        for det in prune_by_camera_distance(dets, &pose.position, d_th1) {
            let aabb = det.enclosing_aabb();
            let best = clusters
                .iter()
                .enumerate()
                .filter(|(_, c)| c.fused.label == det.label)
                .map(|(i, c)| (i, iou_aabb(&aabb, &c.fused.enclosing_aabb())))
                .filter(|(_, iou)| *iou >= iou_threshold)
                .fold(None, |acc: Option<(usize, f64)>, (i, iou)| match acc {
                    Some((_, best)) if best >= iou => acc,
                    _ => Some((i, iou)),
                });
            match best {
                Some((i, _)) => {
                    let cl = &mut clusters[i];
                    cl.members.push(det);
                    cl.fused = fuse(&cl.members);
                }
                None => clusters.push(Cluster { fused: det.clone(), members: vec![det] }),
            }
        }
    }
    CandidateSet { boxes: clusters.into_iter().map(|c| c.fused).collect(), scene_center }
}
