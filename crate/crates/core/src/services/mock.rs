//! Deterministic stand-ins for the external services.

use std::f64::consts::FRAC_PI_4;

use nalgebra::UnitQuaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{
    derive_seed, stable_hash, DetectionRequest, DetectionResponse, Detector, DetectorFactory, FrameMeta,
    GeneratedWorld, LanguageAnnotator, PromptStyle, PromptVariant, QualityVerdict, SceneSpec, ServiceError,
    WorldGenerator,
};
use crate::annotate::Box3D;
use crate::geometry::{Aabb, Vec3};
use crate::nav::NavTarget;
use crate::scene::{GaussianPrimitive, SplatScene};

const LABELS: [&str; 20] = [
    "chair",
    "table",
    "sofa",
    "bookshelf",
    "cabinet",
    "bed",
    "desk",
    "lamp",
    "plant",
    "television",
    "refrigerator",
    "counter",
    "shelf",
    "bench",
    "crate",
    "barrel",
    "locker",
    "printer",
    "vending machine",
    "kiosk",
];

const COLORS: [&str; 8] = ["green", "red", "blue", "white", "black", "wooden", "grey", "yellow"];

/// Procedural room generator: a closed box shell plus surface-sampled
/// objects resting on the floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockWorldConfig {
    /// Half the room's horizontal side, metres.
    pub room_half_extent: f64,
    pub floor_z: f64,
    pub ceiling_z: f64,
    pub min_objects: usize,
    pub max_objects: usize,
    /// Surface sampling pitch of the shell and objects, metres.
    pub spacing: f64,
    /// Minimum horizontal gap between object footprints.
    pub object_gap: f64,
    /// Minimum distance from the scene center to any object.
    pub center_clearance: f64,
    pub wall_margin: f64,
    /// Probability that an object carries an appearance attribute.
    pub appearance_probability: f64,
}

impl Default for MockWorldConfig {
    fn default() -> Self {
        Self {
            room_half_extent: 8.0,
            floor_z: -1.5,
            ceiling_z: 1.5,
            min_objects: 5,
            max_objects: 30,
            spacing: 0.1,
            object_gap: 0.6,
            center_clearance: 1.0,
            wall_margin: 0.5,
            appearance_probability: 0.5,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MockWorldGenerator {
    pub config: MockWorldConfig,
}

fn aabb_distance(b: &Aabb, p: &Vec3) -> f64 {
    let d = (b.min - p).sup(&(p - b.max)).sup(&Vec3::zeros());
    d.norm()
}

fn footprints_clear(a: &Aabb, b: &Aabb, gap: f64) -> bool {
    (0..2).any(|i| a.min[i] - b.max[i] >= gap || b.min[i] - a.max[i] >= gap)
}

/// Points on a regular lattice over `[-h, h]` with pitch at most `spacing`.
fn lattice(h: f64, spacing: f64) -> impl Iterator<Item = f64> + Clone {
    let n = ((2.0 * h / spacing).ceil() as usize).max(1);
    (0..n).map(move |i| -h + 2.0 * h * (i as f64 + 0.5) / n as f64)
}

fn surface_points(b: &Box3D, spacing: f64) -> Vec<Vec3> {
    let h = b.half_extents;
    let mut local = Vec::new();
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for sign in [-1.0, 1.0] {
            for a in lattice(h[u], spacing) {
                for c in lattice(h[v], spacing) {
                    let mut p = Vec3::zeros();
                    p[axis] = sign * h[axis];
                    p[u] = a;
                    p[v] = c;
                    local.push(p);
                }
            }
        }
    }
    let (s, c) = b.yaw.sin_cos();
    local.into_iter().map(|p| b.center + Vec3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z)).collect()
}

impl MockWorldGenerator {
    pub fn new(config: MockWorldConfig) -> Self {
        Self { config }
    }

    fn shell(&self) -> Vec<Vec3> {
        let cfg = &self.config;
        let s = cfg.spacing;
        let h = cfg.room_half_extent;
        let n = (2.0 * h / s).round() as usize;
        let nz = ((cfg.ceiling_z - cfg.floor_z) / s).round() as usize;
        let at = |i: usize| -h + s * (i as f64 + 0.5);
        let zat = |k: usize| cfg.floor_z + s * (k as f64 + 0.5);
        let mut pts = Vec::new();
        for j in 0..n {
            for i in 0..n {
                pts.push(Vec3::new(at(i), at(j), cfg.floor_z - 0.5 * s));
                pts.push(Vec3::new(at(i), at(j), cfg.ceiling_z + 0.5 * s));
            }
        }
        for k in 0..nz {
            for i in 0..n {
                pts.push(Vec3::new(at(i), -h - 0.5 * s, zat(k)));
                pts.push(Vec3::new(at(i), h + 0.5 * s, zat(k)));
                pts.push(Vec3::new(-h - 0.5 * s, at(i), zat(k)));
                pts.push(Vec3::new(h + 0.5 * s, at(i), zat(k)));
            }
        }
        pts
    }

    fn place_objects(&self, rng: &mut ChaCha8Rng) -> Vec<Box3D> {
        let cfg = &self.config;
        let count = rng.random_range(cfg.min_objects..=cfg.max_objects);
        let max_hz = (0.5 * (cfg.ceiling_z - cfg.floor_z) - 0.3).max(0.45);
        let center = Vec3::zeros();
        let mut placed: Vec<Box3D> = Vec::with_capacity(count);
        let mut attempts = 0;
        while placed.len() < count && attempts < 200 * count {
            attempts += 1;
            let half =
                Vec3::new(rng.random_range(0.2..0.6), rng.random_range(0.2..0.6), rng.random_range(0.45..max_hz));
            let yaw = rng.random_range(-FRAC_PI_4..FRAC_PI_4);
            let reach = cfg.room_half_extent - cfg.wall_margin - half.xy().norm();
            if reach <= 0.0 {
                continue;
            }
            let c = Vec3::new(rng.random_range(-reach..reach), rng.random_range(-reach..reach), cfg.floor_z + half.z);
            let label = LABELS[rng.random_range(0..LABELS.len())];
            let appearance = (rng.random::<f64>() < cfg.appearance_probability)
                .then(|| format!("{} {label}", COLORS[rng.random_range(0..COLORS.len())]));
            let b = Box3D { yaw, appearance, ..Box3D::new(label, c, half) };
            let aabb = b.enclosing_aabb();
            if aabb_distance(&aabb, &center) < cfg.center_clearance {
                continue;
            }
            if placed.iter().all(|o| footprints_clear(&aabb, &o.enclosing_aabb(), cfg.object_gap)) {
                placed.push(b);
            }
        }
        placed
    }

    /// The scene and ground truth for a given seed.
    pub fn generate_seeded(&self, seed: u64) -> GeneratedWorld {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let objects = self.place_objects(&mut rng);
        let radius = 0.75 * self.config.spacing;
        let mut primitives: Vec<GaussianPrimitive> =
            self.shell().into_iter().map(|p| GaussianPrimitive::sphere(p, radius, 0.95)).collect();
        for (i, b) in objects.iter().enumerate() {
            let tint = (i as f64 * 0.37).fract();
            for p in surface_points(b, self.config.spacing) {
                primitives.push(GaussianPrimitive {
                    color_dc: Vec3::new(tint, 1.0 - tint, 0.5),
                    rotation: UnitQuaternion::identity(),
                    ..GaussianPrimitive::sphere(p, radius, 0.9)
                });
            }
        }
        GeneratedWorld { seed, scene: SplatScene::new(primitives, Vec3::zeros()), objects }
    }
}

impl WorldGenerator for MockWorldGenerator {
    fn generate(&self, spec: &SceneSpec) -> Result<GeneratedWorld, ServiceError> {
        Ok(self.generate_seeded(stable_hash(spec)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockDetectorConfig {
    /// Noise growth per metre beyond `noise_free_range`.
    pub sigma0: f64,
    pub noise_free_range: f64,
    pub max_range: f64,
}

impl Default for MockDetectorConfig {
    fn default() -> Self {
        Self { sigma0: 0.2, noise_free_range: 3.0, max_range: 12.0 }
    }
}

/// Returns ground-truth boxes whose centers project into the image and lie
/// within range, with per-axis Gaussian center noise of standard deviation
/// `sigma0 · max(0, dist − noise_free_range)`.
#[derive(Debug, Clone)]
pub struct MockDetector {
    pub objects: Vec<Box3D>,
    pub seed: u64,
    pub config: MockDetectorConfig,
}

impl MockDetector {
    pub fn noise_sigma(&self, dist: f64) -> f64 {
        self.config.sigma0 * (dist - self.config.noise_free_range).max(0.0)
    }
}

impl Detector for MockDetector {
    fn detect(&self, req: &DetectionRequest) -> Result<DetectionResponse, ServiceError> {
        req.intrinsics.validate().map_err(ServiceError::Invalid)?;
        let mut boxes = Vec::new();
        for (i, obj) in self.objects.iter().enumerate() {
            let dist = (obj.center - req.pose.position).norm();
            if dist > self.config.max_range || req.intrinsics.project(&req.pose, &obj.center).is_none() {
                continue;
            }
            let mut b = obj.clone();
            let sigma = self.noise_sigma(dist);
            if sigma > 0.0 {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &format!("detect/{}/{i}", req.frame_id)));
                let n = Normal::new(0.0, sigma).expect("sigma is finite and positive");
                b.center += Vec3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng));
            }
            b.confidence = (1.0 - 0.06 * dist).clamp(0.05, 1.0);
            b.source_frame = Some(req.frame_id);
            boxes.push(b);
        }
        Ok(DetectionResponse { frame_id: req.frame_id, boxes })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockDetectorFactory {
    pub config: MockDetectorConfig,
}

impl DetectorFactory for MockDetectorFactory {
    fn session(&self, world: &GeneratedWorld) -> Result<Box<dyn Detector>, ServiceError> {
        Ok(Box::new(MockDetector { objects: world.objects.clone(), seed: world.seed, config: self.config }))
    }
}

/// Injected quality failures for the mock assessor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QualityFault {
    Always {
        reason: String,
    },
    /// Rejects when more than `max_bad_fraction` of the frames have an
    /// infinite-depth fraction above `coverage_threshold`.
    PoorVisibility {
        coverage_threshold: f64,
        max_bad_fraction: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockLanguage {
    pub fault: Option<QualityFault>,
    /// Neighbours farther than this are not used for relative prompts.
    pub neighbor_radius: f64,
}

impl Default for MockLanguage {
    fn default() -> Self {
        Self { fault: None, neighbor_radius: 2.0 }
    }
}

impl LanguageAnnotator for MockLanguage {
    fn assess_quality(&self, frames: &[FrameMeta]) -> Result<QualityVerdict, ServiceError> {
        let reject = |reason: String| Ok(QualityVerdict { accepted: false, reason });
        if frames.is_empty() {
            return reject("no frames".into());
        }
        match &self.fault {
            Some(QualityFault::Always { reason }) => return reject(reason.clone()),
            Some(QualityFault::PoorVisibility { coverage_threshold, max_bad_fraction }) => {
                let bad = frames.iter().filter(|f| f.infinite_fraction > *coverage_threshold).count();
                if bad as f64 > max_bad_fraction * frames.len() as f64 {
                    return reject(format!("poor visibility: {bad} of {} frames lack depth", frames.len()));
                }
            }
            None => {}
        }
        Ok(QualityVerdict { accepted: true, reason: "ok".into() })
    }

    fn generate_prompts(&self, target: &NavTarget, context: &[Box3D]) -> Result<Vec<PromptVariant>, ServiceError> {
        let obj = &target.object;
        let mut out =
            vec![PromptVariant { style: PromptStyle::ObjectCentered, text: format!("Find the {}.", obj.label) }];
        let neighbor = context
            .iter()
            .filter(|b| !(b.label == obj.label && b.center == obj.center))
            .map(|b| ((b.center - obj.center).norm(), b))
            .filter(|(d, _)| *d <= self.neighbor_radius)
            .fold(None, |acc: Option<(f64, &Box3D)>, cur| match acc {
                Some(best) if best.0 <= cur.0 => Some(best),
                _ => Some(cur),
            });
        if let Some((_, nb)) = neighbor {
            out.push(PromptVariant {
                style: PromptStyle::RelativePositioned,
                text: format!("Go to the {} next to the {}.", obj.label, nb.label),
            });
        }
        if let Some(a) = &obj.appearance {
            out.push(PromptVariant { style: PromptStyle::AppearanceCentered, text: format!("Navigate to the {a}.") });
        }
        Ok(out)
    }
}
