//! Interfaces to the external services (world generator, 3D detector,
//! language model), their deterministic mocks and JSON-over-HTTP clients.

mod http;
mod mock;
mod taxonomy;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotate::Box3D;
use crate::camera::CameraPose;
use crate::nav::NavTarget;
use crate::scene::{DepthImage, Intrinsics, SplatScene};

pub use http::{HttpConfig, HttpDetector, HttpDetectorFactory, HttpLanguage, HttpWorldGenerator};
pub use mock::{
    MockDetector, MockDetectorConfig, MockDetectorFactory, MockLanguage, MockWorldConfig, MockWorldGenerator,
    QualityFault,
};
pub use taxonomy::{sample_scene_type, scene_spec_for, Category, SceneSpec, SceneTaxonomy};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ServiceError {
    #[error("{endpoint}: HTTP {status}: {message}")]
    Status { endpoint: String, status: u16, message: String },
    #[error("{endpoint}: transport failure: {message}")]
    Transport { endpoint: String, message: String },
    #[error("{endpoint}: bad response: {message}")]
    Decode { endpoint: String, message: String },
    #[error("invalid request: {0}")]
    Invalid(String),
}

/// Stable 64-bit seed derived from a base seed and a domain tag.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(tag.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Stable 64-bit hash of any serializable value (via its JSON encoding).
pub fn stable_hash<T: Serialize>(value: &T) -> u64 {
    let bytes = serde_json::to_vec(value).expect("value serializes");
    let d = Sha256::digest(&bytes);
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// A generated scene. `objects` holds generator-side ground truth when the
/// generator knows it (the mock does, remote generators do not).
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedWorld {
    pub seed: u64,
    pub scene: SplatScene,
    pub objects: Vec<Box3D>,
}

pub trait WorldGenerator: Send + Sync {
    fn generate(&self, spec: &SceneSpec) -> Result<GeneratedWorld, ServiceError>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRequest {
    pub frame_id: u64,
    pub pose: CameraPose,
    pub intrinsics: Intrinsics,
    pub depth: Option<DepthImage>,
    /// Opaque handle to a rendered RGB image, if any.
    pub rgb: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResponse {
    pub frame_id: u64,
    pub boxes: Vec<Box3D>,
}

pub trait Detector: Send + Sync {
    fn detect(&self, request: &DetectionRequest) -> Result<DetectionResponse, ServiceError>;
}

/// Opens a detector session for one generated scene.
pub trait DetectorFactory: Send + Sync {
    fn session(&self, world: &GeneratedWorld) -> Result<Box<dyn Detector>, ServiceError>;
}

/// Per-frame metadata handed to the quality assessor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub index: usize,
    pub t: f64,
    /// Fraction of pixels with no depth return.
    pub infinite_fraction: f64,
    pub min_depth: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityVerdict {
    pub accepted: bool,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    ObjectCentered,
    RelativePositioned,
    AppearanceCentered,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptVariant {
    pub style: PromptStyle,
    pub text: String,
}

pub trait LanguageAnnotator: Send + Sync {
    fn assess_quality(&self, frames: &[FrameMeta]) -> Result<QualityVerdict, ServiceError>;

    /// Up to three variants with distinct styles.
    fn generate_prompts(&self, target: &NavTarget, context: &[Box3D]) -> Result<Vec<PromptVariant>, ServiceError>;
}

/// The three service handles used by a pipeline run.
#[derive(Clone)]
pub struct Services {
    pub world: Arc<dyn WorldGenerator>,
    pub detector: Arc<dyn DetectorFactory>,
    pub language: Arc<dyn LanguageAnnotator>,
}

impl Services {
    pub fn mock() -> Self {
        Self {
            world: Arc::new(MockWorldGenerator::default()),
            detector: Arc::new(MockDetectorFactory::default()),
            language: Arc::new(MockLanguage::default()),
        }
    }
}

/// Remote endpoints; unset entries fall back to the mocks.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceEndpoints {
    pub world_url: Option<String>,
    pub detect_url: Option<String>,
    pub llm_url: Option<String>,
    pub timeout_ms: Option<u64>,
}

impl ServiceEndpoints {
    /// Overrides from `FORGE_WORLD_URL`, `FORGE_DETECT_URL` and
    /// `FORGE_LLM_URL`.
    pub fn with_env(mut self) -> Self {
        let get = |k: &str| std::env::var(k).ok().filter(|v| !v.is_empty());
        self.world_url = get("FORGE_WORLD_URL").or(self.world_url);
        self.detect_url = get("FORGE_DETECT_URL").or(self.detect_url);
        self.llm_url = get("FORGE_LLM_URL").or(self.llm_url);
        self
    }

    pub fn build(&self, mocks: Services) -> Services {
        let cfg = |url: &String| {
            let mut c = HttpConfig::new(url.clone());
            if let Some(ms) = self.timeout_ms {
                c.timeout = std::time::Duration::from_millis(ms);
            }
            c
        };
        Services {
            world: match &self.world_url {
                Some(u) => Arc::new(HttpWorldGenerator::new(cfg(u))),
                None => mocks.world,
            },
            detector: match &self.detect_url {
                Some(u) => Arc::new(HttpDetectorFactory::new(cfg(u))),
                None => mocks.detector,
            },
            language: match &self.llm_url {
                Some(u) => Arc::new(HttpLanguage::new(cfg(u))),
                None => mocks.language,
            },
        }
    }
}
