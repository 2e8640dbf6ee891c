//! Per-scene and batch orchestration of the three stages, plus dataset
//! statistics and output validation.
//!
//! Output layout, one directory per scene under `output_root`:
//!
//! ```text
//! scene_<seed>/
//!   manifest.json      stage status and wall time
//!   scene.json         sampled scene type
//!   grid.json grid.bin
//!   annotation.json
//!   targets.json       target sets, rejection counts, navigation config
//!   episodes/set_<i>/  accepted episodes only
//! batch_manifest.json  (batch runs)
//! ```

mod batch;
mod scene;
mod stats;
mod validate;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::annotate::SelectionParams;
use crate::camera::OrbitConfig;
use crate::nav::{EpisodeOptions, NavConfig};
use crate::planner::ReferencePlanner;
use crate::scene::{Intrinsics, SceneError};
use crate::services::{
    MockDetectorConfig, MockDetectorFactory, MockLanguage, MockWorldConfig, MockWorldGenerator, SceneTaxonomy,
    ServiceEndpoints, Services,
};

pub use batch::{run_batch, BatchEntry, BatchManifest};
pub use scene::{
    annotate_scene, run_scene, scene_id_for, AnnotationPass, EpisodeSummary, SceneInfo, SceneManifest, StageRecord,
    StageStatus, TargetsFile, STAGES,
};
pub use stats::{compute_stats, length_summary, DatasetStats};
pub use validate::{validate_output, ValidationFailure, ValidationReport};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("no scenes under {0}")]
    NoScenes(PathBuf),
}

impl PipelineError {
    /// Short machine-readable kind, used by the CLI.
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::Io { .. } => "io",
            PipelineError::Format { .. } => "format",
            PipelineError::Scene(_) => "scene",
            PipelineError::NoScenes(_) => "no_scenes",
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| PipelineError::Format { path: path.to_path_buf(), message: e.to_string() })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Format { path: path.to_path_buf(), message: e.to_string() })
}

/// Scene directories (those holding a `manifest.json`) under `root`, sorted.
pub(crate) fn scene_dirs(root: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(root).map_err(io_err(root))? {
        let path = entry.map_err(io_err(root))?.path();
        if path.join("manifest.json").is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub resolution: f64,
    pub opacity_threshold: f64,
    pub inflation_radius: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { resolution: 0.1, opacity_threshold: 0.5, inflation_radius: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotationConfig {
    /// Same-label detections merge at or above this IoU.
    pub iou_threshold: f64,
    /// Arc length between four-view rigs along exploration paths, metres.
    pub rig_spacing: f64,
    pub intrinsics: Intrinsics,
    /// Attach rendered depth to detection requests. Unset: only for a
    /// remote detector.
    pub send_depth: Option<bool>,
}

impl Default for AnnotationConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.25,
            rig_spacing: 1.0,
            intrinsics: Intrinsics::from_hfov(64, 48, 90f64.to_radians()),
            send_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    /// Use the built-in mocks for every service. When false, each service
    /// with a configured (or environment) endpoint goes remote and the rest
    /// stay mocked.
    pub mock_only: bool,
    pub endpoints: ServiceEndpoints,
    pub mock_world: MockWorldConfig,
    pub mock_detector: MockDetectorConfig,
    pub mock_language: MockLanguage,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            mock_only: true,
            endpoints: ServiceEndpoints::default(),
            mock_world: MockWorldConfig::default(),
            mock_detector: MockDetectorConfig::default(),
            mock_language: MockLanguage::default(),
        }
    }
}

impl ServiceConfig {
    fn endpoints(&self) -> ServiceEndpoints {
        if self.mock_only {
            ServiceEndpoints::default()
        } else {
            self.endpoints.clone().with_env()
        }
    }
}

/// Everything a run needs. Angles are in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub output_root: PathBuf,
    pub master_seed: u64,
    pub worker_count: usize,
    /// JSON taxonomy file; the built-in taxonomy when unset.
    pub taxonomy: Option<PathBuf>,
    pub selection: SelectionParams,
    pub orbit: OrbitConfig,
    pub grid: GridConfig,
    pub annotation: AnnotationConfig,
    pub nav: NavConfig,
    pub planner: ReferencePlanner,
    pub episode: EpisodeOptions,
    pub services: ServiceConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            output_root: PathBuf::from("output"),
            master_seed: 0,
            worker_count: 4,
            taxonomy: None,
            selection: SelectionParams::default(),
            orbit: OrbitConfig::default(),
            grid: GridConfig::default(),
            annotation: AnnotationConfig::default(),
            nav: NavConfig::default(),
            planner: ReferencePlanner::default(),
            episode: EpisodeOptions::default(),
            services: ServiceConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let cfg = Self::from_toml(&text).map_err(|e| match e {
            PipelineError::Config(m) => PipelineError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let ctx = |what: &'static str| move |e: String| PipelineError::Config(format!("{what}: {e}"));
        self.selection.validate().map_err(ctx("selection"))?;
        self.orbit.validate().map_err(ctx("orbit"))?;
        self.nav.validate().map_err(ctx("nav"))?;
        self.planner.limits.validate().map_err(|e| PipelineError::Config(format!("planner: {e}")))?;
        self.annotation.intrinsics.validate().map_err(ctx("annotation.intrinsics"))?;
        self.episode.intrinsics.validate().map_err(ctx("episode.intrinsics"))?;
        let g = &self.grid;
        if !(g.resolution > 0.0 && g.resolution.is_finite() && g.inflation_radius >= 0.0) {
            return Err(PipelineError::Config(format!("grid: bad resolution or inflation {g:?}")));
        }
        let a = &self.annotation;
        if !(a.iou_threshold > 0.0 && a.iou_threshold <= 1.0 && a.rig_spacing > 0.0) {
            return Err(PipelineError::Config(format!("annotation: bad IoU threshold or rig spacing {a:?}")));
        }
        if self.worker_count == 0 {
            return Err(PipelineError::Config("worker_count must be positive".into()));
        }
        Ok(())
    }

    /// Creates the output root and checks that it accepts writes.
    pub fn prepare_output(&self) -> Result<(), PipelineError> {
        let root = &self.output_root;
        fs::create_dir_all(root).map_err(io_err(root))?;
        let probe = root.join(".write_probe");
        fs::write(&probe, b"").map_err(io_err(&probe))?;
        fs::remove_file(&probe).map_err(io_err(&probe))
    }

    pub fn load_taxonomy(&self) -> Result<SceneTaxonomy, PipelineError> {
        match &self.taxonomy {
            None => Ok(SceneTaxonomy::builtin()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(io_err(p))?;
                SceneTaxonomy::from_json(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", p.display())))
            }
        }
    }

    /// Service handles for this config.
    pub fn services(&self) -> Services {
        let s = &self.services;
        let mocks = Services {
            world: Arc::new(MockWorldGenerator::new(s.mock_world.clone())),
            detector: Arc::new(MockDetectorFactory { config: s.mock_detector }),
            language: Arc::new(s.mock_language.clone()),
        };
        s.endpoints().build(mocks)
    }

    pub(crate) fn send_depth(&self) -> bool {
        self.annotation.send_depth.unwrap_or_else(|| self.services.endpoints().detect_url.is_some())
    }
}
