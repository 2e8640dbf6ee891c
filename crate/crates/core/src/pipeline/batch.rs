use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scene::{run_scene, scene_id_for, SceneManifest, StageRecord, StageStatus};
use super::{write_json, PipelineConfig, PipelineError};
use crate::services::Services;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub index: u64,
    pub seed: u64,
    pub scene_id: String,
    pub completed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// `batch_manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub master_seed: u64,
    pub n_scenes: u64,
    pub succeeded: usize,
    pub failed: usize,
    pub scenes: Vec<BatchEntry>,
    pub wall_time_ms: u64,
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "non-string panic payload".into())
}

/// Best-effort manifest for a scene whose worker panicked.
fn write_panic_manifest(config: &PipelineConfig, seed: u64, message: &str) {
    let scene_id = scene_id_for(seed);
    let dir = config.output_root.join(&scene_id);
    let manifest = SceneManifest {
        scene_id,
        seed,
        completed: false,
        stages: vec![StageRecord {
            name: "worker".into(),
            status: StageStatus::Failed,
            wall_time_ms: 0,
            error: Some(format!("panic: {message}")),
            summary: serde_json::Value::Null,
        }],
        episodes: Vec::new(),
        wall_time_ms: 0,
    };
    if std::fs::create_dir_all(&dir).is_ok() {
        if let Err(e) = write_json(&dir.join("manifest.json"), &manifest) {
            log::error!("could not record panic for seed {seed}: {e}");
        }
    }
}

fn run_one(config: &PipelineConfig, index: u64, services: &Services) -> BatchEntry {
    let seed = config.master_seed.wrapping_add(index);
    let scene_id = scene_id_for(seed);
    let outcome = catch_unwind(AssertUnwindSafe(|| run_scene(config, seed, services)));
    let (completed, error) = match outcome {
        Ok(Ok(m)) => {
            let error = m.failed_stage().map(|s| format!("{}: {}", s.name, s.error.clone().unwrap_or_default()));
            (m.completed, error)
        }
        Ok(Err(e)) => (false, Some(e.to_string())),
        Err(payload) => {
            let msg = panic_message(payload.as_ref());
            write_panic_manifest(config, seed, &msg);
            (false, Some(format!("panic: {msg}")))
        }
    };
    log::info!("{scene_id}: {}", if completed { "completed" } else { "failed" });
    BatchEntry { index, seed, scene_id, completed, error }
}

/// Runs scenes `master_seed + i` for `i < n_scenes` on `worker_count`
/// threads and writes `batch_manifest.json`. A failing or panicking scene
/// is recorded and does not stop the others.
pub fn run_batch(config: &PipelineConfig, n_scenes: u64, services: &Services) -> Result<BatchManifest, PipelineError> {
    if n_scenes == 0 {
        return Err(PipelineError::Config("n_scenes must be at least 1".into()));
    }
    config.validate()?;
    config.prepare_output()?;
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count)
        .build()
        .map_err(|e| PipelineError::Config(format!("worker pool: {e}")))?;
    let scenes: Vec<BatchEntry> =
        pool.install(|| (0..n_scenes).into_par_iter().map(|i| run_one(config, i, services)).collect());
    let succeeded = scenes.iter().filter(|e| e.completed).count();
    let manifest = BatchManifest {
        master_seed: config.master_seed,
        n_scenes,
        succeeded,
        failed: scenes.len() - succeeded,
        scenes,
        wall_time_ms: started.elapsed().as_millis() as u64,
    };
    write_json(&config.output_root.join("batch_manifest.json"), &manifest)?;
    Ok(manifest)
}
