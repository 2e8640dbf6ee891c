use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{NavError, NavTarget, TargetSet, TaskFile};
use crate::annotate::Box3D;
use crate::camera::CameraPose;
use crate::planner::{Planner, Trajectory6DoF};
use crate::scene::{DepthRenderer, Intrinsics, OccupancyGrid, SplatScene};
use crate::services::{FrameMeta, LanguageAnnotator, PromptStyle, QualityVerdict};

/// Frames kept from each recorded trajectory: every 30th, starting at 0.
pub const FRAME_INTERVAL: usize = 30;

pub fn sample_frames(frame_count: usize) -> Vec<usize> {
    (0..frame_count).step_by(FRAME_INTERVAL).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodePrompt {
    pub style: PromptStyle,
    pub text: String,
    /// Index of the target within the set that the prompt refers to.
    pub target_index: usize,
}

/// `frames/index.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameIndex {
    pub frame_count: usize,
    pub sampled: Vec<FrameMeta>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub scene_id: String,
    pub task_id: String,
    pub task: TaskFile,
    pub targets: Vec<NavTarget>,
    pub trajectory: Trajectory6DoF,
    pub sampled_frame_indices: Vec<usize>,
    pub frames: FrameIndex,
    pub prompts: Vec<EpisodePrompt>,
    pub quality: QualityVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeOptions {
    /// Depth camera used while recording.
    pub intrinsics: Intrinsics,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self { intrinsics: Intrinsics::from_hfov(32, 24, 90f64.to_radians()) }
    }
}

/// Flies one target set from the scene center and records it.
///
/// Legs are planned between consecutive target points and concatenated.
/// Depth is rendered at every sample; the sampled frames go to the quality
/// assessor, and prompts are requested for every target of an accepted
/// episode (context: `context`, usually the scene's annotation boxes).
#[allow(clippy::too_many_arguments)]
pub fn run_episode(
    scene: &SplatScene,
    grid: &OccupancyGrid,
    scene_id: &str,
    set: &TargetSet,
    planner: &dyn Planner,
    language: &dyn LanguageAnnotator,
    context: &[Box3D],
    options: &EpisodeOptions,
) -> Result<EpisodeRecord, NavError> {
    if set.targets.is_empty() {
        return Err(NavError::NoTargets);
    }
    let start = scene.center;
    let mut trajectory = Trajectory6DoF::default();
    let mut from = start;
    for (leg, t) in set.targets.iter().enumerate() {
        let part = planner.plan(grid, &from, &t.target_point).map_err(|source| NavError::LegFailed { leg, source })?;
        trajectory.append_leg(&part);
        from = t.target_point;
    }

    let renderer = DepthRenderer::new(scene);
    let metas: Vec<FrameMeta> = trajectory
        .samples
        .iter()
        .enumerate()
        .map(|(index, s)| {
            let img = renderer.render(&CameraPose::new(s.position, s.yaw, s.pitch), &options.intrinsics);
            let min = img.min_depth();
            FrameMeta {
                index,
                t: s.t,
                infinite_fraction: img.infinite_fraction(),
                min_depth: min.is_finite().then_some(min),
            }
        })
        .collect();
    let sampled_frame_indices = sample_frames(metas.len());
    let sampled: Vec<FrameMeta> = sampled_frame_indices.iter().map(|&i| metas[i]).collect();
    let quality = language.assess_quality(&sampled)?;

    let mut prompts = Vec::new();
    if quality.accepted {
        for (target_index, t) in set.targets.iter().enumerate() {
            for p in language.generate_prompts(t, context)?.into_iter().take(3) {
                prompts.push(EpisodePrompt { style: p.style, text: p.text, target_index });
            }
        }
    }
    Ok(EpisodeRecord {
        scene_id: scene_id.to_string(),
        task_id: format!("set_{}", set.set_id),
        task: TaskFile::new(scene_id, set.set_id, &start, &set.targets),
        targets: set.targets.clone(),
        trajectory,
        sampled_frame_indices,
        frames: FrameIndex { frame_count: metas.len(), sampled },
        prompts,
        quality,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> io::Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))
}

/// Writes `task.json`, `trajectory.jsonl`, `frames/index.json`,
/// `prompts.json` and `quality.json` under `dir`.
pub fn write_episode(dir: &Path, record: &EpisodeRecord) -> io::Result<()> {
    fs::create_dir_all(dir.join("frames"))?;
    write_json(&dir.join("task.json"), &record.task)?;
    fs::write(dir.join("trajectory.jsonl"), record.trajectory.to_jsonl())?;
    write_json(&dir.join("frames").join("index.json"), &record.frames)?;
    write_json(&dir.join("prompts.json"), &record.prompts)?;
    write_json(&dir.join("quality.json"), &record.quality)
}

/// The archived parts of an episode, as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchivedEpisode {
    pub task: TaskFile,
    pub trajectory: Trajectory6DoF,
    pub frames: FrameIndex,
    pub prompts: Vec<EpisodePrompt>,
    pub quality: QualityVerdict,
}

pub fn read_episode(dir: &Path) -> io::Result<ArchivedEpisode> {
    let traj_text = fs::read_to_string(dir.join("trajectory.jsonl"))?;
    Ok(ArchivedEpisode {
        task: read_json(&dir.join("task.json"))?,
        trajectory: Trajectory6DoF::from_jsonl(&traj_text)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?,
        frames: read_json(&dir.join("frames").join("index.json"))?,
        prompts: read_json(&dir.join("prompts.json"))?,
        quality: read_json(&dir.join("quality.json"))?,
    })
}
