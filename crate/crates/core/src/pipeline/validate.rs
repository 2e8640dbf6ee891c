use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scene::{SceneManifest, TargetsFile};
use super::{io_err, read_json, scene_dirs, PipelineError};
use crate::geometry::from_array;
use crate::nav::{audit_target_set, read_episode, TaskFile, FRAME_INTERVAL};
use crate::scene::read_grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationFailure {
    pub scene_id: String,
    /// `set_<i>/target_<j>` or an episode directory.
    pub location: String,
    pub criterion: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub scenes: usize,
    /// Scenes skipped because a stage failed.
    pub incomplete_scenes: usize,
    pub targets: usize,
    pub episodes: usize,
    pub failures: Vec<ValidationFailure>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

fn check_episode(dir: &Path, set: &TaskFile) -> Result<Vec<(String, String)>, PipelineError> {
    let ep = read_episode(dir).map_err(io_err(dir))?;
    let mut out = Vec::new();
    let mut fail = |c: &str, d: String| out.push((c.to_string(), d));
    if &ep.task != set {
        fail("task", "task.json differs from the generated target set".into());
    }
    if !ep.trajectory.timestamps_increasing() {
        fail("trajectory", "timestamps not strictly increasing".into());
    }
    if ep.frames.frame_count != ep.trajectory.samples.len() {
        fail("frames", format!("{} frames for {} samples", ep.frames.frame_count, ep.trajectory.samples.len()));
    }
    let idx: Vec<usize> = ep.frames.sampled.iter().map(|f| f.index).collect();
    let ascending = idx.windows(2).all(|w| w[0] < w[1]);
    if !ascending || idx.iter().any(|i| i % FRAME_INTERVAL != 0 || *i >= ep.frames.frame_count) {
        fail("frames", format!("bad sampled indices {idx:?}"));
    }
    if !ep.quality.accepted {
        fail("quality", format!("archived a rejected episode: {}", ep.quality.reason));
    }
    for t in 0..ep.task.targets.len() {
        let styles: Vec<_> = ep.prompts.iter().filter(|p| p.target_index == t).map(|p| p.style).collect();
        let distinct: BTreeSet<_> = styles.iter().collect();
        if !(1..=3).contains(&styles.len()) || distinct.len() != styles.len() {
            fail("prompts", format!("target {t} has prompt styles {styles:?}"));
        }
    }
    if ep.prompts.iter().any(|p| p.target_index >= ep.task.targets.len()) {
        fail("prompts", "prompt refers to a missing target".into());
    }
    Ok(out)
}

/// Re-checks every completed scene under `root`: each generated target
/// against the eligibility criteria on the stored grid, and each archived
/// episode for frame sampling, prompts and consistency with its task.
pub fn validate_output(root: &Path) -> Result<ValidationReport, PipelineError> {
    let dirs = scene_dirs(root)?;
    if dirs.is_empty() {
        return Err(PipelineError::NoScenes(root.to_path_buf()));
    }
    let mut report = ValidationReport::default();
    for dir in dirs {
        let manifest: SceneManifest = read_json(&dir.join("manifest.json"))?;
        if !manifest.completed {
            report.incomplete_scenes += 1;
            continue;
        }
        report.scenes += 1;
        let sid = manifest.scene_id.clone();
        let header_path = dir.join("grid.json");
        let body_path = dir.join("grid.bin");
        let header = fs::read(&header_path).map_err(io_err(&header_path))?;
        let body = fs::read(&body_path).map_err(io_err(&body_path))?;
        let grid = read_grid(&header, &body)?;
        let targets: TargetsFile = read_json(&dir.join("targets.json"))?;
        let start = from_array(targets.start);
        for set in &targets.generation.sets {
            report.targets += set.targets.len();
            for f in audit_target_set(&grid, &start, set.set_id, &set.targets, &targets.nav) {
                report.failures.push(ValidationFailure {
                    scene_id: sid.clone(),
                    location: format!("set_{}/target_{}", f.set_id, f.target_index),
                    criterion: f.criterion,
                    detail: f.detail,
                });
            }
        }
        for ep in &manifest.episodes {
            let Some(rel) = &ep.archived_as else { continue };
            report.episodes += 1;
            let Some(set) = targets.generation.sets.iter().find(|s| s.set_id == ep.set_id) else {
                report.failures.push(ValidationFailure {
                    scene_id: sid.clone(),
                    location: rel.clone(),
                    criterion: "task".into(),
                    detail: format!("no target set {}", ep.set_id),
                });
                continue;
            };
            let task = TaskFile::new(&sid, set.set_id, &start, &set.targets);
            for (criterion, detail) in check_episode(&dir.join(rel), &task)? {
                report.failures.push(ValidationFailure {
                    scene_id: sid.clone(),
                    location: rel.clone(),
                    criterion,
                    detail,
                });
            }
        }
    }
    Ok(report)
}
