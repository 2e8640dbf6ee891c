use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scene::{SceneInfo, SceneManifest};
use super::{io_err, read_json, scene_dirs, PipelineError};
use crate::annotate::AnnotationFile;
use crate::planner::Trajectory6DoF;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub scene_count: usize,
    pub trajectory_count: usize,
    /// Unset when there are no trajectories.
    pub length_mean_m: Option<f64>,
    pub length_median_m: Option<f64>,
    pub category_histogram: BTreeMap<String, usize>,
    pub unique_label_count: usize,
    /// Annotated objects per scene → number of scenes.
    pub object_count_histogram: BTreeMap<usize, usize>,
}

/// Mean and median; the median of an even count is the lower middle element.
pub fn length_summary(lengths: &[f64]) -> Option<(f64, f64)> {
    if lengths.is_empty() {
        return None;
    }
    let mut sorted = lengths.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    Some((mean, sorted[(sorted.len() - 1) / 2]))
}

/// Statistics over the completed scenes under `root`.
pub fn compute_stats(root: &Path) -> Result<DatasetStats, PipelineError> {
    let mut scene_count = 0;
    let mut lengths = Vec::new();
    let mut categories = BTreeMap::new();
    let mut labels = BTreeSet::new();
    let mut objects = BTreeMap::new();
    for dir in scene_dirs(root)? {
        let manifest: SceneManifest = read_json(&dir.join("manifest.json"))?;
        if !manifest.completed {
            continue;
        }
        scene_count += 1;
        let info: SceneInfo = read_json(&dir.join("scene.json"))?;
        *categories.entry(info.spec.category).or_insert(0) += 1;
        let ann: AnnotationFile = read_json(&dir.join("annotation.json"))?;
        *objects.entry(ann.boxes.len()).or_insert(0) += 1;
        labels.extend(ann.boxes.into_iter().map(|b| b.label));
        for ep in manifest.episodes.iter().filter_map(|e| e.archived_as.as_ref()) {
            let path = dir.join(ep).join("trajectory.jsonl");
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let traj = Trajectory6DoF::from_jsonl(&text)
                .map_err(|e| PipelineError::Format { path: path.clone(), message: e.to_string() })?;
            lengths.push(traj.length());
        }
    }
    if scene_count == 0 {
        return Err(PipelineError::NoScenes(root.to_path_buf()));
    }
    let summary = length_summary(&lengths);
    Ok(DatasetStats {
        scene_count,
        trajectory_count: lengths.len(),
        length_mean_m: summary.map(|s| s.0),
        length_median_m: summary.map(|s| s.1),
        category_histogram: categories,
        unique_label_count: labels.len(),
        object_count_histogram: objects,
    })
}
