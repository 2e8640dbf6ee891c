use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{io_err, write_json, PipelineConfig, PipelineError};
use crate::annotate::{fuse_detections, select_targets, AnnotationFile, Box3D, CandidateSet};
use crate::camera::{four_view_rig, orbit_sweep, path_headings, CameraPose};
use crate::geometry::Vec3;
use crate::nav::{approach_point, generate_target_sets, run_episode, write_episode, NavConfig, TargetGeneration};
use crate::scene::{build_occupancy, write_grid, DepthRenderer, OccupancyGrid, SplatScene};
use crate::services::{derive_seed, scene_spec_for, DetectionRequest, Detector, GeneratedWorld, SceneSpec, Services};

pub const STAGES: [&str; 4] = ["world_generation", "annotation", "target_generation", "collection"];

pub fn scene_id_for(seed: u64) -> String {
    format!("scene_{seed}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub wall_time_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub summary: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub set_id: usize,
    pub targets: usize,
    pub partial: bool,
    pub accepted: bool,
    pub reason: String,
    pub frame_count: usize,
    pub length_m: f64,
    /// Directory relative to the scene directory, for archived episodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub archived_as: Option<String>,
}

/// `manifest.json`. All fields except the `wall_time_ms` entries are
/// determined by the config and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub scene_id: String,
    pub seed: u64,
    /// Every stage succeeded.
    pub completed: bool,
    pub stages: Vec<StageRecord>,
    pub episodes: Vec<EpisodeSummary>,
    pub wall_time_ms: u64,
}

impl SceneManifest {
    pub fn failed_stage(&self) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.status == StageStatus::Failed)
    }
}

/// `scene.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneInfo {
    pub scene_id: String,
    pub seed: u64,
    pub spec: SceneSpec,
    pub primitive_count: usize,
    pub center: [f64; 3],
}

/// `targets.json`: the generated sets together with the navigation config
/// they were checked against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetsFile {
    pub scene_id: String,
    pub start: [f64; 3],
    pub nav: NavConfig,
    #[serde(flatten)]
    pub generation: TargetGeneration,
}

/// Result of the annotation stage.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationPass {
    /// First-pass candidates: orbit detections fused without pruning.
    pub first_pass: CandidateSet,
    pub selected: Vec<Box3D>,
    pub orbit_frames: usize,
    pub exploration_paths: usize,
    /// Raw detections of every frame (orbit and rigs) with their poses.
    pub frames: Vec<(CameraPose, Vec<Box3D>)>,
    /// Distance-pruned fusion of `frames`: the scene's annotation.
    pub fused: CandidateSet,
}

/// First free point walking from `p` toward `toward` in voxel steps.
fn free_toward(grid: &OccupancyGrid, p: &Vec3, toward: &Vec3) -> Option<Vec3> {
    let n = ((toward - p).norm() / grid.resolution()).ceil() as usize;
    (0..=n).map(|i| p + (toward - p) * (i as f64 / n.max(1) as f64)).find(|q| grid.is_free_point(q))
}

/// Runs the annotation stage on one scene.
///
/// An orbit sweep around the scene center gives first-pass candidates, from
/// which `select_targets` picks exploration goals. The drone flies A*
/// paths toward each goal, taking four-view rigs every `rig_spacing`
/// metres. All frames are then fused again with distance pruning.
pub fn annotate_scene(
    scene: &SplatScene,
    grid: &OccupancyGrid,
    detector: &dyn Detector,
    config: &PipelineConfig,
) -> Result<AnnotationPass, String> {
    let center = scene.center;
    let intr = config.annotation.intrinsics;
    let renderer = config.send_depth().then(|| DepthRenderer::new(scene));
    let mut frame_id = 0u64;
    let mut detect = |pose: CameraPose| -> Result<(CameraPose, Vec<Box3D>), String> {
        let depth = renderer.as_ref().map(|r| r.render(&pose, &intr));
        let req = DetectionRequest { frame_id, pose, intrinsics: intr, depth, rgb: None };
        frame_id += 1;
        let resp = detector.detect(&req).map_err(|e| e.to_string())?;
        Ok((pose, resp.boxes))
    };

    let mut frames = Vec::new();
    for pose in orbit_sweep(&config.orbit, &center) {
        frames.push(detect(pose)?);
    }
    let orbit_frames = frames.len();
    let iou = config.annotation.iou_threshold;
    let first_pass = fuse_detections(&frames, iou, f64::INFINITY, center);
    let selected = select_targets(&first_pass, &config.selection);

    let mut exploration_paths = 0;
    for target in &selected {
        let Ok(goal) = approach_point(target, &center, config.nav.approach_clearance) else { continue };
        let Some(goal) = free_toward(grid, &goal, &center) else { continue };
        let Ok(path) = config.planner.waypoints(grid, &center, &goal) else { continue };
        exploration_paths += 1;
        let headings = path_headings(&path, config.planner.heading_window);
        let q = path.waypoints();
        let mut since = 0.0;
        for k in 1..q.len() {
            since += (q[k] - q[k - 1]).norm();
            if since >= config.annotation.rig_spacing || k == q.len() - 1 {
                since = 0.0;
                for pose in four_view_rig(&q[k], headings[k]) {
                    frames.push(detect(pose)?);
                }
            }
        }
    }
    let fused = fuse_detections(&frames, iou, config.selection.d_th1, center);
    Ok(AnnotationPass { first_pass, selected, orbit_frames, exploration_paths, frames, fused })
}

fn elapsed_ms(t: Instant) -> u64 {
    t.elapsed().as_millis() as u64
}

/// Runs `f` as stage `name` when `ready`, recording the outcome.
fn stage<T>(
    stages: &mut Vec<StageRecord>,
    name: &str,
    ready: bool,
    f: impl FnOnce() -> Result<(T, Value), String>,
) -> Option<T> {
    if !ready {
        stages.push(StageRecord {
            name: name.into(),
            status: StageStatus::Skipped,
            wall_time_ms: 0,
            error: None,
            summary: Value::Null,
        });
        return None;
    }
    let t = Instant::now();
    let (status, error, summary, out) = match f() {
        Ok((v, summary)) => (StageStatus::Ok, None, summary, Some(v)),
        Err(e) => {
            log::warn!("stage {name} failed: {e}");
            (StageStatus::Failed, Some(e), Value::Null, None)
        }
    };
    stages.push(StageRecord { name: name.into(), status, wall_time_ms: elapsed_ms(t), error, summary });
    out
}

fn to_string_err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

struct World {
    generated: GeneratedWorld,
    grid: OccupancyGrid,
}

fn world_stage(
    config: &PipelineConfig,
    seed: u64,
    services: &Services,
    dir: &Path,
    scene_id: &str,
) -> Result<(World, Value), String> {
    let taxonomy = config.load_taxonomy().map_err(to_string_err)?;
    let spec = scene_spec_for(&taxonomy, derive_seed(seed, "taxonomy"));
    let generated = services.world.generate(&spec).map_err(to_string_err)?;
    let g = &config.grid;
    let grid = build_occupancy(&generated.scene, g.resolution, g.opacity_threshold, g.inflation_radius)
        .map_err(to_string_err)?;
    let c = generated.scene.center;
    let info = SceneInfo {
        scene_id: scene_id.to_string(),
        seed,
        spec: spec.clone(),
        primitive_count: generated.scene.primitives.len(),
        center: [c.x, c.y, c.z],
    };
    write_json(&dir.join("scene.json"), &info).map_err(to_string_err)?;
    let header = File::create(dir.join("grid.json")).map_err(to_string_err)?;
    let body = File::create(dir.join("grid.bin")).map_err(to_string_err)?;
    write_grid(&grid, BufWriter::new(header), BufWriter::new(body)).map_err(to_string_err)?;
    let summary = json!({
        "category": spec.category,
        "subcategory": spec.subcategory,
        "primitives": info.primitive_count,
        "grid_dims": grid.dims(),
        "inflated_voxels": grid.occupied_count(),
    });
    Ok((World { generated, grid }, summary))
}

fn annotation_stage(
    config: &PipelineConfig,
    world: &World,
    services: &Services,
    dir: &Path,
    scene_id: &str,
) -> Result<(CandidateSet, Value), String> {
    let detector = services.detector.session(&world.generated).map_err(to_string_err)?;
    let pass = annotate_scene(&world.generated.scene, &world.grid, detector.as_ref(), config)?;
    let file = AnnotationFile { scene_id: scene_id.to_string(), boxes: pass.fused.boxes.clone() };
    write_json(&dir.join("annotation.json"), &file).map_err(to_string_err)?;
    let summary = json!({
        "orbit_frames": pass.orbit_frames,
        "exploration_frames": pass.frames.len() - pass.orbit_frames,
        "first_pass_boxes": pass.first_pass.boxes.len(),
        "selected": pass.selected.len(),
        "exploration_paths": pass.exploration_paths,
        "boxes": pass.fused.boxes.len(),
    });
    Ok((pass.fused, summary))
}

fn nav_config_for(config: &PipelineConfig, seed: u64) -> NavConfig {
    NavConfig { seed: derive_seed(seed, &format!("nav/{}", config.nav.seed)), ..config.nav }
}

fn target_stage(
    config: &PipelineConfig,
    seed: u64,
    world: &World,
    annotations: &CandidateSet,
    dir: &Path,
    scene_id: &str,
) -> Result<(TargetGeneration, Value), String> {
    if annotations.boxes.is_empty() {
        return Err("annotation map is empty".into());
    }
    let nav = nav_config_for(config, seed);
    let generation =
        generate_target_sets(&world.generated.scene, &world.grid, annotations, &nav).map_err(to_string_err)?;
    let c = world.generated.scene.center;
    let file = TargetsFile { scene_id: scene_id.to_string(), start: [c.x, c.y, c.z], nav, generation };
    write_json(&dir.join("targets.json"), &file).map_err(to_string_err)?;
    let generation = file.generation;
    if generation.sets.is_empty() {
        return Err(format!("no eligible targets (rejections: {:?})", generation.rejections));
    }
    let summary = json!({
        "sets": generation.sets.len(),
        "targets": generation.sets.iter().map(|s| s.targets.len()).sum::<usize>(),
        "partial_sets": generation.sets.iter().filter(|s| s.partial).count(),
        "rejections": generation.rejections,
    });
    Ok((generation, summary))
}

#[allow(clippy::too_many_arguments)]
fn collection_stage(
    config: &PipelineConfig,
    world: &World,
    annotations: &CandidateSet,
    generation: &TargetGeneration,
    services: &Services,
    dir: &Path,
    scene_id: &str,
    episodes: &mut Vec<EpisodeSummary>,
) -> Result<((), Value), String> {
    let mut errors = Vec::new();
    for set in &generation.sets {
        let record = run_episode(
            &world.generated.scene,
            &world.grid,
            scene_id,
            set,
            &config.planner,
            services.language.as_ref(),
            &annotations.boxes,
            &config.episode,
        );
        let rec = match record {
            Ok(r) => r,
            Err(e) => {
                errors.push(json!({"set_id": set.set_id, "error": e.to_string()}));
                continue;
            }
        };
        let archived_as = if rec.quality.accepted {
            let rel = format!("episodes/{}", rec.task_id);
            write_episode(&dir.join(&rel), &rec).map_err(to_string_err)?;
            Some(rel)
        } else {
            None
        };
        episodes.push(EpisodeSummary {
            set_id: set.set_id,
            targets: set.targets.len(),
            partial: set.partial,
            accepted: rec.quality.accepted,
            reason: rec.quality.reason.clone(),
            frame_count: rec.frames.frame_count,
            length_m: rec.trajectory.length(),
            archived_as,
        });
    }
    if episodes.is_empty() {
        return Err(format!("every episode failed: {}", Value::Array(errors)));
    }
    let summary = json!({
        "episodes": episodes.len(),
        "archived": episodes.iter().filter(|e| e.archived_as.is_some()).count(),
        "rejected": episodes.iter().filter(|e| !e.accepted).count(),
        "errors": errors,
    });
    Ok(((), summary))
}

/// Runs all stages for one scene seed and writes its directory.
///
/// Stage failures are recorded in the manifest; the error return is for
/// problems writing the output itself. An existing directory for the same
/// scene is replaced.
pub fn run_scene(config: &PipelineConfig, seed: u64, services: &Services) -> Result<SceneManifest, PipelineError> {
    let started = Instant::now();
    let scene_id = scene_id_for(seed);
    let dir = config.output_root.join(&scene_id);
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(io_err(&dir))?;
    }
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;

    let mut stages = Vec::new();
    let mut episodes = Vec::new();
    let world = stage(&mut stages, STAGES[0], true, || world_stage(config, seed, services, &dir, &scene_id));
    let annotations = stage(&mut stages, STAGES[1], world.is_some(), || {
        annotation_stage(config, world.as_ref().unwrap(), services, &dir, &scene_id)
    });
    let generation = stage(&mut stages, STAGES[2], annotations.is_some(), || {
        target_stage(config, seed, world.as_ref().unwrap(), annotations.as_ref().unwrap(), &dir, &scene_id)
    });
    stage(&mut stages, STAGES[3], generation.is_some(), || {
        collection_stage(
            config,
            world.as_ref().unwrap(),
            annotations.as_ref().unwrap(),
            generation.as_ref().unwrap(),
            services,
            &dir,
            &scene_id,
            &mut episodes,
        )
    });

    let manifest = SceneManifest {
        scene_id,
        seed,
        completed: stages.iter().all(|s| s.status == StageStatus::Ok),
        stages,
        episodes,
        wall_time_ms: elapsed_ms(started),
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}
