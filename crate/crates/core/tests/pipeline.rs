use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use forge_core::annotate::{AnnotationFile, Box3D};
use forge_core::nav::{read_episode, TaskFile};
use forge_core::pipeline::{
    compute_stats, run_batch, run_scene, scene_id_for, validate_output, EpisodeSummary, PipelineConfig, SceneInfo,
    SceneManifest, StageStatus, TargetsFile,
};
use forge_core::planner::{Trajectory6DoF, TrajectorySample};
use forge_core::services::{
    derive_seed, scene_spec_for, GeneratedWorld, MockWorldGenerator, SceneSpec, SceneTaxonomy, ServiceError, Services,
    WorldGenerator,
};
use forge_core::Vec3;
use serde_json::Value;

fn config(root: &Path) -> PipelineConfig {
    PipelineConfig { output_root: root.to_path_buf(), ..PipelineConfig::default() }
}

fn read<T: serde::de::DeserializeOwned>(p: &Path) -> T {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn strip_times(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("wall_time_ms");
            m.values_mut().for_each(strip_times);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_times),
        _ => {}
    }
}

/// Every file under `dir`, relative path → bytes; manifests without timings.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
                continue;
            }
            let mut bytes = fs::read(&p).unwrap();
            let name = p.file_name().unwrap().to_str().unwrap();
            if name == "manifest.json" || name == "batch_manifest.json" {
                let mut v: Value = serde_json::from_slice(&bytes).unwrap();
                strip_times(&mut v);
                bytes = serde_json::to_vec(&v).unwrap();
            }
            out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), bytes);
        }
    }
    out
}

#[test]
fn single_scene_smoke_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path());
    let m = run_scene(&cfg, 7, &cfg.services()).unwrap();
    assert!(m.completed, "{m:#?}");
    let dir = tmp.path().join(scene_id_for(7));
    let on_disk: SceneManifest = read(&dir.join("manifest.json"));
    assert_eq!(on_disk, m);
    let _: SceneInfo = read(&dir.join("scene.json"));
    let ann: AnnotationFile = read(&dir.join("annotation.json"));
    assert!(!ann.boxes.is_empty());
    let targets: TargetsFile = read(&dir.join("targets.json"));
    let archived: Vec<&EpisodeSummary> = m.episodes.iter().filter(|e| e.archived_as.is_some()).collect();
    assert!(!archived.is_empty());
    for e in archived {
        let ep_dir = dir.join(e.archived_as.as_ref().unwrap());
        let ep = read_episode(&ep_dir).unwrap();
        let task: TaskFile = read(&ep_dir.join("task.json"));
        assert_eq!(ep.task, task);
        assert_eq!(task.targets.len(), e.targets);
        assert!(ep.trajectory.timestamps_increasing());
        assert!(targets.generation.sets.iter().any(|s| s.set_id == task.set_id));
    }
    let report = validate_output(tmp.path()).unwrap();
    assert!(report.ok(), "{:#?}", report.failures);
    assert!(report.targets > 0 && report.episodes > 0);
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for root in [a.path(), b.path()] {
        let cfg = config(root);
        run_scene(&cfg, 11, &cfg.services()).unwrap();
    }
    assert_eq!(snapshot(a.path()), snapshot(b.path()));
}

#[test]
fn detector_down_fails_annotation() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path());
    cfg.services.mock_only = false;
    cfg.services.endpoints.detect_url = Some("http://127.0.0.1:9".into());
    cfg.services.endpoints.timeout_ms = Some(500);
    let m = run_scene(&cfg, 3, &cfg.services()).unwrap();
    assert!(!m.completed);
    let status: Vec<_> = m.stages.iter().map(|s| (s.name.as_str(), s.status)).collect();
    assert_eq!(
        status,
        [
            ("world_generation", StageStatus::Ok),
            ("annotation", StageStatus::Failed),
            ("target_generation", StageStatus::Skipped),
            ("collection", StageStatus::Skipped),
        ]
    );
    assert!(m.stages[1].error.as_ref().unwrap().contains("127.0.0.1:9"));
    assert!(m.episodes.is_empty());
    assert!(!tmp.path().join(scene_id_for(3)).join("episodes").exists());
}

#[test]
fn batch_is_schedule_independent() {
    let serial = tempfile::tempdir().unwrap();
    let parallel = tempfile::tempdir().unwrap();
    let mut cfg = config(serial.path());
    cfg.master_seed = 40;
    cfg.worker_count = 1;
    let m1 = run_batch(&cfg, 10, &cfg.services()).unwrap();
    cfg.output_root = parallel.path().to_path_buf();
    cfg.worker_count = 4;
    let m2 = run_batch(&cfg, 10, &cfg.services()).unwrap();
    assert_eq!(m1.succeeded + m1.failed, 10);
    let dirs = fs::read_dir(parallel.path()).unwrap().filter(|e| e.as_ref().unwrap().path().is_dir()).count();
    assert_eq!(dirs, 10);
    assert_eq!((m1.succeeded, m1.failed), (m2.succeeded, m2.failed));
    assert_eq!(m1.scenes, m2.scenes);
    assert_eq!(snapshot(serial.path()), snapshot(parallel.path()));
}

/// Panics for one particular scene spec.
struct Flaky {
    inner: MockWorldGenerator,
    poison: SceneSpec,
}

impl WorldGenerator for Flaky {
    fn generate(&self, spec: &SceneSpec) -> Result<GeneratedWorld, ServiceError> {
        if *spec == self.poison {
            panic!("injected failure");
        }
        self.inner.generate(spec)
    }
}

#[test]
fn panicking_scene_is_isolated() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = config(tmp.path());
    cfg.master_seed = 100;
    let poison = scene_spec_for(&SceneTaxonomy::builtin(), derive_seed(102, "taxonomy"));
    let base = cfg.services();
    let services = Services { world: Arc::new(Flaky { inner: MockWorldGenerator::default(), poison }), ..base };
    let m = run_batch(&cfg, 4, &services).unwrap();
    assert_eq!(m.failed, 1);
    assert_eq!(m.succeeded, 3);
    let bad = m.scenes.iter().find(|e| !e.completed).unwrap();
    assert_eq!(bad.seed, 102);
    assert!(bad.error.as_ref().unwrap().contains("injected failure"));
    let bad_manifest: SceneManifest = read(&tmp.path().join("scene_102").join("manifest.json"));
    assert!(!bad_manifest.completed);
    let report = validate_output(tmp.path()).unwrap();
    assert!(report.ok());
    assert_eq!((report.scenes, report.incomplete_scenes), (3, 1));
}

fn line(length: f64) -> Trajectory6DoF {
    let s = |t: f64, x: f64| TrajectorySample {
        t,
        position: Vec3::new(x, 0.0, 0.0),
        velocity: Vec3::zeros(),
        yaw: 0.0,
        pitch: 0.0,
    };
    Trajectory6DoF { samples: vec![s(0.0, 0.0), s(1.0, 0.5 * length), s(2.0, length)] }
}

fn fake_scene(root: &Path, seed: u64, category: &str, labels: &[&str], lengths: &[f64], completed: bool) {
    let id = scene_id_for(seed);
    let dir = root.join(&id);
    let mut episodes = Vec::new();
    for (i, l) in lengths.iter().enumerate() {
        let rel = format!("episodes/set_{i}");
        fs::create_dir_all(dir.join(&rel)).unwrap();
        fs::write(dir.join(&rel).join("trajectory.jsonl"), line(*l).to_jsonl()).unwrap();
        episodes.push(EpisodeSummary {
            set_id: i,
            targets: 1,
            partial: true,
            accepted: true,
            reason: "ok".into(),
            frame_count: 3,
            length_m: *l,
            archived_as: Some(rel),
        });
    }
    // A rejected episode is not part of the dataset.
    episodes.push(EpisodeSummary {
        set_id: 99,
        targets: 1,
        partial: true,
        accepted: false,
        reason: "blur".into(),
        frame_count: 3,
        length_m: 100.0,
        archived_as: None,
    });
    fs::create_dir_all(&dir).unwrap();
    let m = SceneManifest { scene_id: id.clone(), seed, completed, stages: vec![], episodes, wall_time_ms: 0 };
    fs::write(dir.join("manifest.json"), serde_json::to_string(&m).unwrap()).unwrap();
    let spec =
        SceneSpec { category: category.into(), subcategory: "x".into(), description: String::new(), image_ref: None };
    let info = SceneInfo { scene_id: id.clone(), seed, spec, primitive_count: 0, center: [0.0; 3] };
    fs::write(dir.join("scene.json"), serde_json::to_string(&info).unwrap()).unwrap();
    let boxes = labels.iter().map(|l| Box3D::new(*l, Vec3::zeros(), Vec3::repeat(0.1))).collect();
    let ann = AnnotationFile { scene_id: id, boxes };
    fs::write(dir.join("annotation.json"), serde_json::to_string(&ann).unwrap()).unwrap();
}

#[test]
fn stats_reproduce_known_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    fake_scene(tmp.path(), 1, "residential", &["sofa", "bed", "sofa"], &[2.0, 6.0], true);
    fake_scene(tmp.path(), 2, "industrial", &["crate"], &[4.0], true);
    fake_scene(tmp.path(), 3, "residential", &[], &[], true);
    fake_scene(tmp.path(), 4, "leisure", &["piano"], &[50.0], false);
    let s = compute_stats(tmp.path()).unwrap();
    assert_eq!(s.scene_count, 3);
    assert_eq!(s.trajectory_count, 3);
    assert_eq!(s.length_mean_m, Some(4.0));
    assert_eq!(s.length_median_m, Some(4.0));
    assert_eq!(s.category_histogram, BTreeMap::from([("industrial".into(), 1), ("residential".into(), 2)]));
    assert_eq!(s.unique_label_count, 3);
    assert_eq!(s.object_count_histogram, BTreeMap::from([(0, 1), (1, 1), (3, 1)]));
    assert_eq!(s.category_histogram.values().sum::<usize>(), s.scene_count);
    assert_eq!(s.object_count_histogram.values().sum::<usize>(), s.scene_count);

    let one = tempfile::tempdir().unwrap();
    fake_scene(one.path(), 5, "residential", &["sofa"], &[5.0], true);
    let s = compute_stats(one.path()).unwrap();
    assert_eq!((s.trajectory_count, s.length_mean_m, s.length_median_m), (1, Some(5.0), Some(5.0)));
}

#[test]
fn validation_catches_tampered_targets() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path());
    run_scene(&cfg, 5, &cfg.services()).unwrap();
    let path = tmp.path().join(scene_id_for(5)).join("targets.json");
    let mut t: TargetsFile = read(&path);
    let first = &mut t.generation.sets[0].targets[0];
    first.target_point = first.object.center;
    fs::write(&path, serde_json::to_string(&t).unwrap()).unwrap();
    let report = validate_output(tmp.path()).unwrap();
    assert!(report.failures.iter().any(|f| f.criterion == "inside" && f.location == "set_0/target_0"));
    // The archived task file no longer matches either.
    assert!(report.failures.iter().any(|f| f.criterion == "task"));
}
