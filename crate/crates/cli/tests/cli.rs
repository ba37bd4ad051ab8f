mod common;

use common::small_config;
use phosphor_cli::artifacts::sha256_file;
use phosphor_cli::commands::{gray_path, spv_float_path, PipelineRecord, RenderRecord};
use phosphor_core::dataset::{self, load_aux};
use phosphor_core::netpbm::{read_pfm, write_pfm};
use phosphor_core::psych::{
    make_session, sim::simulate_session, sim::Policy, ParamCell, SessionPlan, MAIN_TRIALS, SCHEMA_VERSION,
};
use phosphor_core::render::{moment_ellipse, PerceptFrame};
use phosphor_core::retina::{Extent, PerceptGrid};
use phosphor_core::scene::{ground_edges, SceneConfig, Strategy};
use serde_json::{json, Value};
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_phosphor");

fn phosphor(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("PHOSPHOR_SEED");
    if let Some(s) = seed_env {
        cmd.env("PHOSPHOR_SEED", s);
    }
    cmd.output().unwrap()
}

#[track_caller]
fn ok(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

/// Exit code and the JSON error document on the last line of stderr.
fn failure(out: &Output) -> (i32, Value) {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().rev().find(|l| !l.trim().is_empty()).unwrap();
    (out.status.code().unwrap(), serde_json::from_str(last).unwrap())
}

/// Writes the small-set config (plus `extra` keys) and returns its path.
fn config(root: &Path, extra: Value) -> PathBuf {
    let mut cfg = serde_json::to_value(small_config(&root.join("out"))).unwrap();
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    let path = root.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// `synth` then `preprocess` with the given extra config keys.
fn prepared(extra: Value) -> (tempfile::TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), extra);
    ok(&phosphor(&["synth", "--config", s(&cfg)], None));
    let catalog = dir.path().join("out/stimuli/catalog.json");
    let mut with_catalog: Value = serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    with_catalog["catalog"] = json!(catalog);
    std::fs::write(&cfg, with_catalog.to_string()).unwrap();
    (dir, cfg, catalog)
}

fn tree_hashes(root: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), sha256_file(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn preprocess_twice_is_byte_identical() {
    let (dir, cfg, _) = prepared(json!({ "strategies": ["depth", "combination"] }));
    ok(&phosphor(&["preprocess", "--config", s(&cfg)], None));
    let first = tree_hashes(&dir.path().join("out/preprocessed"));
    ok(&phosphor(&["preprocess", "--config", s(&cfg)], None));
    assert_eq!(first, tree_hashes(&dir.path().join("out/preprocessed")));
    assert_eq!(first.len(), 24 * 2 * 11);
}

#[test]
fn segmentation_of_empty_scene_keeps_only_ground_edges() {
    let (dir, cfg, catalog) = prepared(json!({}));
    ok(&phosphor(&["preprocess", "--config", s(&cfg), "--strategy", "segmentation", "--clip", "clip_n_0"], None));
    let out = dir.path().join("out/preprocessed/clip_n_0/segmentation");
    let record: PipelineRecord = serde_json::from_str(&std::fs::read_to_string(out.join("pipeline.json")).unwrap()).unwrap();
    assert_eq!(record.frame_count, 10);
    assert_eq!(record.scene, SceneConfig { strategy: Strategy::Segmentation, ..Default::default() });
    let src = catalog.parent().unwrap().join("clip_n_0");
    for i in 0..10 {
        let gray = read_pfm(&gray_path(&out, i)).unwrap();
        let edges = ground_edges(load_aux(&src, i).unwrap().labels.as_ref().unwrap());
        assert!(gray.iter().any(|&v| v > 0.0));
        for (g, e) in gray.iter().zip(edges.iter()) {
            assert_eq!(*g > 0.0, *e);
        }
    }
}

#[test]
fn missing_depth_maps_fail_with_input_error() {
    let (_dir, cfg, catalog) = prepared(json!({}));
    let clip = catalog.parent().unwrap().join("clip_c_1");
    std::fs::remove_file(dataset::depth_path(&clip, 4)).unwrap();
    let out = phosphor(&["preprocess", "--config", s(&cfg), "--strategy", "depth", "--clip", "clip_c_1"], None);
    let (code, err) = failure(&out);
    assert_eq!(code, 1);
    assert_eq!(err["error"], "MissingAuxMap");
    assert_eq!(err["schema_version"], SCHEMA_VERSION);
    // the other strategies do not need depth
    ok(&phosphor(&["preprocess", "--config", s(&cfg), "--strategy", "segmentation", "--clip", "clip_c_1"], None));
}

#[test]
fn oracle_and_fast_renders_agree() {
    let (dir, cfg, _) = prepared(json!({ "percept": { "width": 32, "height": 32, "half_width_um": 4500.0 } }));
    let args = ["--config", s(&cfg), "--clip", "clip_cp_0", "--strategy", "combination", "--grid", "16"];
    ok(&phosphor(&[&["preprocess"][..], &args[..6]].concat(), None));
    let cell = ["--rho", "300", "--lambda", "1000", "--float-frames"];
    ok(&phosphor(&[&["render"][..], &args[..], &cell[..]].concat(), None));
    let seq = dir.path().join("out/rendered/clip_cp_0/combination/grid16/rho300_lambda1000");
    let fast: Vec<_> = (0..10).map(|i| read_pfm(&spv_float_path(&seq, i)).unwrap()).collect();
    let fast_record: RenderRecord = serde_json::from_str(&std::fs::read_to_string(seq.join("render.json")).unwrap()).unwrap();

    ok(&phosphor(&[&["render"][..], &args[..], &cell[..], &["--oracle"][..]].concat(), None));
    let oracle_record: RenderRecord = serde_json::from_str(&std::fs::read_to_string(seq.join("render.json")).unwrap()).unwrap();
    let mut worst = 0.0f64;
    for (i, f) in fast.iter().enumerate() {
        let o = read_pfm(&spv_float_path(&seq, i)).unwrap();
        worst = f.iter().zip(o.iter()).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    assert!(worst <= 1e-3, "max diff {worst}");
    assert!(fast.iter().any(|f| f.iter().any(|&v| v > 0.05)));
    assert_ne!(fast_record.render_hash, oracle_record.render_hash);
    assert_eq!(fast_record.inputs, oracle_record.inputs);
}

#[test]
fn full_condition_sweep_gives_distinct_sequences() {
    let (dir, cfg, _) = prepared(json!({ "percept": { "width": 24, "height": 24, "half_width_um": 4500.0 } }));
    ok(&phosphor(&["preprocess", "--config", s(&cfg), "--clip", "clip_p_2", "--strategy", "saliency"], None));
    let summary = ok(&phosphor(&["render", "--config", s(&cfg), "--strategy", "saliency"], None));
    assert_eq!(summary["sequences"], 27);
    let mut hashes = std::collections::HashSet::new();
    let root = dir.path().join("out/rendered/clip_p_2/saliency");
    for grid in [8, 16, 32] {
        for cell in ParamCell::all() {
            let seq = root.join(format!("grid{grid}")).join(cell.label());
            let r: RenderRecord = serde_json::from_str(&std::fs::read_to_string(seq.join("render.json")).unwrap()).unwrap();
            assert_eq!((r.grid, r.param_cell, r.frame_count), (grid, cell, 10));
            assert_eq!(r.outputs.len(), 10);
            hashes.insert(r.render_hash);
        }
    }
    assert_eq!(hashes.len(), 27);
}

/// A hand-made one-frame sequence that drives a single electrode.
#[test]
fn zero_lambda_calibration_frame_is_circular() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        json!({ "percept": { "width": 64, "height": 64, "half_width_um": 2500.0 }, "table": { "w_min": 0.001, "field": { "mode": "exact" } } }),
    );
    let seq = dir.path().join("out/preprocessed/calib/segmentation");
    std::fs::create_dir_all(&seq).unwrap();
    let mut gray = ndarray::Array2::<f64>::zeros((64, 64));
    // electrode (3, 4) of the 8x8 array, just right of and above the fovea
    gray.slice_mut(ndarray::s![24..32, 32..40]).fill(255.0);
    write_pfm(&gray_path(&seq, 0), &gray).unwrap();
    let record = PipelineRecord {
        schema_version: SCHEMA_VERSION,
        tool_version: "test".into(),
        command: "preprocess".into(),
        clip_id: "calib".into(),
        strategy: Strategy::Segmentation,
        scene: SceneConfig::default(),
        fps: 1.0,
        frame_count: 1,
        catalog: phosphor_cli::artifacts::FileHash { file: "none".into(), sha256: String::new() },
        inputs: vec![],
        outputs: vec![],
    };
    std::fs::write(seq.join("pipeline.json"), serde_json::to_string(&record).unwrap()).unwrap();

    for rho in ["100", "300", "500"] {
        let args = ["render", "--config", s(&cfg), "--grid", "8", "--rho", rho, "--lambda", "0", "--float-frames"];
        ok(&phosphor(&args, None));
        let out = dir.path().join(format!("out/rendered/calib/segmentation/grid8/rho{rho}_lambda0"));
        let img = read_pfm(&spv_float_path(&out, 0)).unwrap();
        let grid = PerceptGrid::rebuild(64, 64, Extent::square(2500.0)).unwrap();
        let frame = PerceptFrame::from_response(&grid, img.as_slice().unwrap(), 0);
        let e = moment_ellipse(&frame, &grid).unwrap();
        assert!(e.axis_ratio() <= 1.05, "rho {rho}: axis ratio {}", e.axis_ratio());
    }
}

#[test]
fn sessions_are_seeded_from_flag_or_environment() {
    let (dir, cfg, _) = prepared(json!({}));
    let read = |id: &str| std::fs::read(dir.path().join(format!("out/sessions/{id}/session.json"))).unwrap();
    ok(&phosphor(&["make-session", "--config", s(&cfg), "--seed", "7"], None));
    let a = read("s000");
    ok(&phosphor(&["make-session", "--config", s(&cfg), "--seed", "7"], None));
    assert_eq!(a, read("s000"));
    ok(&phosphor(&["make-session", "--config", s(&cfg)], Some("7")));
    assert_eq!(a, read("s000"));
    ok(&phosphor(&["make-session", "--config", s(&cfg), "--seed", "8"], Some("7")));
    assert_ne!(a, read("s000"));
    let plan: SessionPlan = serde_json::from_slice(&a).unwrap();
    assert_eq!((plan.rng_seed, plan.trials.len()), (7, MAIN_TRIALS));

    let summary = ok(&phosphor(&["make-session", "--config", s(&cfg), "--subjects", "10"], None));
    assert_eq!(summary["sessions"].as_array().unwrap().len(), 10);
    let plan9: SessionPlan = serde_json::from_slice(&read("s009")).unwrap();
    assert_eq!(plan9.param_cell, ParamCell::for_subject(0));

    let (code, err) = failure(&phosphor(&["make-session", "--config", s(&cfg)], Some("seven")));
    assert_eq!((code, err["error"].as_str().unwrap()), (1, "InvalidSeed"));
}

#[test]
fn unbalanced_catalog_is_rejected() {
    let (_dir, cfg, catalog) = prepared(json!({}));
    let mut manifest: Value = serde_json::from_str(&std::fs::read_to_string(&catalog).unwrap()).unwrap();
    manifest["clips"].as_array_mut().unwrap().remove(0);
    std::fs::write(&catalog, manifest.to_string()).unwrap();
    let (code, err) = failure(&phosphor(&["make-session", "--config", s(&cfg)], None));
    assert_eq!((code, err["error"].as_str().unwrap()), (1, "UnbalancedCatalog"));
}

fn write_log(root: &Path, plan: &SessionPlan, policy: Policy, seed: u64) {
    let envs = simulate_session(plan, seed, |_, t, rng| Some(policy.answer(t.ground_truth, rng)));
    let dir = root.join("out/responses");
    std::fs::create_dir_all(&dir).unwrap();
    let text: String = envs.iter().map(|e| serde_json::to_string(e).unwrap() + "\n").collect();
    std::fs::write(dir.join(format!("{}.jsonl", plan.subject_id)), text).unwrap();
}

fn plans(root: &Path, catalog: &Path, n: usize) -> Vec<SessionPlan> {
    let cat = dataset::load_catalog(catalog, Default::default()).unwrap();
    (0..n)
        .map(|i| {
            let plan = make_session(&format!("s{i:03}"), &cat, ParamCell::for_subject(i), i as u64).unwrap();
            let dir = root.join(format!("out/sessions/{}", plan.subject_id));
            std::fs::create_dir_all(&dir).unwrap();
            std::fs::write(dir.join("session.json"), serde_json::to_string(&plan).unwrap()).unwrap();
            plan
        })
        .collect()
}

#[test]
fn perfect_responder_reaches_corrected_ceiling() {
    let (dir, cfg, catalog) = prepared(json!({}));
    let plan = plans(dir.path(), &catalog, 1).remove(0);
    write_log(dir.path(), &plan, Policy::GroundTruth { lapse: 0.0 }, 1);
    ok(&phosphor(&["analyze", "--config", s(&cfg), "--n-resamples", "200"], None));
    let metrics: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/analysis/metrics.json")).unwrap()).unwrap();
    let overall = metrics["metrics"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["strategy"].is_null() && m["grid"].is_null())
        .unwrap();
    // per target type: 48 trials in each of N, C, CP, P give 192 present events, all reported
    let signal = 48.0 * (0.0 + 1.0 + 2.0 + 1.0);
    let yes = signal;
    let z = Normal::new(0.0, 1.0).unwrap();
    let ceiling = z.inverse_cdf(1.0 - 1.0 / (2.0 * signal)) - z.inverse_cdf(1.0 / (2.0 * yes));
    let d = overall["metrics"]["d_prime"].as_f64().unwrap();
    assert!((d - ceiling).abs() < 1e-8, "{d} vs {ceiling}");
    assert_eq!(overall["metrics"]["correction_applied"], true);
    assert!(dir.path().join("out/analysis/stats.json").is_file());
    assert!(dir.path().join("out/analysis/run.json").is_file());
}

#[test]
fn informed_group_beats_random_group() {
    let (dir, cfg, catalog) = prepared(json!({}));
    let all = plans(dir.path(), &catalog, 40);
    let mut groups = serde_json::Map::new();
    for (i, plan) in all.iter().enumerate() {
        let (name, policy) =
            if i % 2 == 0 { ("informed", Policy::GroundTruth { lapse: 0.6 }) } else { ("random", Policy::Random { p_yes: 0.5 }) };
        write_log(dir.path(), plan, policy, 100 + i as u64);
        groups.insert(plan.subject_id.clone(), json!(name));
    }
    let mut c: Value = serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    c["analysis"]["groups"] = Value::Object(groups);
    c["analysis"]["n_resamples"] = json!(2000);
    std::fs::write(&cfg, c.to_string()).unwrap();
    ok(&phosphor(&["analyze", "--config", s(&cfg)], None));
    let stats: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/analysis/stats.json")).unwrap()).unwrap();
    let g = stats["stats"].as_array().unwrap().iter().find(|t| t["comparison"] == "group informed - random").unwrap();
    assert!(g["observed_diff"].as_f64().unwrap() > 0.0);
    assert!(g["fdr_adjusted_p"].as_f64().unwrap() < 0.05, "{g}");
}

#[test]
fn partial_and_truncated_logs_are_reported_not_fatal() {
    let (dir, cfg, catalog) = prepared(json!({}));
    let plan = plans(dir.path(), &catalog, 1).remove(0);
    let mut envs = simulate_session(&plan, 3, |i, t, rng| (i % 3 != 0).then(|| Policy::GroundTruth { lapse: 0.1 }.answer(t.ground_truth, rng)));
    envs.truncate(100);
    let mut text: String = envs.iter().map(|e| serde_json::to_string(e).unwrap() + "\n").collect();
    text.push_str("{\"schema_version\":1,\"sess");
    std::fs::create_dir_all(dir.path().join("out/responses")).unwrap();
    std::fs::write(dir.path().join("out/responses/s000.jsonl"), text).unwrap();
    ok(&phosphor(&["analyze", "--config", s(&cfg), "--n-resamples", "100"], None));
    let metrics: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/analysis/metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["coverage"][0]["answered"], 100);
    let warnings: Vec<&str> = metrics["warnings"].as_array().unwrap().iter().map(|w| w.as_str().unwrap()).collect();
    assert!(warnings.iter().any(|w| w.contains("truncated")));
    assert!(warnings.iter().any(|w| w.starts_with("IncompleteSession")));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = failure(&phosphor(&["render", "--no-such-flag"], None));
    assert_eq!((code, err["error"].as_str().unwrap()), (1, "Usage"));
    let (code, _) = failure(&phosphor(&["preprocess", "-o", s(dir.path())], None));
    assert_eq!(code, 1);
    std::fs::write(dir.path().join("bad.json"), "{").unwrap();
    let (code, err) = failure(&phosphor(&["analyze", "--config", s(&dir.path().join("bad.json"))], None));
    assert_eq!((code, err["error"].as_str().unwrap()), (1, "ConfigParse"));
    // an output root that is a regular file cannot be created
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let (code, err) = failure(&phosphor(&["synth", "-o", s(&blocker.join("sub")), "--fps", "1"], None));
    assert_eq!((code, err["class"].as_str().unwrap()), (2, "internal"));
    assert!(phosphor(&["--help"], None).status.success());
}
