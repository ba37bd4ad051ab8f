//! Cross-module checks through the public API: catalog on disk, strategy,
//! encoding, rendering and the statistics that consume the results.

use phosphor_core::dataset::{generate_synthetic_catalog, load_aux, load_catalog, load_frame, LoadOptions, SynthOptions};
use phosphor_core::exec::Exec;
use phosphor_core::psych::{bootstrap_diff_with, make_session, ParamCell};
use phosphor_core::render::{
    build_sensitivity_table_with, render_fast_with, AxonMapParams, ElectrodeGrid, Retina, TableOptions,
};
use phosphor_core::retina::{build_percept_grid, Extent};
use phosphor_core::scene::{apply_strategy, encode_amplitudes, SceneConfig, Strategy};

fn small_synth() -> SynthOptions {
    SynthOptions { fps: 2.0, duration_s: 5.0, width: 64, height: 48 }
}

#[test]
fn synthetic_catalog_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let made = generate_synthetic_catalog(dir.path(), 3, &small_synth()).unwrap();
    let loaded = load_catalog(&dir.path().join("catalog.json"), LoadOptions::default()).unwrap();
    assert_eq!(made.clips, loaded.clips);
    assert_eq!(loaded.main_clips().count(), 16);
    assert_eq!(loaded.practice_clips().count(), 8);
}

#[test]
fn every_strategy_renders_to_bounded_brightness() {
    let dir = tempfile::tempdir().unwrap();
    let catalog = generate_synthetic_catalog(dir.path(), 5, &small_synth()).unwrap();
    let clip = catalog.main_clips().next().unwrap();
    let clip_dir = catalog.clip_dir(clip);
    let frame = load_frame(&clip_dir, 0).unwrap();
    let aux = load_aux(&clip_dir, 0).unwrap();

    let retina = Retina::default();
    let params = AxonMapParams::new(200.0, 500.0).unwrap();
    let grid = ElectrodeGrid::square(16).unwrap();
    let percept = build_percept_grid(&retina.frame, 32, 32, Extent::square(3200.0)).unwrap();
    let table = build_sensitivity_table_with(Exec::default(), &percept, &params, &retina, TableOptions::default()).unwrap();

    for strategy in Strategy::ALL {
        let cfg = SceneConfig { strategy, ..Default::default() };
        let gray = apply_strategy(&frame, &aux, &cfg).unwrap();
        let amps = encode_amplitudes(&gray, &grid);
        let spv = render_fast_with(Exec::default(), &amps, &grid, &params, &table).unwrap();
        assert_eq!(spv.brightness.len(), 32 * 32, "{}", strategy.name());
        assert!(spv.brightness.iter().all(|b| (0.0..=1.0).contains(b)), "{}", strategy.name());
    }
}

#[test]
fn sequential_and_parallel_renders_agree() {
    let retina = Retina::default();
    let params = AxonMapParams::new(300.0, 1000.0).unwrap();
    let grid = ElectrodeGrid::square(8).unwrap();
    let percept = build_percept_grid(&retina.frame, 24, 24, Extent::square(4000.0)).unwrap();
    let seq = build_sensitivity_table_with(Exec::Sequential, &percept, &params, &retina, TableOptions::default()).unwrap();
    let par = build_sensitivity_table_with(Exec::Parallel, &percept, &params, &retina, TableOptions::default()).unwrap();
    let values: Vec<f64> = (0..grid.len()).map(|i| (i % 5) as f64 / 4.0).collect();
    let amps = phosphor_core::render::AmplitudeFrame::new(grid.rows, grid.cols, values).unwrap();
    let a = render_fast_with(Exec::Sequential, &amps, &grid, &params, &seq).unwrap();
    let b = render_fast_with(Exec::Parallel, &amps, &grid, &params, &par).unwrap();
    assert_eq!(a.brightness, b.brightness);
}

#[test]
fn bootstrap_does_not_depend_on_execution() {
    let a: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin() + 0.3).collect();
    let b: Vec<f64> = (0..30).map(|i| (i as f64 * 0.91).cos()).collect();
    for paired in [true, false] {
        let s = bootstrap_diff_with(Exec::Sequential, &a, &b, 3000, 11, paired).unwrap();
        let p = bootstrap_diff_with(Exec::Parallel, &a, &b, 3000, 11, paired).unwrap();
        assert_eq!(s.boot_p, p.boot_p);
        assert_eq!(s.observed_diff, p.observed_diff);
    }
}

#[test]
fn blinded_session_hides_clip_identity() {
    let dir = tempfile::tempdir().unwrap();
    let catalog = generate_synthetic_catalog(dir.path(), 9, &small_synth()).unwrap();
    let plan = make_session("s001", &catalog, ParamCell::for_subject(1), 42).unwrap();
    let json = serde_json::to_string(&plan.blinded()).unwrap();
    for clip in catalog.main_clips().chain(catalog.practice_clips()) {
        assert!(!json.contains(&clip.clip_id), "{} leaks", clip.clip_id);
    }
    for key in ["has_people", "has_cars", "ground_truth", "category"] {
        assert!(!json.contains(key), "{key} leaks");
    }
}
