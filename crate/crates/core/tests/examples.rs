use transmon_chaos::hilbert::ModeDims;

#[allow(dead_code)]
#[path = "../examples/static_spectrum.rs"]
mod static_spectrum;
#[allow(dead_code)]
#[path = "../examples/pulse_io.rs"]
mod pulse_io;
#[allow(dead_code)]
#[path = "../examples/kl_calibration.rs"]
mod kl_calibration;
#[allow(dead_code)]
#[path = "../examples/curvature_gue.rs"]
mod curvature_gue;
#[allow(dead_code)]
#[path = "../examples/driven_chaos.rs"]
mod driven_chaos;
#[allow(dead_code)]
#[path = "../examples/populations_otoc.rs"]
mod populations_otoc;
#[allow(dead_code)]
#[path = "../examples/gate_robustness.rs"]
mod gate_robustness;
#[allow(dead_code)]
#[path = "../examples/cli_pipeline.rs"]
mod cli_pipeline;
#[allow(dead_code)]
#[path = "../examples/oracle_cache.rs"]
mod oracle_cache;

fn tiny() -> ModeDims {
    ModeDims::new(2, 2, 3).unwrap()
}

#[test]
fn static_spectrum_runs() {
    static_spectrum::run(true).unwrap();
}

#[test]
fn pulse_io_runs() {
    let dir = tempfile::tempdir().unwrap();
    pulse_io::run(dir.path().to_owned()).unwrap();
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 3);
}

#[test]
fn kl_calibration_runs() {
    kl_calibration::run(10, 40).unwrap();
}

#[test]
fn curvature_gue_runs() {
    curvature_gue::run(2).unwrap();
}

#[test]
fn driven_chaos_runs() {
    driven_chaos::run(0.29, 0.5, tiny(), 10).unwrap();
}

#[test]
fn populations_otoc_runs() {
    populations_otoc::run(0.29, 0.5, tiny()).unwrap();
}

#[test]
fn gate_robustness_runs() {
    gate_robustness::run(0.15, 0.5, tiny(), 3).unwrap();
}

#[test]
fn cli_pipeline_runs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli_pipeline::run(dir.path(), 0.5), 0);
    assert!(dir.path().join("out/report.json").exists());
}

#[test]
fn oracle_cache_runs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cache.json");
    oracle_cache::run(&path, 20).unwrap();
    assert!(transmon_chaos::rmt::OracleCache::load(&path).unwrap().get(transmon_chaos::rmt::MEAN_R_CUE).is_some());
}
