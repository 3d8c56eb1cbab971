//! Drive the command-line pipeline in-process from a generated config.
//!
//! ```bash
//! cargo run --release --example cli_pipeline -- /tmp/pipeline
//! ```

use std::path::{Path, PathBuf};

use transmon_chaos::cli;

pub fn run(dir: &Path, t1: f64) -> i32 {
    let config = format!(
        r#"output_dir = "{out}"
cache_dir = "{cache}"
analyses = ["spectra", "populations", "otoc"]
kl_windows = 10

[system]
dims = [3, 3, 4]

[grid]
t1 = {t1}
checkpoint_ns = 0.01

[pulse.synth]
kind = "gaussian_flattop"
duration_ns = {t1}
amplitude_ghz = 0.1
rise_ns = 0.25
"#,
        out = dir.join("out").display(),
        cache = dir.join("cache").display(),
    );
    let path = dir.join("run.toml");
    if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(&path, config)) {
        eprintln!("{e}");
        return 1;
    }
    let path = path.to_string_lossy().into_owned();
    for args in [vec!["show-config"], vec!["run"], vec!["run"]] {
        let argv = ["transmon-chaos", "--config", path.as_str()].into_iter().chain(args);
        let code = cli::main_with_args(argv);
        if code != 0 {
            return code;
        }
    }
    println!("outputs in {}", dir.join("out").display());
    0
}

#[allow(dead_code)]
fn main() {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("transmon-pipeline"));
    std::process::exit(run(&dir, 1.0));
}
