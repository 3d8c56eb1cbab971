//! Synthesize test pulses, write them as CSV and read them back.
//!
//! ```bash
//! cargo run --release --example pulse_io -- /tmp/pulses
//! ```

use std::path::PathBuf;

use transmon_chaos::pulse::{synth_test_pulse, Pulse, PulseKind, SynthSpec};

pub fn run(dir: PathBuf) -> Result<(), Box<dyn std::error::Error>> {
    std::fs::create_dir_all(&dir)?;
    for kind in [PulseKind::Flat, PulseKind::GaussianFlattop, PulseKind::ChirpedGaussian] {
        let mut spec = SynthSpec::new(kind, 10.0, 0.05);
        spec.rise_ns = 2.0;
        let analytic = synth_test_pulse(&spec)?;
        let times: Vec<f64> = (0..=10_000).map(|i| i as f64 * 0.001).collect();
        let values = times.iter().map(|&t| analytic.evaluate(t)).collect();
        let pulse = Pulse::sampled(times, values)?;
        let name = serde_json::to_value(kind)?.as_str().unwrap_or("pulse").to_owned();
        let path = dir.join(format!("{name}.csv"));
        pulse.save(&path)?;
        let back = Pulse::load(&path)?;
        let worst = (0..=1000)
            .map(|i| {
                let t = i as f64 * 0.01;
                (pulse.evaluate(t) - back.evaluate(t)).norm()
            })
            .fold(0.0, f64::max);
        let peak = (0..=1000).map(|i| pulse.evaluate(i as f64 * 0.01).norm()).fold(0.0, f64::max);
        println!("{}: peak |E| {peak:.4} GHz, round-trip error {worst:.1e}", path.display());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("transmon-pulses"));
    run(dir)
}
