//! Realized logical gate, its local invariants, and the error of that gate
//! class under parameter deviations.
//!
//! ```bash
//! cargo run --release --example gate_robustness -- 0.15 10
//! ```

use transmon_chaos::gates::{self, DeviationSpec, SweepParameter, TargetKind};
use transmon_chaos::hilbert::{ModeDims, SystemConfig};
use transmon_chaos::propagator::TimeGrid;
use transmon_chaos::pulse::{synth_test_pulse, PulseKind, SynthSpec};
use transmon_chaos::Result;

pub fn run(amplitude: f64, duration: f64, dims: ModeDims, points: usize) -> Result<()> {
    let cfg = SystemConfig::default().with_dims(dims);
    let mut spec = SynthSpec::new(PulseKind::GaussianFlattop, duration, amplitude);
    spec.rise_ns = (duration / 4.0).min(2.0);
    let pulse = synth_test_pulse(&spec)?;
    let grid = TimeGrid::with_min_checkpoints(0.0, duration, 0.001, 1)?;

    let gate = gates::realized_gate(&cfg, &pulse, &grid)?;
    let li = gates::local_invariants(&gate);
    println!("realized gate: invariants {li}, leakage {:.2e}", gate.leakage);
    for kind in [TargetKind::Identity, TargetKind::Cnot, TargetKind::SqrtIswap, TargetKind::Bgate] {
        let target = gates::make_target(kind);
        println!(
            "  vs {:>10}: li error {:.4}, avg fidelity {:.4}",
            kind.name(),
            gates::li_gate_error(&gate, &target),
            gates::avg_gate_fidelity(&gate, &target)
        );
    }

    println!("parameter  deviation  li_error    leakage");
    for parameter in SweepParameter::ALL {
        let dev = DeviationSpec::symmetric(parameter, 0.02, points)?;
        for row in gates::robustness_sweep(&cfg, &pulse, &grid, &gate, &dev)? {
            println!("{:>9}  {:>+9.3}  {:.3e}  {:.3e}  {}", parameter.name(), row.deviation, row.li_error, row.leakage, row.status);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let amplitude = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.15);
    let duration = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10.0);
    run(amplitude, duration, SystemConfig::default().dims, 5)
}
