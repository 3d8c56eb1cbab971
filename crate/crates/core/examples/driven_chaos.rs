//! Windowed level statistics of U(t) under a strong drive.
//!
//! ```bash
//! cargo run --release --example driven_chaos -- 0.29 10
//! ```

use transmon_chaos::diagnostics;
use transmon_chaos::hilbert::{dressed_basis, ModeDims, SystemConfig};
use transmon_chaos::propagator::{Propagator, TimeGrid};
use transmon_chaos::pulse::{synth_test_pulse, PulseKind, SynthSpec};
use transmon_chaos::spectral::{self, KlReference};
use transmon_chaos::Result;

pub fn run(amplitude: f64, duration: f64, dims: ModeDims, windows: usize) -> Result<()> {
    let cfg = SystemConfig::default().with_dims(dims);
    let prop = Propagator::new(&cfg)?;
    let dressed = dressed_basis(prop.drift(), cfg.dims)?;
    let mut spec = SynthSpec::new(PulseKind::GaussianFlattop, duration, amplitude);
    spec.rise_ns = (duration / 4.0).min(1.0);
    let pulse = synth_test_pulse(&spec)?;
    let grid = TimeGrid::with_min_checkpoints(0.0, duration, 0.001, 2 * windows)?;

    let (mut times, mut phases, mut psub) = (Vec::new(), Vec::new(), Vec::new());
    prop.evolve_with(&pulse, &grid, None, |_, t, u| {
        times.push(t);
        phases.push(spectral::eigenphases_only(u.as_ref())?);
        psub.push(diagnostics::subspace_weight_at(u.as_ref(), &dressed));
        Ok(())
    })?;
    let kl = spectral::windowed_kl_from_phases(&times, &phases, windows, &KlReference::new(spectral::DEFAULT_BINS))?;

    println!("   t/ns   d_poi   d_gue   p_sub");
    let every = (kl.len() / 25).max(1);
    for i in (0..kl.len()).step_by(every) {
        let k = times.partition_point(|&t| t < kl.t_mid[i]).min(times.len() - 1);
        let mark = if kl.d_gue[i] < kl.d_poi[i] { "  GUE" } else { "" };
        println!("{:>7.3}  {:>6.3}  {:>6.3}  {:>6.3}{mark}", kl.t_mid[i], kl.d_poi[i], kl.d_gue[i], psub[k]);
    }
    let closer = (0..kl.len()).filter(|&i| kl.d_gue[i] < kl.d_poi[i]).count();
    let min_psub = psub.iter().copied().fold(1.0, f64::min);
    println!("{closer} of {} windows closer to GUE, min p_sub {min_psub:.3}", kl.len());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let amplitude = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.29);
    let duration = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(10.0);
    run(amplitude, duration, SystemConfig::default().dims, spectral::DEFAULT_WINDOWS)
}
