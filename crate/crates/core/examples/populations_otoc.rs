//! Leakage, occupation spectra, mode populations and OTOCs for a driven run.
//!
//! ```bash
//! cargo run --release --example populations_otoc -- 0.29 5
//! ```

use transmon_chaos::diagnostics::{self, InitialState, Otoc, OtocChoice, DEFAULT_THRESHOLD};
use transmon_chaos::hilbert::{dressed_basis, FockLabel, ModeDims, SystemConfig};
use transmon_chaos::linalg;
use transmon_chaos::propagator::{Propagator, TimeGrid};
use transmon_chaos::pulse::{synth_test_pulse, PulseKind, SynthSpec};
use transmon_chaos::spectral;
use transmon_chaos::Result;

pub fn run(amplitude: f64, duration: f64, dims: ModeDims) -> Result<()> {
    let cfg = SystemConfig::default().with_dims(dims);
    let prop = Propagator::new(&cfg)?;
    let dressed = dressed_basis(prop.drift(), cfg.dims)?;
    let mut spec = SynthSpec::new(PulseKind::GaussianFlattop, duration, amplitude);
    spec.rise_ns = (duration / 4.0).min(1.0);
    let pulse = synth_test_pulse(&spec)?;
    let grid = TimeGrid::with_min_checkpoints(0.0, duration, 0.001, 10)?;
    let series = prop.evolve(&pulse, &grid)?;

    let initial = InitialState::Dressed(FockLabel::new(1, 0, 0));
    let psi0 = initial.vector(&dressed);
    let otocs = [OtocChoice::Quadrature, OtocChoice::Number].map(|choice| {
        let (v, w) = diagnostics::builtin_otoc_operators(cfg.dims, choice);
        Otoc::new(v, w, psi0.clone())
    });
    println!("initial state {}", initial.tag());
    println!("   t/ns   p_sub  levels>{DEFAULT_THRESHOLD}   <n1>   <n2>   <nc>   F_quad  F_num");
    for (t, u) in series.iter() {
        let frame = spectral::eigenphases(u.as_ref(), t)?;
        let psi = linalg::apply(u.as_ref(), &psi0);
        let occ = diagnostics::occupation_spectrum(&frame, &psi);
        let pops = diagnostics::reduced_occupations(&psi, cfg.dims, t);
        let mean = |p: &[f64]| p.iter().enumerate().map(|(n, x)| n as f64 * x).sum::<f64>();
        print!(
            "{t:>7.3}  {:>6.3}  {:>10.3}  {:>5.3}  {:>5.3}  {:>5.3}",
            diagnostics::subspace_weight_at(u.as_ref(), &dressed),
            diagnostics::level_count_fraction(&occ, DEFAULT_THRESHOLD),
            mean(&pops.q1),
            mean(&pops.q2),
            mean(&pops.cavity),
        );
        for o in &otocs {
            match o {
                Ok(o) => print!("  {:>7.3}", o.at(u.as_ref())),
                Err(e) => print!("  {e}"),
            }
        }
        println!();
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let amplitude = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.29);
    let duration = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5.0);
    run(amplitude, duration, SystemConfig::default().dims)
}
