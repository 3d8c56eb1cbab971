//! Dressed spectrum of the undriven device and its level statistics.
//!
//! ```bash
//! cargo run --release --example static_spectrum
//! ```

use transmon_chaos::hilbert::{dressed_basis, drift_hamiltonian, ModeDims, SystemConfig, COMPUTATIONAL_LABELS};
use transmon_chaos::propagator::{Propagator, TimeGrid};
use transmon_chaos::pulse::Pulse;
use transmon_chaos::spectral::{self, KlReference};
use transmon_chaos::Result;

pub fn run(quick: bool) -> Result<()> {
    let mut cfg = SystemConfig::default();
    if quick {
        cfg = cfg.with_dims(ModeDims::new(3, 3, 4)?);
    }
    let dressed = dressed_basis(&drift_hamiltonian(&cfg), cfg.dims)?;
    println!("dim {} (q1 {}, q2 {}, cavity {})", cfg.dims.total(), cfg.dims.n1, cfg.dims.n2, cfg.dims.nc);
    println!("label  energy/GHz   |<bare|dressed>|");
    for label in COMPUTATIONAL_LABELS {
        println!("{label}  {:>10.6}   {:.6}", dressed.energy(label), dressed.overlap(label));
    }

    let t1 = if quick { 0.2 } else { 10.0 };
    let grid = TimeGrid::new(0.0, t1, 0.001, 100)?;
    let series = Propagator::new(&cfg)?.evolve(&Pulse::zero(), &grid)?;
    let phases = spectral::eigenphases_only(series.last().as_ref())?;
    let ratios = spectral::ratio_samples(&phases)?;
    let kl = KlReference::new(spectral::DEFAULT_BINS).from_ratios(&ratios.values)?;
    println!(
        "t = {t1} ns: {} ratios, <r> = {:.4}, d_poi = {:.3}, d_gue = {:.3}",
        ratios.values.len(),
        ratios.mean(),
        kl.d_poi,
        kl.d_gue
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run(std::env::args().any(|a| a == "--quick"))
}
