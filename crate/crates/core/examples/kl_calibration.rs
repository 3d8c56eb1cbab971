//! Normalized KL distances of CUE and Poisson spectra from both references.
//!
//! ```bash
//! cargo run --release --example kl_calibration -- 500 150
//! ```

use transmon_chaos::rmt;
use transmon_chaos::spectral::{self, KlReference};
use transmon_chaos::Result;

pub fn run(samples: u64, dim: usize) -> Result<()> {
    let reference = KlReference::new(spectral::DEFAULT_BINS);
    let (mut cue, mut poi) = (Vec::new(), Vec::new());
    for i in 0..samples {
        let u = rmt::cue(dim, &mut rmt::stream_rng(1, i));
        cue.extend(spectral::ratio_samples(&spectral::eigenphases_only(u.as_ref())?)?.values);
        poi.extend(spectral::ratio_samples(&rmt::poisson_phases(dim, &mut rmt::stream_rng(2, i)))?.values);
    }
    println!("{samples} samples of dimension {dim}");
    for (name, ratios) in [("CUE", &cue), ("Poisson", &poi)] {
        let kl = reference.from_ratios(ratios)?;
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        println!("{name:>8}: <r> = {mean:.4}, d_poi = {:.4}, d_gue = {:.4}", kl.d_poi, kl.d_gue);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let samples = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let dim = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(150);
    run(samples, dim)
}
