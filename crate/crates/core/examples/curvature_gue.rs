//! Level-curvature tails: inverse-CDF samples of both references and a
//! parametric GUE family, fitted above k_min.
//!
//! ```bash
//! cargo run --release --example curvature_gue -- 64
//! ```

use rand::Rng;
use transmon_chaos::curvature::{tail_fit, TailHistogram, DEFAULT_K_MIN};
use transmon_chaos::rmt;
use transmon_chaos::Result;

pub fn run(realizations: usize) -> Result<()> {
    let mut rng = rmt::stream_rng(3, 0);
    let poi: Vec<f64> = (0..100_000).map(|_| rmt::sample_curvature_poisson(rng.random())).collect();
    let gue: Vec<f64> = (0..100_000).map(|_| rmt::sample_curvature_gue(rng.random())).collect();
    let family = rmt::parametric_gue_curvatures(80, 200, rmt::PARAMETRIC_STEP, realizations, 3)?;
    for (name, ks) in [("sampled POI", &poi), ("sampled GUE", &gue), ("parametric GUE", &family)] {
        let fit = tail_fit(&TailHistogram::from_samples(ks, DEFAULT_K_MIN))?;
        println!("{name:>15}: {} curvatures, beta~ = {:.2} ± {:.2}", ks.len(), fit.beta_tilde, fit.stderr);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run(std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(64))
}
