//! Regenerates the Monte Carlo oracle cache used by the acceptance checks.
//!
//! ```bash
//! cargo run --release --example oracle_cache [-- <output.json>]
//! ```

use std::path::{Path, PathBuf};

use transmon_chaos::rmt::{self, OracleCache};

const DIM: usize = 100;
const SAMPLES: usize = 10_000;
const SEED: u64 = 20_240_611;

pub fn run(path: &Path, samples: usize) -> transmon_chaos::Result<()> {
    let mut cache = OracleCache::load(path).unwrap_or_default();
    let entry = rmt::mean_r_cue_entry(DIM, samples, SEED)?;
    println!("{} = {:.6} ± {:.6}", entry.name, entry.value, entry.stderr);
    cache.insert(entry);
    cache.save(path)?;

    let expect = rmt::oracle_expectations(Some(&cache));
    println!("mean R (Poisson, closed form) = {:.6}", expect.mean_r_poisson);
    println!("P_POI(0) = {}", expect.p_poi_at_zero);
    println!(
        "curvature tail exponents: Poisson {}, GUE {}",
        expect.tail_exponent_poisson, expect.tail_exponent_gue
    );
    println!("wrote {}", path.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> transmon_chaos::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/oracle_cache.json"));
    run(&path, SAMPLES)
}
