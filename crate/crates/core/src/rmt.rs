//! Random-matrix ensembles and analytic reference constants used to check the
//! spectral and curvature statistics.
//!
//! Every sample `i` of a spec draws from its own ChaCha stream `(seed, i)`,
//! so results do not depend on how sampling is parallelized.

use std::f64::consts::PI;
use std::path::Path;

use faer::Mat;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, ZERO};
use crate::curvature;
use crate::spectral::{self, EigenphaseFrame};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnsembleKind {
    Gue,
    Cue,
    PoissonPhases,
    DiagonalIndependent,
    ParametricGue,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub dim: usize,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub enum Sample {
    Matrix(Mat<c64>),
    Phases(Vec<f64>),
    /// Parametric family `H(λ_j)` together with its λ grid.
    Family { lambdas: Vec<f64>, matrices: Vec<Mat<c64>> },
}

/// Independent stream for sample `index`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Hermitian matrix with N(0,1) diagonal and `(x + iy)/√2` off-diagonal
/// entries, so that `⟨tr H²⟩ = N²`.
pub fn gue(dim: usize, rng: &mut impl Rng) -> Mat<c64> {
    let mut h = Mat::<c64>::zeros(dim, dim);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..dim {
        h[(j, j)] = c64::new(normal(rng), 0.0);
        for i in (j + 1)..dim {
            let z = c64::new(s * normal(rng), s * normal(rng));
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

/// Haar unitary: QR of a complex Ginibre matrix with the phases of R's
/// diagonal divided out.
pub fn cue(dim: usize, rng: &mut impl Rng) -> Mat<c64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = Mat::from_fn(dim, dim, |_, _| c64::new(s * normal(rng), s * normal(rng)));
    let qr = z.qr();
    let q = qr.compute_Q();
    let r = qr.R();
    let phases: Vec<c64> = (0..dim)
        .map(|k| {
            let d = r[(k, k)];
            let m = d.norm();
            if m > 0.0 {
                d / m
            } else {
                c64::new(1.0, 0.0)
            }
        })
        .collect();
    Mat::from_fn(dim, dim, |i, j| q[(i, j)] * phases[j])
}

/// Sorted iid uniform phases on [−π, π).
pub fn poisson_phases(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut p: Vec<f64> = (0..dim).map(|_| rng.random_range(-PI..PI)).collect();
    p.sort_by(f64::total_cmp);
    p
}

/// Diagonal matrix with iid N(0,1) entries (integrable reference).
pub fn diagonal_independent(dim: usize, rng: &mut impl Rng) -> Mat<c64> {
    Mat::from_fn(dim, dim, |i, j| if i == j { c64::new(normal(rng), 0.0) } else { ZERO })
}

/// `H(λ) = H₁ cos λ + H₂ sin λ` for two independent GUE matrices.
pub fn parametric_gue(dim: usize, lambdas: &[f64], rng: &mut impl Rng) -> Vec<Mat<c64>> {
    let h1 = gue(dim, rng);
    let h2 = gue(dim, rng);
    lambdas
        .iter()
        .map(|&l| {
            let (s, c) = l.sin_cos();
            Mat::from_fn(dim, dim, |i, j| h1[(i, j)] * c + h2[(i, j)] * s)
        })
        .collect()
}

/// Default λ window for [`EnsembleKind::ParametricGue`]: 200 points spaced
/// finely enough that the narrowest relevant avoided crossings are resolved.
pub const PARAMETRIC_STEP: f64 = 5e-4;

pub fn sample(spec: &EnsembleSpec) -> Result<Vec<Sample>> {
    if spec.dim < 3 {
        return Err(Error::InvalidParams(format!("ensemble dim must be at least 3, got {}", spec.dim)));
    }
    let draw = |i: usize| {
        let mut rng = stream_rng(spec.seed, i as u64);
        match spec.kind {
            EnsembleKind::Gue => Sample::Matrix(gue(spec.dim, &mut rng)),
            EnsembleKind::Cue => Sample::Matrix(cue(spec.dim, &mut rng)),
            EnsembleKind::PoissonPhases => Sample::Phases(poisson_phases(spec.dim, &mut rng)),
            EnsembleKind::DiagonalIndependent => Sample::Matrix(diagonal_independent(spec.dim, &mut rng)),
            EnsembleKind::ParametricGue => {
                let lambdas: Vec<f64> = (0..200).map(|k| k as f64 * PARAMETRIC_STEP).collect();
                let matrices = parametric_gue(spec.dim, &lambdas, &mut rng);
                Sample::Family { lambdas, matrices }
            }
        }
    };
    Ok((0..spec.samples).into_par_iter().map(draw).collect())
}

/// Eigenphase frames of a parametric Hermitian family, using `λ` as time and
/// phases `φ = −scale·E`. `scale` must keep the spectrum inside (−π, π).
pub fn hermitian_family_frames(lambdas: &[f64], matrices: &[Mat<c64>], scale: f64) -> Result<Vec<EigenphaseFrame>> {
    lambdas
        .iter()
        .zip(matrices)
        .map(|(&l, h)| {
            let (e, v) = linalg::hermitian_eigen(h.as_ref())?;
            let n = e.len();
            // negation reverses the order; keep phases ascending
            let phases: Vec<f64> = e.iter().rev().map(|x| -scale * x).collect();
            if phases.iter().any(|p| !(p.abs() < PI)) {
                return Err(Error::InvalidParams(format!("scale {scale} folds the spectrum")));
            }
            let eigenvectors = Mat::from_fn(n, n, |i, j| v[(i, n - 1 - j)]);
            Ok(EigenphaseFrame {
                t: l,
                phases,
                eigenvectors,
            })
        })
        .collect()
}

/// Rescaled curvatures of `realizations` independent parametric GUE families
/// (`n_lambda` points spaced by `step`), each run through tracking, central
/// differences, and pooled rescaling.
pub fn parametric_gue_curvatures(
    dim: usize,
    n_lambda: usize,
    step: f64,
    realizations: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    // semicircle radius is 2√N; keep phases well inside (−π, π)
    let scale = PI / (3.0 * (dim as f64).sqrt());
    let per: Vec<Vec<f64>> = (0..realizations)
        .into_par_iter()
        .map(|i| {
            let lambdas: Vec<f64> = (0..n_lambda).map(|k| k as f64 * step).collect();
            let family = parametric_gue(dim, &lambdas, &mut stream_rng(seed, i as u64));
            let frames = hermitian_family_frames(&lambdas, &family, scale)?;
            let spectrum = curvature::track_phases(frames, curvature::DEFAULT_MATCH_THRESHOLD)?;
            let kin = curvature::kinematics(&spectrum)?;
            let steps = 0..kin.times.len();
            let samples = curvature::rescale(&spectrum, &kin, steps, curvature::VarianceMode::Pooled)?;
            Ok(samples.into_iter().map(|c| c.k).collect())
        })
        .collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

/// Inverse-CDF sample from `P(k) = (1/π)/(1 + k²)`.
pub fn sample_curvature_poisson(u: f64) -> f64 {
    (PI * (u - 0.5)).tan()
}

/// Inverse-CDF sample from `P(k) = (2/π)/(1 + k²)²`.
///
/// With `k = tan θ` the CDF is `½ + (2θ + sin 2θ)/(2π)`, so θ solves
/// `2θ + sin 2θ = π(2u − 1)` (monotone; Newton with bisection fallback).
pub fn sample_curvature_gue(u: f64) -> f64 {
    let c = PI * (2.0 * u - 1.0);
    let (mut lo, mut hi) = (-PI / 2.0, PI / 2.0);
    let mut th = 0.5 * c / 2.0;
    for _ in 0..200 {
        let f = 2.0 * th + (2.0 * th).sin() - c;
        if f > 0.0 {
            hi = th;
        } else {
            lo = th;
        }
        let d = 2.0 + 2.0 * (2.0 * th).cos();
        let mut next = th - f / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - th).abs() < 1e-15 {
            th = next;
            break;
        }
        th = next;
    }
    th.tan()
}

/// Analytic reference constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleExpectations {
    /// `∫₀¹ R·2/(1+R)² dR = 2 ln 2 − 1`.
    pub mean_r_poisson: f64,
    pub p_poi_at_zero: f64,
    pub gue_curvature_norm: f64,
    pub poi_curvature_norm: f64,
    pub tail_exponent_poisson: f64,
    pub tail_exponent_gue: f64,
    /// Monte Carlo value, from the cache when available.
    pub mean_r_cue: Option<OracleEntry>,
}

pub fn oracle_expectations(cache: Option<&OracleCache>) -> OracleExpectations {
    OracleExpectations {
        mean_r_poisson: 2.0 * 2f64.ln() - 1.0,
        p_poi_at_zero: spectral::reference_density(spectral::Statistics::Poisson, 0.0),
        gue_curvature_norm: 2.0 / PI,
        poi_curvature_norm: 1.0 / PI,
        tail_exponent_poisson: 2.0,
        tail_exponent_gue: 4.0,
        mean_r_cue: cache.and_then(|c| c.get(MEAN_R_CUE).cloned()),
    }
}

pub const MEAN_R_CUE: &str = "mean_R_CUE";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleEntry {
    pub name: String,
    pub value: f64,
    pub stderr: f64,
    pub method: String,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleCache {
    pub entries: Vec<OracleEntry>,
}

impl OracleCache {
    pub fn get(&self, name: &str) -> Option<&OracleEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn insert(&mut self, entry: OracleEntry) {
        self.entries.retain(|e| e.name != entry.name);
        self.entries.push(entry);
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Mean and standard error of per-sample means.
pub fn batch_mean(batches: &[f64]) -> (f64, f64) {
    let n = batches.len() as f64;
    let mean = batches.iter().sum::<f64>() / n;
    let var = batches.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo `⟨R⟩` over CUE eigenphases, one batch per matrix.
pub fn mean_r_cue(dim: usize, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let means: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let u = cue(dim, &mut stream_rng(seed, i as u64));
            let phases = spectral::eigenphases_only(u.as_ref())?;
            Ok(spectral::ratio_samples(&phases)?.mean())
        })
        .collect::<Result<_>>()?;
    Ok(batch_mean(&means))
}

pub fn mean_r_cue_entry(dim: usize, samples: usize, seed: u64) -> Result<OracleEntry> {
    let (value, stderr) = mean_r_cue(dim, samples, seed)?;
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(OracleEntry {
        name: MEAN_R_CUE.into(),
        value,
        stderr,
        method: format!(
            "Monte Carlo over {samples} Haar unitaries of dim {dim}; open-line ratios; stderr from per-matrix batch means"
        ),
        seed,
        timestamp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cue_is_unitary_and_deterministic() {
        let a = cue(40, &mut stream_rng(5, 0));
        let b = cue(40, &mut stream_rng(5, 0));
        let c = cue(40, &mut stream_rng(5, 1));
        assert!(linalg::unitarity_defect(a.as_ref()) < 1e-12);
        assert_eq!(linalg::max_abs((&a - &b).as_ref()), 0.0);
        assert!(linalg::max_abs((&a - &c).as_ref()) > 0.1);
    }

    #[test]
    fn gue_second_moment() {
        let dim = 60;
        let n = 40;
        let mut acc = 0.0;
        for i in 0..n {
            let h = gue(dim, &mut stream_rng(9, i));
            assert_eq!(linalg::hermiticity_defect(h.as_ref()), 0.0);
            let (e, _) = linalg::hermitian_eigen(h.as_ref()).unwrap();
            acc += e.iter().map(|x| x * x).sum::<f64>();
        }
        let m = acc / n as f64 / (dim * dim) as f64;
        // relative spread of tr H² is ~ 1/N
        assert!((m - 1.0).abs() < 0.02, "{m}");
    }

    #[test]
    fn cue_entries_have_haar_moments() {
        let dim = 8;
        let n = 4000;
        let mut first = c64::new(0.0, 0.0);
        let mut second = 0.0;
        for i in 0..n {
            let u = cue(dim, &mut stream_rng(21, i));
            first += u[(1, 2)];
            second += u[(1, 2)].norm_sqr();
        }
        let (first, second) = (first / n as f64, second / n as f64);
        // Var |U_ij|² = (N−1)/(N²(N+1)); sd of the mean ≈ 0.0017
        assert!(first.norm() < 4.0 / (n as f64 * dim as f64).sqrt());
        assert!((second - 1.0 / dim as f64).abs() < 0.008, "{second}");
    }

    #[test]
    fn sampling_is_seed_deterministic_and_order_free() {
        let spec = EnsembleSpec {
            kind: EnsembleKind::PoissonPhases,
            dim: 20,
            samples: 8,
            seed: 4,
        };
        let a = sample(&spec).unwrap();
        let b = sample(&spec).unwrap();
        for (x, y) in a.iter().zip(&b) {
            match (x, y) {
                (Sample::Phases(p), Sample::Phases(q)) => assert_eq!(p, q),
                _ => unreachable!(),
            }
        }
        let Sample::Phases(third) = &a[3] else { unreachable!() };
        assert_eq!(third, &poisson_phases(20, &mut stream_rng(4, 3)));
        assert!(sample(&EnsembleSpec { dim: 2, ..spec }).is_err());
    }

    #[test]
    fn inverse_cdf_samplers_hit_quantiles() {
        assert_eq!(sample_curvature_poisson(0.5), 0.0);
        assert!((sample_curvature_poisson(0.75) - 1.0).abs() < 1e-12);
        assert!(sample_curvature_gue(0.5).abs() < 1e-15);
        // GUE CDF at k = 1: ½ + (π/2 + 1)/(2π)
        let u = 0.5 + (PI / 2.0 + 1.0) / (2.0 * PI);
        assert!((sample_curvature_gue(u) - 1.0).abs() < 1e-10);
        for u in [1e-9, 0.1, 0.3, 0.9, 1.0 - 1e-9] {
            assert!((sample_curvature_gue(u) + sample_curvature_gue(1.0 - u)).abs() < 1e-6 * sample_curvature_gue(u).abs().max(1.0));
        }
    }

    #[test]
    fn poisson_mean_ratio_constant() {
        let o = oracle_expectations(None);
        assert!((o.mean_r_poisson - 0.386_294_361_119_890_6).abs() < 1e-15);
        assert_eq!(o.p_poi_at_zero, 2.0);
    }

    #[test]
    fn family_frames_are_sorted_with_matching_vectors() {
        let lambdas = [0.0, 0.1];
        let fam = parametric_gue(10, &lambdas, &mut stream_rng(1, 0));
        let frames = hermitian_family_frames(&lambdas, &fam, 0.2).unwrap();
        for (f, h) in frames.iter().zip(&fam) {
            assert!(f.phases.windows(2).all(|w| w[0] <= w[1]));
            for j in 0..10 {
                let v = faer::Col::from_fn(10, |i| f.eigenvectors[(i, j)]);
                let hv = linalg::apply(h.as_ref(), &v);
                let e = -f.phases[j] / 0.2;
                for i in 0..10 {
                    assert!((hv[i] - v[i] * e).norm() < 1e-10);
                }
            }
        }
        assert!(hermitian_family_frames(&lambdas, &fam, 10.0).is_err());
    }

    #[test]
    fn oracle_cache_round_trip() {
        let mut cache = OracleCache::default();
        let e = mean_r_cue_entry(12, 20, 1).unwrap();
        cache.insert(e.clone());
        cache.insert(e.clone());
        assert_eq!(cache.entries.len(), 1);
        let path = std::env::temp_dir().join(format!("oracle-{}.json", std::process::id()));
        cache.save(&path).unwrap();
        assert_eq!(OracleCache::load(&path).unwrap(), cache);
        std::fs::remove_file(path).ok();
        assert!(e.value > 0.4 && e.value < 0.8);
    }
}
