//! Eigenphases of U(t), spacing-ratio statistics, and their Kullback–Leibler
//! distance from the Poisson and GUE reference distributions.

use std::f64::consts::PI;

use faer::{Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64};
use crate::propagator::UnitarySeries;
use crate::quad::GaussLegendre;

/// Largest `max |U†U − I|` accepted by [`eigenphases`].
pub const UNITARITY_PRECONDITION: f64 = 1e-6;
/// Largest `||λ| − 1|` accepted before projecting onto the unit circle.
pub const UNIT_CIRCLE_TOL: f64 = 1e-8;
pub const DEFAULT_BINS: usize = 20;
pub const DEFAULT_WINDOWS: usize = 250;
const QUAD_POINTS: usize = 64;

/// Eigenphases of a unitary at one time, sorted ascending in [−π, π), with
/// eigenvectors as the matching columns.
#[derive(Clone, Debug)]
pub struct EigenphaseFrame {
    pub t: f64,
    pub phases: Vec<f64>,
    pub eigenvectors: Mat<c64>,
}

/// Principal argument mapped to [−π, π).
pub fn wrap_to_pi(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y >= PI {
        -PI
    } else {
        y
    }
}

fn phase_of(lambda: c64) -> Result<f64> {
    let m = lambda.norm();
    if !((m - 1.0).abs() < UNIT_CIRCLE_TOL) {
        return Err(Error::NotUnitary((m - 1.0).abs()));
    }
    let z = lambda / m;
    let phi = z.im.atan2(z.re);
    Ok(if phi >= PI { -PI } else { phi })
}

fn check_unitary(u: MatRef<'_, c64>) -> Result<()> {
    if u.nrows() != u.ncols() {
        return Err(Error::InvalidParams(format!("{}x{} matrix is not square", u.nrows(), u.ncols())));
    }
    let d = linalg::unitarity_defect(u);
    if !(d < UNITARITY_PRECONDITION) {
        return Err(Error::NotUnitary(d));
    }
    Ok(())
}

/// Full eigendecomposition. Eigenvectors are orthonormalized (closest
/// unitary to the eigenvector matrix) so that degenerate clusters come out
/// orthogonal.
pub fn eigenphases(u: MatRef<'_, c64>, t: f64) -> Result<EigenphaseFrame> {
    check_unitary(u)?;
    let evd = u.eigen().map_err(|e| Error::EigenFailure(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let n = u.nrows();
    let mut pairs = Vec::with_capacity(n);
    for k in 0..n {
        pairs.push((phase_of(s[k])?, k));
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let raw = evd.U();
    let sorted = Mat::from_fn(n, n, |i, j| raw[(i, pairs[j].1)]);
    let (vecs, smallest) = linalg::polar_unitary(sorted.as_ref())?;
    if !(smallest > 0.0) {
        return Err(Error::EigenFailure("eigenvectors are linearly dependent".into()));
    }
    Ok(EigenphaseFrame {
        t,
        phases: pairs.into_iter().map(|p| p.0).collect(),
        eigenvectors: vecs,
    })
}

/// Sorted eigenphases without eigenvectors.
pub fn eigenphases_only(u: MatRef<'_, c64>) -> Result<Vec<f64>> {
    check_unitary(u)?;
    let values = u.eigenvalues().map_err(|e| Error::EigenFailure(format!("{e:?}")))?;
    let mut phases = values.into_iter().map(phase_of).collect::<Result<Vec<_>>>()?;
    phases.sort_by(f64::total_cmp);
    Ok(phases)
}

/// Eigenphases for every checkpoint of a series, in parallel.
pub fn series_phases(series: &UnitarySeries) -> Result<Vec<Vec<f64>>> {
    series
        .unitaries
        .par_iter()
        .map(|u| eigenphases_only(u.as_ref()))
        .collect()
}

pub fn series_frames(series: &UnitarySeries) -> Result<Vec<EigenphaseFrame>> {
    series
        .times
        .par_iter()
        .zip(series.unitaries.par_iter())
        .map(|(&t, u)| eigenphases(u.as_ref(), t))
        .collect()
}

/// `R_n = min(r_n, 1/r_n)` values of one spectrum.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RatioSample {
    pub values: Vec<f64>,
    /// Ratios skipped because both neighbouring spacings were zero.
    pub dropped: usize,
}

impl RatioSample {
    fn from_spacings(spacings: impl Iterator<Item = (f64, f64)>) -> Self {
        let mut out = Self::default();
        for (a, b) in spacings {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            if hi == 0.0 {
                out.dropped += 1;
            } else {
                out.values.push(lo / hi);
            }
        }
        out
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Open-line ratios from sorted phases: N − 1 spacings give N − 2 ratios.
pub fn ratio_samples(phases: &[f64]) -> Result<RatioSample> {
    if phases.len() < 3 {
        return Err(Error::TooFewPhases(phases.len()));
    }
    let d: Vec<f64> = phases.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(RatioSample::from_spacings(d.windows(2).map(|w| (w[0], w[1]))))
}

/// Circular ratios: sorts the phases, closes the circle with the wrap-around
/// spacing, and returns N ratios. Invariant under a global phase.
pub fn ratio_samples_circular(phases: &[f64]) -> Result<RatioSample> {
    let n = phases.len();
    if n < 3 {
        return Err(Error::TooFewPhases(n));
    }
    let mut p: Vec<f64> = phases.iter().map(|&x| wrap_to_pi(x)).collect();
    p.sort_by(f64::total_cmp);
    let mut d: Vec<f64> = p.windows(2).map(|w| w[1] - w[0]).collect();
    d.push(p[0] + 2.0 * PI - p[n - 1]);
    Ok(RatioSample::from_spacings((0..n).map(|k| (d[k], d[(k + 1) % n]))))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Statistics {
    Poisson,
    Gue,
}

/// Folded ratio densities on [0, 1].
pub fn reference_density(kind: Statistics, r: f64) -> f64 {
    match kind {
        Statistics::Poisson => 2.0 / (1.0 + r).powi(2),
        Statistics::Gue => {
            let c = 162.0 * 3f64.sqrt() / (4.0 * PI);
            c * (r + r * r).powi(2) / (1.0 + r + r * r).powi(4)
        }
    }
}

/// Histogram on fixed edges with masses summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinnedDistribution {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
}

pub fn uniform_edges(bins: usize) -> Vec<f64> {
    (0..=bins).map(|k| k as f64 / bins as f64).collect()
}

impl BinnedDistribution {
    /// Relative frequencies of `samples` on `edges` (last bin closed).
    pub fn from_samples(samples: &[f64], edges: &[f64]) -> Result<Self> {
        let bins = edges.len().saturating_sub(1);
        if bins == 0 {
            return Err(Error::InvalidParams("need at least one bin".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidParams("no samples to bin".into()));
        }
        let mut counts = vec![0usize; bins];
        let (lo, hi) = (edges[0], edges[bins]);
        for &x in samples {
            if !(lo..=hi).contains(&x) {
                return Err(Error::SupportMismatch(format!("sample {x} outside [{lo}, {hi}]")));
            }
            let k = edges.partition_point(|&e| e <= x).clamp(1, bins) - 1;
            counts[k] += 1;
        }
        let total = samples.len() as f64;
        Ok(Self {
            edges: edges.to_vec(),
            masses: counts.into_iter().map(|c| c as f64 / total).collect(),
        })
    }

    /// Bin masses of a reference density, by Gauss–Legendre quadrature per bin.
    pub fn from_reference(kind: Statistics, edges: &[f64]) -> Self {
        let q = GaussLegendre::new(QUAD_POINTS);
        let raw: Vec<f64> = edges
            .windows(2)
            .map(|w| q.integrate(w[0], w[1], |r| reference_density(kind, r)))
            .collect();
        let total: f64 = raw.iter().sum();
        Self {
            edges: edges.to_vec(),
            masses: raw.into_iter().map(|m| m / total).collect(),
        }
    }
}

/// `Σ P1 log(P1 / P2)` with `0 log 0 = 0`.
pub fn kl_divergence(p1: &BinnedDistribution, p2: &BinnedDistribution) -> Result<f64> {
    if p1.edges != p2.edges {
        return Err(Error::SupportMismatch("bin edges differ".into()));
    }
    let mut d = 0.0;
    for (k, (&a, &b)) in p1.masses.iter().zip(&p2.masses).enumerate() {
        if a > 0.0 {
            if !(b > 0.0) {
                return Err(Error::SupportMismatch(format!(
                    "reference mass vanishes in bin {k} where the sample has mass {a}"
                )));
            }
            d += a * (a / b).ln();
        }
    }
    Ok(d)
}

/// KL distances scaled so that D(GUE|POI) = 1 and D(POI|GUE) = 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedKl {
    pub d_poi: f64,
    pub d_gue: f64,
    /// Set if a raw value exceeded its normalizer and was clamped to 1.
    pub clamped: bool,
}

/// Binned references and normalizers for one choice of bins.
#[derive(Clone, Debug)]
pub struct KlReference {
    pub poisson: BinnedDistribution,
    pub gue: BinnedDistribution,
    /// D(GUE | POI).
    pub norm_poi: f64,
    /// D(POI | GUE).
    pub norm_gue: f64,
}

impl KlReference {
    pub fn new(bins: usize) -> Self {
        Self::with_edges(&uniform_edges(bins))
    }

    pub fn with_edges(edges: &[f64]) -> Self {
        let poisson = BinnedDistribution::from_reference(Statistics::Poisson, edges);
        let gue = BinnedDistribution::from_reference(Statistics::Gue, edges);
        let norm_poi = kl_divergence(&gue, &poisson).expect("references share edges");
        let norm_gue = kl_divergence(&poisson, &gue).expect("GUE masses are positive");
        Self {
            poisson,
            gue,
            norm_poi,
            norm_gue,
        }
    }

    pub fn edges(&self) -> &[f64] {
        &self.poisson.edges
    }

    pub fn normalized(&self, p: &BinnedDistribution) -> Result<NormalizedKl> {
        let d_poi = kl_divergence(p, &self.poisson)? / self.norm_poi;
        let d_gue = kl_divergence(p, &self.gue)? / self.norm_gue;
        Ok(NormalizedKl {
            d_poi: d_poi.min(1.0),
            d_gue: d_gue.min(1.0),
            clamped: d_poi > 1.0 || d_gue > 1.0,
        })
    }

    pub fn from_ratios(&self, ratios: &[f64]) -> Result<NormalizedKl> {
        self.normalized(&BinnedDistribution::from_samples(ratios, self.edges())?)
    }
}

/// `(d_poi, d_gue)` of `p` against references binned on `p`'s own edges.
pub fn normalized_kl_pair(p: &BinnedDistribution) -> Result<NormalizedKl> {
    KlReference::with_edges(&p.edges).normalized(p)
}

/// Normalized KL per time window, reported at window midpoints.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KlSeries {
    pub t_mid: Vec<f64>,
    pub d_poi: Vec<f64>,
    pub d_gue: Vec<f64>,
    pub n_samples: Vec<usize>,
    pub clamped: Vec<bool>,
}

impl KlSeries {
    pub fn len(&self) -> usize {
        self.t_mid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_mid.is_empty()
    }
}

/// Window index of `t` among `n` equal windows on `[t0, t1]`; the last window
/// is closed on the right.
pub fn window_index(t: f64, t0: f64, t1: f64, n: usize) -> Option<usize> {
    if t < t0 || t > t1 {
        return None;
    }
    let w = ((t - t0) / (t1 - t0) * n as f64).floor() as usize;
    Some(w.min(n - 1))
}

/// Pools all ratios of the checkpoints inside each window into one
/// distribution and compares it with the references.
pub fn windowed_kl_from_phases(
    times: &[f64],
    phases: &[Vec<f64>],
    n_windows: usize,
    reference: &KlReference,
) -> Result<KlSeries> {
    if times.len() != phases.len() || times.is_empty() {
        return Err(Error::InvalidParams("need one phase list per checkpoint".into()));
    }
    if n_windows == 0 {
        return Err(Error::InvalidParams("need at least one window".into()));
    }
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let width = (t1 - t0) / n_windows as f64;
    let mut pooled: Vec<Vec<f64>> = vec![Vec::new(); n_windows];
    let mut hits = vec![0usize; n_windows];
    for (&t, p) in times.iter().zip(phases) {
        let w = window_index(t, t0, t1, n_windows).expect("time within span");
        hits[w] += 1;
        pooled[w].extend(ratio_samples(p)?.values);
    }
    let mut out = KlSeries::default();
    for (w, ratios) in pooled.iter().enumerate() {
        let lo = t0 + w as f64 * width;
        if hits[w] == 0 || ratios.is_empty() {
            return Err(Error::EmptyWindow {
                index: w,
                t_lo: lo,
                t_hi: lo + width,
            });
        }
        let kl = reference.from_ratios(ratios)?;
        out.t_mid.push(lo + 0.5 * width);
        out.d_poi.push(kl.d_poi);
        out.d_gue.push(kl.d_gue);
        out.n_samples.push(ratios.len());
        out.clamped.push(kl.clamped);
    }
    Ok(out)
}

pub fn windowed_kl(series: &UnitarySeries, n_windows: usize, bins: usize) -> Result<KlSeries> {
    let phases = series_phases(series)?;
    windowed_kl_from_phases(&series.times, &phases, n_windows, &KlReference::new(bins))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(values: &[c64]) -> Mat<c64> {
        let n = values.len();
        Mat::from_fn(n, n, |i, j| if i == j { values[i] } else { linalg::ZERO })
    }

    #[test]
    fn identity_has_zero_phases() {
        let f = eigenphases(Mat::<c64>::identity(5, 5).as_ref(), 0.0).unwrap();
        assert!(f.phases.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn principal_arguments_sorted() {
        let u = diag(&[c64::new(1.0, 0.0), c64::new(0.0, 1.0), c64::new(-1.0, 0.0)]);
        let f = eigenphases(u.as_ref(), 0.0).unwrap();
        let expected = [-PI, 0.0, PI / 2.0];
        for (a, b) in f.phases.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15, "{:?}", f.phases);
        }
        // eigenvector of −1 is e_2
        assert!((f.eigenvectors[(2, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_unitary() {
        let u = diag(&[c64::new(1.0, 0.0), c64::new(1.1, 0.0), c64::new(1.0, 0.0)]);
        assert!(matches!(eigenphases(u.as_ref(), 0.0), Err(Error::NotUnitary(_))));
        assert!(matches!(eigenphases_only(u.as_ref()), Err(Error::NotUnitary(_))));
    }

    #[test]
    fn exponential_of_hermitian_matches_its_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 30;
        let mut h = Mat::<c64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let z = if i == j {
                    c64::new(rng.random_range(-1.0..1.0), 0.0)
                } else {
                    c64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                };
                h[(i, j)] = z;
                h[(j, i)] = z.conj();
            }
        }
        let (e, v) = linalg::hermitian_eigen(h.as_ref()).unwrap();
        let emax = e.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let scale = 3.0 / emax;
        let phases: Vec<c64> = e.iter().map(|x| c64::from_polar(1.0, -scale * x)).collect();
        let u = linalg::reconstruct(v.as_ref(), &phases);
        let f = eigenphases(u.as_ref(), 0.0).unwrap();
        let mut expected: Vec<f64> = e.iter().map(|x| -scale * x).collect();
        expected.sort_by(f64::total_cmp);
        for (a, b) in f.phases.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(linalg::unitarity_defect(f.eigenvectors.as_ref()) < 1e-8);
        let lam: Vec<c64> = f.phases.iter().map(|&p| c64::from_polar(1.0, p)).collect();
        let back = linalg::reconstruct(f.eigenvectors.as_ref(), &lam);
        assert!(linalg::max_abs((back - u).as_ref()) < 1e-8);
        let only = eigenphases_only(linalg::reconstruct(v.as_ref(), &phases).as_ref()).unwrap();
        for (a, b) in only.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn equal_spacing_gives_unit_ratios() {
        let p: Vec<f64> = (0..10).map(|k| -3.0 + 0.5 * k as f64).collect();
        let r = ratio_samples(&p).unwrap();
        assert_eq!(r.values.len(), 8);
        assert!(r.values.iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn ratio_formula() {
        let r = ratio_samples(&[0.0, 1.0, 3.0, 7.0]).unwrap();
        assert_eq!(r.values, vec![0.5, 0.5]);
        assert!(matches!(ratio_samples(&[0.0, 1.0]), Err(Error::TooFewPhases(2))));
    }

    #[test]
    fn zero_spacings() {
        let r = ratio_samples(&[0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        // spacings (0, 1, 0, 0): ratios 0, 0, dropped
        assert_eq!(r.values, vec![0.0, 0.0]);
        assert_eq!(r.dropped, 1);
    }

    #[test]
    fn circular_ratios_ignore_global_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p: Vec<f64> = (0..40).map(|_| rng.random_range(-PI..PI)).collect();
        let sorted = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            v
        };
        let base = sorted(ratio_samples_circular(&p).unwrap().values);
        for theta in [0.3, 1.7, -2.9] {
            let q: Vec<f64> = p.iter().map(|x| wrap_to_pi(x + theta)).collect();
            let r = sorted(ratio_samples_circular(&q).unwrap().values);
            for (a, b) in base.iter().zip(&r) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn reference_values() {
        assert_eq!(reference_density(Statistics::Poisson, 0.0), 2.0);
        assert_eq!(reference_density(Statistics::Poisson, 1.0), 0.5);
        assert_eq!(reference_density(Statistics::Gue, 0.0), 0.0);
        let q = GaussLegendre::new(64);
        for kind in [Statistics::Poisson, Statistics::Gue] {
            let total = q.integrate(0.0, 0.5, |r| reference_density(kind, r))
                + q.integrate(0.5, 1.0, |r| reference_density(kind, r));
            assert!((total - 1.0).abs() < 1e-8, "{kind:?}: {total}");
        }
    }

    #[test]
    fn kl_basics() {
        let e = vec![0.0, 0.5, 1.0];
        let p1 = BinnedDistribution { edges: e.clone(), masses: vec![1.0, 0.0] };
        let p2 = BinnedDistribution { edges: e.clone(), masses: vec![0.5, 0.5] };
        assert_eq!(kl_divergence(&p1, &p1).unwrap(), 0.0);
        assert!((kl_divergence(&p1, &p2).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert!(matches!(kl_divergence(&p2, &p1), Err(Error::SupportMismatch(_))));
        let p3 = BinnedDistribution { edges: vec![0.0, 0.4, 1.0], masses: vec![0.5, 0.5] };
        assert!(matches!(kl_divergence(&p2, &p3), Err(Error::SupportMismatch(_))));
    }

    #[test]
    fn normalization_of_references() {
        let r = KlReference::new(DEFAULT_BINS);
        for b in [&r.poisson, &r.gue] {
            assert!((b.masses.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(b.masses.iter().all(|&m| m > 0.0));
        }
        let g = r.normalized(&r.gue).unwrap();
        assert!((g.d_poi - 1.0).abs() < 1e-12 && g.d_gue.abs() < 1e-15);
        let p = normalized_kl_pair(&r.poisson).unwrap();
        assert!(p.d_poi.abs() < 1e-15 && (p.d_gue - 1.0).abs() < 1e-12);
    }

    #[test]
    fn binning_closes_last_bin() {
        let b = BinnedDistribution::from_samples(&[0.0, 0.25, 1.0, 1.0], &uniform_edges(2)).unwrap();
        assert_eq!(b.masses, vec![0.5, 0.5]);
        assert!(BinnedDistribution::from_samples(&[1.5], &uniform_edges(2)).is_err());
    }

    #[test]
    fn window_assignment() {
        assert_eq!(window_index(0.0, 0.0, 1.0, 4), Some(0));
        assert_eq!(window_index(0.25, 0.0, 1.0, 4), Some(1));
        assert_eq!(window_index(1.0, 0.0, 1.0, 4), Some(3));
        assert_eq!(window_index(1.1, 0.0, 1.0, 4), None);
    }

    #[test]
    fn frozen_series_gives_identical_windows() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut p: Vec<f64> = (0..60).map(|_| rng.random_range(-PI..PI)).collect();
        p.sort_by(f64::total_cmp);
        let times: Vec<f64> = (0..=40).map(|k| k as f64 * 0.1).collect();
        let phases = vec![p.clone(); times.len()];
        let r = KlReference::new(DEFAULT_BINS);
        let kl = windowed_kl_from_phases(&times, &phases, 5, &r).unwrap();
        assert_eq!(kl.len(), 5);
        // the last window holds one extra (closing) checkpoint with identical
        // phases, so its histogram is identical too
        for w in 1..5 {
            assert_eq!(kl.d_poi[w], kl.d_poi[0]);
            assert_eq!(kl.d_gue[w], kl.d_gue[0]);
        }
        let one = windowed_kl_from_phases(&times, &phases, 1, &r).unwrap();
        let direct = r.from_ratios(&ratio_samples(&p).unwrap().values).unwrap();
        assert_eq!(one.d_poi[0], direct.d_poi);
        assert!((one.t_mid[0] - 2.0).abs() < 1e-15);
        assert!(matches!(
            windowed_kl_from_phases(&times, &phases, 100, &r),
            Err(Error::EmptyWindow { .. })
        ));
    }
}
