//! Continuous eigenphase tracks, their velocities and curvatures, the
//! dimensionless rescaled curvature `k = κΔ / (2π Var(v))`, and power-law
//! tail fits.

use std::f64::consts::PI;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64};
use crate::quad::GaussLegendre;
use crate::spectral::{self, wrap_to_pi, EigenphaseFrame, KlReference};

pub const DEFAULT_MATCH_THRESHOLD: f64 = 0.5;
pub const DEFAULT_K_MIN: f64 = 3.0;
pub const DEFAULT_SEGMENT_NS: f64 = 0.5;
pub const TAIL_BINS_PER_DECADE: f64 = 20.0;
pub const MIN_BIN_COUNT: usize = 5;
pub const MIN_FIT_BINS: usize = 10;

/// One eigenphase followed continuously through time.
///
/// The unwrapped phase at step `j` is `raw[j] + 2π·winding[j]`, where `raw` is
/// the value from the sorted frame, so folding is exact.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseTrajectory {
    pub track_id: usize,
    /// Column of the frame's eigenvector matrix at each step.
    pub columns: Vec<usize>,
    pub raw: Vec<f64>,
    pub winding: Vec<i64>,
}

impl PhaseTrajectory {
    pub fn unwrapped(&self) -> Vec<f64> {
        self.raw
            .iter()
            .zip(&self.winding)
            .map(|(r, w)| r + 2.0 * PI * *w as f64)
            .collect()
    }

    pub fn folded(&self, step: usize) -> f64 {
        self.raw[step]
    }
}

/// Tracks plus the raw sorted phases and times they were built from.
#[derive(Clone, Debug, Default)]
pub struct TrackedSpectrum {
    pub times: Vec<f64>,
    pub frame_phases: Vec<Vec<f64>>,
    pub tracks: Vec<PhaseTrajectory>,
    /// Smallest matched overlap seen over all steps.
    pub min_overlap: f64,
    /// Number of steps that needed the global assignment.
    pub global_assignments: usize,
}

/// Streaming tracker: only the previous frame's eigenvectors are kept.
#[derive(Debug)]
pub struct PhaseTracker {
    threshold: f64,
    prev: Option<Mat<c64>>,
    out: TrackedSpectrum,
}

impl PhaseTracker {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            prev: None,
            out: TrackedSpectrum {
                min_overlap: 1.0,
                ..Default::default()
            },
        }
    }

    pub fn push(&mut self, frame: EigenphaseFrame) -> Result<()> {
        let n = frame.phases.len();
        match &self.prev {
            None => {
                self.out.tracks = (0..n)
                    .map(|j| PhaseTrajectory {
                        track_id: j,
                        columns: vec![j],
                        raw: vec![frame.phases[j]],
                        winding: vec![0],
                    })
                    .collect();
            }
            Some(prev) => {
                if prev.ncols() != n {
                    return Err(Error::InvalidParams(format!(
                        "frame at t = {} has {n} phases, previous had {}",
                        frame.t,
                        prev.ncols()
                    )));
                }
                let overlap = linalg::mul(prev.adjoint(), frame.eigenvectors.as_ref());
                let mag = Mat::from_fn(n, n, |i, j| overlap[(i, j)].norm());
                let (perm, global) = match_columns(&mag);
                if global {
                    self.out.global_assignments += 1;
                }
                for track in &mut self.out.tracks {
                    let from = *track.columns.last().expect("tracks start non-empty");
                    let to = perm[from];
                    let o = mag[(from, to)];
                    self.out.min_overlap = self.out.min_overlap.min(o);
                    if !(o >= self.threshold) {
                        return Err(Error::AmbiguousMatch {
                            t: frame.t,
                            overlap: o,
                            threshold: self.threshold,
                        });
                    }
                    let prev_raw = *track.raw.last().expect("non-empty");
                    let prev_unwrapped = prev_raw + 2.0 * PI * *track.winding.last().expect("non-empty") as f64;
                    let target = prev_unwrapped + wrap_to_pi(frame.phases[to] - prev_raw);
                    let w = ((target - frame.phases[to]) / (2.0 * PI)).round() as i64;
                    track.columns.push(to);
                    track.raw.push(frame.phases[to]);
                    track.winding.push(w);
                }
            }
        }
        self.out.times.push(frame.t);
        self.out.frame_phases.push(frame.phases);
        self.prev = Some(frame.eigenvectors);
        Ok(())
    }

    pub fn finish(self) -> TrackedSpectrum {
        self.out
    }
}

/// Greedy row-wise argmax; if that is not a permutation, the assignment that
/// maximizes the total overlap magnitude. Returns the permutation and whether
/// the global step was needed.
pub fn match_columns(mag: &Mat<f64>) -> (Vec<usize>, bool) {
    let n = mag.nrows();
    let greedy: Vec<usize> = (0..n)
        .map(|i| {
            (0..n)
                .max_by(|&a, &b| mag[(i, a)].total_cmp(&mag[(i, b)]))
                .expect("non-empty")
        })
        .collect();
    let mut seen = vec![false; n];
    if greedy.iter().all(|&j| !std::mem::replace(&mut seen[j], true)) {
        return (greedy, false);
    }
    let cost = Mat::from_fn(n, n, |i, j| -mag[(i, j)]);
    (hungarian(&cost), true)
}

/// Minimum-cost perfect assignment on a square cost matrix (Kuhn–Munkres with
/// potentials, O(n³)). Returns `row → column`.
pub fn hungarian(cost: &Mat<f64>) -> Vec<usize> {
    let n = cost.nrows();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
    }
    row_to_col
}

pub fn track_phases(frames: Vec<EigenphaseFrame>, threshold: f64) -> Result<TrackedSpectrum> {
    if frames.len() < 3 {
        return Err(Error::TooShort(frames.len()));
    }
    let mut tracker = PhaseTracker::new(threshold);
    for f in frames {
        tracker.push(f)?;
    }
    Ok(tracker.finish())
}

/// Central differences at interior points:
/// `v_k = (φ_{k+1} − φ_{k−1}) / 2dt`, `κ_k = (φ_{k+1} − 2φ_k + φ_{k−1}) / dt²`.
pub fn derivatives(phases: &[f64], dt: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if phases.len() < 3 {
        return Err(Error::TooShort(phases.len()));
    }
    let v = phases.windows(3).map(|w| (w[2] - w[0]) / (2.0 * dt)).collect();
    let k = phases
        .windows(3)
        .map(|w| (w[2] - 2.0 * w[1] + w[0]) / (dt * dt))
        .collect();
    Ok((v, k))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    /// One velocity variance over all tracks in the segment.
    #[default]
    Pooled,
    /// Each track rescaled by the variance of its own velocity.
    PerTrack,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSample {
    pub t: f64,
    pub track_id: usize,
    pub kappa: f64,
    pub k: f64,
}

/// Velocities and curvatures of every track at interior steps.
#[derive(Clone, Debug)]
pub struct Kinematics {
    pub times: Vec<f64>,
    /// `velocity[track][j]` at `times[j]`.
    pub velocity: Vec<Vec<f64>>,
    pub kappa: Vec<Vec<f64>>,
}

/// Requires uniformly spaced frame times.
pub fn kinematics(spectrum: &TrackedSpectrum) -> Result<Kinematics> {
    let t = &spectrum.times;
    if t.len() < 3 {
        return Err(Error::TooShort(t.len()));
    }
    let dt = t[1] - t[0];
    for w in t.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.abs() {
            return Err(Error::InvalidParams(format!(
                "frame times are not uniform: step {} vs {dt}",
                w[1] - w[0]
            )));
        }
    }
    let mut velocity = Vec::with_capacity(spectrum.tracks.len());
    let mut kappa = Vec::with_capacity(spectrum.tracks.len());
    for track in &spectrum.tracks {
        let (v, k) = derivatives(&track.unwrapped(), dt)?;
        velocity.push(v);
        kappa.push(k);
    }
    Ok(Kinematics {
        times: t[1..t.len() - 1].to_vec(),
        velocity,
        kappa,
    })
}

fn variance(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (mut n, mut s) = (0.0, 0.0);
    for x in xs.clone() {
        n += 1.0;
        s += x;
    }
    let mean = s / n;
    let var = xs.clone().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let msq = xs.map(|x| x * x).sum::<f64>() / n;
    (var, msq)
}

/// Mean open-line spacing `(φ_max − φ_min)/(N − 1)` of one sorted frame.
pub fn mean_spacing(phases: &[f64]) -> f64 {
    (phases[phases.len() - 1] - phases[0]) / (phases.len() - 1) as f64
}

/// Rescaled curvatures for the interior steps `steps` (indices into
/// `kin.times`). Δ is the mean spacing averaged over the matching frames.
pub fn rescale(
    spectrum: &TrackedSpectrum,
    kin: &Kinematics,
    steps: std::ops::Range<usize>,
    mode: VarianceMode,
) -> Result<Vec<CurvatureSample>> {
    let n_tracks = kin.velocity.len();
    if n_tracks < 2 || steps.len() < 3 {
        return Err(Error::DegenerateSegment(format!(
            "need at least 2 tracks and 3 time points, got {n_tracks} and {}",
            steps.len()
        )));
    }
    // interior step j corresponds to frame j + 1
    let delta = steps
        .clone()
        .map(|j| mean_spacing(&spectrum.frame_phases[j + 1]))
        .sum::<f64>()
        / steps.len() as f64;
    let degenerate = |var: f64, msq: f64| !(var > 1e-20 * msq.max(f64::MIN_POSITIVE));
    let pooled = match mode {
        VarianceMode::Pooled => {
            let all = kin.velocity.iter().flat_map(|v| v[steps.clone()].iter().copied());
            let (var, msq) = variance(all);
            if degenerate(var, msq) {
                return Err(Error::DegenerateSegment(format!("velocity variance {var:e} vanishes")));
            }
            Some(var)
        }
        VarianceMode::PerTrack => None,
    };
    let mut out = Vec::with_capacity(n_tracks * steps.len());
    for (id, (v, kap)) in kin.velocity.iter().zip(&kin.kappa).enumerate() {
        let var = match pooled {
            Some(var) => var,
            None => {
                let (var, msq) = variance(v[steps.clone()].iter().copied());
                if degenerate(var, msq) {
                    return Err(Error::DegenerateSegment(format!(
                        "track {id} has vanishing velocity variance {var:e}"
                    )));
                }
                var
            }
        };
        for j in steps.clone() {
            out.push(CurvatureSample {
                t: kin.times[j],
                track_id: spectrum.tracks[id].track_id,
                kappa: kap[j],
                k: kap[j] * delta / (2.0 * PI * var),
            });
        }
    }
    Ok(out)
}

/// `P_POI(k) = (1/π)/(1 + k²)`, `P_GUE(k) = (2/π)/(1 + k²)²`.
pub fn reference_curvature_density(kind: spectral::Statistics, k: f64) -> f64 {
    let q = 1.0 + k * k;
    match kind {
        spectral::Statistics::Poisson => 1.0 / (PI * q),
        spectral::Statistics::Gue => 2.0 / (PI * q * q),
    }
}

/// Log-spaced histogram of `|k|` above `k_min`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailHistogram {
    pub k_min: f64,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub density: Vec<f64>,
    /// `true` for exact (noise-free) densities.
    pub exact: bool,
}

fn log_edges(k_min: f64, k_max: f64, per_decade: f64) -> Vec<f64> {
    let decades = (k_max / k_min).log10();
    let n = (decades * per_decade).ceil().max(1.0) as usize;
    (0..=n)
        .map(|i| k_min * 10f64.powf(i as f64 / per_decade))
        .collect()
}

impl TailHistogram {
    pub fn from_samples(samples: &[f64], k_min: f64) -> Self {
        let abs: Vec<f64> = samples.iter().map(|k| k.abs()).filter(|k| k.is_finite()).collect();
        let k_max = abs.iter().copied().fold(k_min, f64::max) * 1.000_001;
        let edges = log_edges(k_min, k_max, TAIL_BINS_PER_DECADE);
        let mut counts = vec![0usize; edges.len() - 1];
        for &k in &abs {
            if k >= k_min {
                let i = edges.partition_point(|&e| e <= k).clamp(1, counts.len()) - 1;
                counts[i] += 1;
            }
        }
        let total = abs.len().max(1) as f64;
        let density = counts
            .iter()
            .zip(edges.windows(2))
            .map(|(&c, w)| c as f64 / (total * (w[1] - w[0])))
            .collect();
        Self {
            k_min,
            edges,
            counts,
            density,
            exact: false,
        }
    }

    /// Bin-averaged values of a known density on `[k_min, k_max]`.
    pub fn from_density(f: impl Fn(f64) -> f64, k_min: f64, k_max: f64) -> Self {
        let edges = log_edges(k_min, k_max, TAIL_BINS_PER_DECADE);
        let q = GaussLegendre::new(32);
        let density = edges
            .windows(2)
            .map(|w| q.integrate(w[0], w[1], &f) / (w[1] - w[0]))
            .collect();
        Self {
            k_min,
            counts: vec![usize::MAX; edges.len() - 1],
            edges,
            density,
            exact: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub beta_tilde: f64,
    pub k_min: f64,
    pub stderr: f64,
    pub bins_used: usize,
}

/// Least-squares slope of `log density` against `log k` (geometric bin
/// centres) over bins with at least [`MIN_BIN_COUNT`] samples. Sampled bins
/// are weighted by their counts (inverse Poisson variance of the log).
pub fn tail_fit(hist: &TailHistogram) -> Result<TailFit> {
    let mut pts = Vec::new();
    for (i, w) in hist.edges.windows(2).enumerate() {
        if hist.counts[i] >= MIN_BIN_COUNT && hist.density[i] > 0.0 {
            let weight = if hist.exact { 1.0 } else { hist.counts[i] as f64 };
            pts.push(((w[0] * w[1]).sqrt().ln(), hist.density[i].ln(), weight));
        }
    }
    if pts.len() < MIN_FIT_BINS {
        return Err(Error::InsufficientTail {
            populated: pts.len(),
            required: MIN_FIT_BINS,
            k_min: hist.k_min,
        });
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let resid: f64 = pts
        .iter()
        .map(|p| p.2 * (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    let dof = (pts.len() - 2) as f64;
    let stderr = (resid / dof / sxx).sqrt();
    Ok(TailFit {
        beta_tilde: -slope,
        k_min: hist.k_min,
        stderr,
        bins_used: pts.len(),
    })
}

/// Histogram edges for reported `|k|` distributions:
/// `[0, 1e-6, …, 1e4 (10 per decade), ∞]`.
pub fn report_edges() -> Vec<f64> {
    let mut e = vec![0.0];
    e.extend((0..=100).map(|i| 10f64.powf(-6.0 + i as f64 / 10.0)));
    e.push(f64::INFINITY);
    e
}

/// Relative frequencies of `|k|` on [`report_edges`].
pub fn report_histogram(samples: &[CurvatureSample]) -> Vec<(f64, f64, f64)> {
    let edges = report_edges();
    let mut counts = vec![0usize; edges.len() - 1];
    for s in samples {
        let a = s.k.abs();
        let i = edges.partition_point(|&e| e <= a).clamp(1, counts.len()) - 1;
        counts[i] += 1;
    }
    let total = samples.len().max(1) as f64;
    edges
        .windows(2)
        .zip(counts)
        .map(|(w, c)| (w[0], w[1], c as f64 / total))
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SegmentResult {
    pub index: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    pub n_samples: usize,
    /// `(bin_lo, bin_hi, mass)` on [`report_edges`].
    pub histogram: Vec<(f64, f64, f64)>,
    pub tail: Option<TailFit>,
    /// Why the tail fit was skipped, if it was.
    pub tail_error: Option<String>,
    pub d_poi: f64,
    pub d_gue: f64,
    pub max_abs_kappa: f64,
    #[serde(skip)]
    pub samples: Vec<CurvatureSample>,
}

#[derive(Clone, Copy, Debug)]
pub struct SegmentOptions {
    pub segment_len: f64,
    pub k_min: f64,
    pub variance: VarianceMode,
    pub bins: usize,
    /// Interval to tile; defaults to the first and last tracked frame.
    pub span: Option<(f64, f64)>,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        Self {
            segment_len: DEFAULT_SEGMENT_NS,
            k_min: DEFAULT_K_MIN,
            variance: VarianceMode::Pooled,
            bins: spectral::DEFAULT_BINS,
            span: None,
        }
    }
}

/// Splits the tracked span into equal segments, rescales curvatures within
/// each, fits the tail, and tags each with the KL divergences of the ratios
/// of the frames inside it.
pub fn segment_analysis(spectrum: &TrackedSpectrum, opts: &SegmentOptions) -> Result<Vec<SegmentResult>> {
    let kin = kinematics(spectrum)?;
    let (t0, t1) = opts
        .span
        .unwrap_or((spectrum.times[0], *spectrum.times.last().expect("non-empty")));
    let span = t1 - t0;
    let n = (span / opts.segment_len).round() as usize;
    if n == 0 || (n as f64 * opts.segment_len - span).abs() > 1e-9 * span {
        return Err(Error::InvalidParams(format!(
            "span {span} ns is not a whole number of {} ns segments",
            opts.segment_len
        )));
    }
    let reference = KlReference::new(opts.bins);
    let mut out = Vec::with_capacity(n);
    for s in 0..n {
        let lo = t0 + s as f64 * opts.segment_len;
        let hi = if s + 1 == n { t1 } else { lo + opts.segment_len };
        let steps_in: Vec<usize> = (0..kin.times.len())
            .filter(|&j| spectral::window_index(kin.times[j], t0, t1, n) == Some(s))
            .collect();
        let range = match (steps_in.first(), steps_in.last()) {
            (Some(&a), Some(&b)) => a..b + 1,
            _ => 0..0,
        };
        let samples = rescale(spectrum, &kin, range, opts.variance)?;
        let ks: Vec<f64> = samples.iter().map(|c| c.k).collect();
        let (tail, tail_error) = match tail_fit(&TailHistogram::from_samples(&ks, opts.k_min)) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let mut ratios = Vec::new();
        for (t, p) in spectrum.times.iter().zip(&spectrum.frame_phases) {
            if spectral::window_index(*t, t0, t1, n) == Some(s) {
                ratios.extend(spectral::ratio_samples(p)?.values);
            }
        }
        let kl = reference.from_ratios(&ratios)?;
        out.push(SegmentResult {
            index: s,
            t_lo: lo,
            t_hi: hi,
            n_samples: samples.len(),
            histogram: report_histogram(&samples),
            tail,
            tail_error,
            d_poi: kl.d_poi,
            d_gue: kl.d_gue,
            max_abs_kappa: samples.iter().fold(0.0, |m, c| m.max(c.kappa.abs())),
            samples,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ZERO;
    use crate::rmt;
    use crate::spectral::Statistics;

    fn diag_frames(times: &[f64], phase_fns: &[&dyn Fn(f64) -> f64]) -> Vec<EigenphaseFrame> {
        let n = phase_fns.len();
        times
            .iter()
            .map(|&t| {
                let mut pairs: Vec<(f64, usize)> =
                    phase_fns.iter().enumerate().map(|(i, f)| (wrap_to_pi(f(t)), i)).collect();
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
                let vecs = Mat::from_fn(n, n, |i, j| if i == pairs[j].1 { c64::new(1.0, 0.0) } else { ZERO });
                EigenphaseFrame {
                    t,
                    phases: pairs.iter().map(|p| p.0).collect(),
                    eigenvectors: vecs,
                }
            })
            .collect()
    }

    #[test]
    fn hungarian_finds_optimum() {
        let cost = Mat::from_fn(3, 3, |i, j| [[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]][i][j]);
        assert_eq!(hungarian(&cost), vec![1, 0, 2]);
    }

    #[test]
    fn greedy_conflict_uses_global_assignment() {
        let mag = Mat::from_fn(2, 2, |i, j| [[0.9, 0.4], [0.8, 0.6]][i][j]);
        let (perm, global) = match_columns(&mag);
        assert!(global);
        assert_eq!(perm, vec![0, 1]);
    }

    #[test]
    fn straight_lines_through_wraps() {
        let slopes = [-2.0, -0.7, 0.4, 1.9];
        let fns: Vec<Box<dyn Fn(f64) -> f64>> = slopes
            .iter()
            .enumerate()
            .map(|(i, &s)| Box::new(move |t: f64| s * t + i as f64) as Box<dyn Fn(f64) -> f64>)
            .collect();
        let refs: Vec<&dyn Fn(f64) -> f64> = fns.iter().map(|b| b.as_ref()).collect();
        let times: Vec<f64> = (0..400).map(|k| k as f64 * 0.01).collect();
        let frames = diag_frames(&times, &refs);
        let spec = track_phases(frames.clone(), DEFAULT_MATCH_THRESHOLD).unwrap();
        let kin = kinematics(&spec).unwrap();
        for track in &spec.tracks {
            let id = frames[0].eigenvectors.col(track.columns[0]).iter().position(|z| z.re == 1.0).unwrap();
            let v = &kin.velocity[track.track_id];
            assert!(v.iter().all(|x| (x - slopes[id]).abs() < 1e-8));
            assert!(kin.kappa[track.track_id].iter().all(|k| k.abs() < 1e-8));
        }
        // folding and sorting reproduces the frames bit-for-bit
        for (step, f) in frames.iter().enumerate() {
            let mut folded: Vec<f64> = spec.tracks.iter().map(|t| t.folded(step)).collect();
            folded.sort_by(f64::total_cmp);
            assert_eq!(folded, f.phases);
        }
    }

    #[test]
    fn crossing_lines_keep_their_identity() {
        let f1 = |t: f64| 0.5 * t;
        let f2 = |t: f64| -0.5 * t;
        let times: Vec<f64> = (0..21).map(|k| -1.0 + k as f64 * 0.1).collect();
        let spec = track_phases(diag_frames(&times, &[&f1, &f2]), 0.5).unwrap();
        let kin = kinematics(&spec).unwrap();
        for v in &kin.velocity {
            assert!(v.iter().all(|x| (x - v[0]).abs() < 1e-12));
        }
        assert!((kin.velocity[0][0].abs() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identical_frames_give_constant_tracks() {
        let f = |_t: f64| 0.3;
        let g = |_t: f64| -1.2;
        let times = [0.0, 0.1, 0.2, 0.3];
        let spec = track_phases(diag_frames(&times, &[&f, &g]), 0.5).unwrap();
        for t in &spec.tracks {
            assert!(t.unwrapped().windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn ambiguous_match_is_reported() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let a = EigenphaseFrame {
            t: 0.0,
            phases: vec![0.0, 1.0],
            eigenvectors: Mat::<c64>::identity(2, 2),
        };
        let rotated = Mat::from_fn(2, 2, |i, j| c64::new(if i == 1 && j == 0 { -s } else { s }, 0.0));
        let b = EigenphaseFrame {
            t: 0.1,
            phases: vec![0.0, 1.0],
            eigenvectors: rotated,
        };
        let mut tr = PhaseTracker::new(0.75);
        tr.push(a).unwrap();
        assert!(matches!(tr.push(b), Err(Error::AmbiguousMatch { .. })));
    }

    #[test]
    fn finite_differences() {
        let (v, k) = derivatives(&[1.0, 3.0, 5.0, 7.0], 0.5).unwrap();
        assert_eq!(v, vec![4.0, 4.0]);
        assert_eq!(k, vec![0.0, 0.0]);
        let q: Vec<f64> = (0..6).map(|i| (i as f64 * 0.25).powi(2)).collect();
        let (_, k) = derivatives(&q, 0.25).unwrap();
        assert!(k.iter().all(|x| (x - 2.0).abs() < 1e-12));
        let dt = 1e-2;
        let s: Vec<f64> = (0..700).map(|i| (i as f64 * dt).sin()).collect();
        let (_, k) = derivatives(&s, dt).unwrap();
        for (j, kk) in k.iter().enumerate() {
            let t = (j + 1) as f64 * dt;
            assert!((kk + t.sin()).abs() < 1e-4);
        }
        assert!(matches!(derivatives(&[0.0, 1.0], 0.1), Err(Error::TooShort(2))));
    }

    fn quadratic_spectrum(scale_t: f64) -> TrackedSpectrum {
        let times: Vec<f64> = (0..30).map(|k| k as f64 * 0.02 * scale_t).collect();
        let tracks: Vec<PhaseTrajectory> = (0..4)
            .map(|i| {
                let raw: Vec<f64> = times
                    .iter()
                    .map(|&t| {
                        let s = t / scale_t;
                        -1.0 + 0.6 * i as f64 + (0.2 + 0.1 * i as f64) * s + 0.3 * (i as f64 - 1.5) * s * s
                    })
                    .collect();
                PhaseTrajectory {
                    track_id: i,
                    columns: vec![i; times.len()],
                    winding: vec![0; times.len()],
                    raw,
                }
            })
            .collect();
        let frame_phases = (0..times.len())
            .map(|k| {
                let mut p: Vec<f64> = tracks.iter().map(|t| t.raw[k]).collect();
                p.sort_by(f64::total_cmp);
                p
            })
            .collect();
        TrackedSpectrum {
            times,
            frame_phases,
            tracks,
            min_overlap: 1.0,
            global_assignments: 0,
        }
    }

    #[test]
    fn rescaled_curvature_is_invariant_under_time_scaling() {
        for mode in [VarianceMode::Pooled, VarianceMode::PerTrack] {
            let a = quadratic_spectrum(1.0);
            let b = quadratic_spectrum(2.0);
            let ka = rescale(&a, &kinematics(&a).unwrap(), 0..28, mode).unwrap();
            let kb = rescale(&b, &kinematics(&b).unwrap(), 0..28, mode).unwrap();
            for (x, y) in ka.iter().zip(&kb) {
                assert!((x.k - y.k).abs() < 1e-10 * x.k.abs().max(1.0));
                assert!((x.kappa - 4.0 * y.kappa).abs() < 1e-9 * x.kappa.abs().max(1.0));
            }
        }
    }

    #[test]
    fn equal_velocities_are_degenerate() {
        let mut s = quadratic_spectrum(1.0);
        for (i, t) in s.tracks.iter_mut().enumerate() {
            t.raw = s.times.iter().map(|&x| i as f64 + 0.5 * x).collect();
        }
        let kin = kinematics(&s).unwrap();
        assert!(matches!(
            rescale(&s, &kin, 0..28, VarianceMode::Pooled),
            Err(Error::DegenerateSegment(_))
        ));
    }

    #[test]
    fn reference_curvature_values_and_normalization() {
        assert!((reference_curvature_density(Statistics::Poisson, 0.0) - 1.0 / PI).abs() < 1e-16);
        assert!((reference_curvature_density(Statistics::Gue, 0.0) - 2.0 / PI).abs() < 1e-16);
        let k = 1e3;
        let ratio = reference_curvature_density(Statistics::Poisson, k) / reference_curvature_density(Statistics::Gue, k);
        assert!((ratio / ((1.0 + k * k) / 2.0) - 1.0).abs() < 1e-12);
        let q = GaussLegendre::new(64);
        let big = 50.0;
        for kind in [Statistics::Poisson, Statistics::Gue] {
            // map [−K, K] through k = K tan(…)-free split into pieces
            let mut total = 0.0;
            let cuts = [-big, -10.0, -2.0, 0.0, 2.0, 10.0, big];
            for w in cuts.windows(2) {
                total += q.integrate(w[0], w[1], |x| reference_curvature_density(kind, x));
            }
            let tail = match kind {
                Statistics::Poisson => 2.0 * (0.5 - (big).atan() / PI),
                Statistics::Gue => 2.0 * (0.5 - ((big).atan() + big / (1.0 + big * big)) / PI),
            };
            assert!((total + tail - 1.0).abs() < 1e-10, "{kind:?}");
        }
    }

    #[test]
    fn exact_gue_density_tail_approaches_four() {
        let h = TailHistogram::from_density(|k| reference_curvature_density(Statistics::Gue, k), 10.0, 1e3);
        let fit = tail_fit(&h).unwrap();
        assert!((fit.beta_tilde - 4.0).abs() < 0.05, "{fit:?}");
        let h = TailHistogram::from_density(|k| reference_curvature_density(Statistics::Poisson, k), 10.0, 1e3);
        assert!((tail_fit(&h).unwrap().beta_tilde - 2.0).abs() < 0.05);
    }

    #[test]
    fn sampled_tails() {
        let n = 100_000;
        let mut rng = rmt::stream_rng(17, 0);
        use rand::Rng;
        let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let gue: Vec<f64> = u.iter().map(|&x| rmt::sample_curvature_gue(x)).collect();
        let poi: Vec<f64> = u.iter().map(|&x| rmt::sample_curvature_poisson(x)).collect();
        let fg = tail_fit(&TailHistogram::from_samples(&gue, 3.0)).unwrap();
        let fp = tail_fit(&TailHistogram::from_samples(&poi, 3.0)).unwrap();
        assert!((fg.beta_tilde - 4.0).abs() < 0.5, "{fg:?}");
        assert!((fp.beta_tilde - 2.0).abs() < 0.5, "{fp:?}");
    }

    #[test]
    fn too_few_tail_bins() {
        let h = TailHistogram::from_samples(&[3.5, 4.0, 5.0], 3.0);
        assert!(matches!(tail_fit(&h), Err(Error::InsufficientTail { .. })));
    }

    #[test]
    fn report_edges_cover_line() {
        let e = report_edges();
        assert_eq!(e.len(), 103);
        assert_eq!(e[1], 1e-6);
        assert!((e[101] - 1e4).abs() < 1e-8);
        let h = report_histogram(&[CurvatureSample { t: 0.0, track_id: 0, kappa: 0.0, k: 0.0 }]);
        assert_eq!(h[0].2, 1.0);
    }
}
