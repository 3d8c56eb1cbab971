//! Logical two-qubit gates, local invariants and robustness sweeps.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};
use std::fmt;
use std::path::Path;

use faer::{Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{dressed_basis, DressedBasis, SystemConfig};
use crate::linalg::{self, c64, ONE, ZERO};
use crate::propagator::{Propagator, TimeGrid};
use crate::pulse::Pulse;

/// Smallest admissible eigenvalue of `M†M` before the projection counts as lost.
pub const SINGULAR_GUARD: f64 = 1e-6;

/// A 4×4 gate on (|00⟩, |01⟩, |10⟩, |11⟩).
#[derive(Clone, Debug)]
pub struct LogicalGate {
    pub matrix: Mat<c64>,
    /// `max|M†M − I|` of the raw projection; zero for exact targets.
    pub leakage: f64,
}

impl LogicalGate {
    pub fn from_unitary(matrix: Mat<c64>) -> Result<Self> {
        if matrix.nrows() != 4 || matrix.ncols() != 4 {
            return Err(Error::InvalidParams(format!(
                "gate must be 4x4, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { matrix, leakage: 0.0 })
    }

    pub fn unitarity_defect(&self) -> f64 {
        linalg::unitarity_defect(self.matrix.as_ref())
    }

    pub fn compose(&self, other: &LogicalGate) -> LogicalGate {
        LogicalGate {
            matrix: linalg::mul(self.matrix.as_ref(), other.matrix.as_ref()),
            leakage: 0.0,
        }
    }

    /// Reads 16 `re,im` rows in row-major order; `#` lines are comments.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text)
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut entries = Vec::with_capacity(16);
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',').map(str::trim);
            let (Some(re), Some(im), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("expected `re,im`, got `{line}`"),
                });
            };
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Parse {
                    line: idx + 1,
                    message: format!("`{s}`: {e}"),
                })
            };
            if re == "re" {
                continue;
            }
            entries.push(c64::new(parse(re)?, parse(im)?));
        }
        if entries.len() != 16 {
            return Err(Error::Parse {
                line: text.lines().count(),
                message: format!("expected 16 matrix entries, got {}", entries.len()),
            });
        }
        Self::from_unitary(Mat::from_fn(4, 4, |i, j| entries[4 * i + j]))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("re,im\n");
        for i in 0..4 {
            for j in 0..4 {
                let z = self.matrix[(i, j)];
                s.push_str(&format!("{:?},{:?}\n", z.re, z.im));
            }
        }
        s
    }
}

/// `M_ab = ⟨a|U|b⟩` on the dressed computational states, unitarized by its
/// polar factor.
pub fn extract_logical_gate(u: MatRef<'_, c64>, dressed: &DressedBasis) -> Result<LogicalGate> {
    let states = dressed.computational_states();
    let images: Vec<_> = states.iter().map(|b| linalg::apply(u, b)).collect();
    let raw = Mat::from_fn(4, 4, |a, b| linalg::inner(&states[a], &images[b]));
    let gram = linalg::mul(raw.adjoint(), raw.as_ref());
    let leakage = linalg::max_abs((gram - Mat::<c64>::identity(4, 4)).as_ref());
    let (matrix, smallest) = linalg::polar_unitary(raw.as_ref())?;
    if smallest < SINGULAR_GUARD {
        return Err(Error::SingularProjection(smallest));
    }
    Ok(LogicalGate { matrix, leakage })
}

/// Makhlin invariants `G1 = tr²(m)/(16 det g)`, `G2 = (tr²(m) − tr(m²))/(4 det g)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalInvariants {
    pub g1_re: f64,
    pub g1_im: f64,
    pub g2: f64,
}

impl LocalInvariants {
    pub fn g1(&self) -> c64 {
        c64::new(self.g1_re, self.g1_im)
    }

    /// Closed form for `exp(i/2 Σ c_k σ_k⊗σ_k)`.
    pub fn from_weyl(c1: f64, c2: f64, c3: f64) -> Self {
        let (s1, s2, s3) = (c1.sin().powi(2), c2.sin().powi(2), c3.sin().powi(2));
        let (k1, k2, k3) = (c1.cos().powi(2), c2.cos().powi(2), c3.cos().powi(2));
        LocalInvariants {
            g1_re: k1 * k2 * k3 - s1 * s2 * s3,
            g1_im: 0.25 * (2.0 * c1).sin() * (2.0 * c2).sin() * (2.0 * c3).sin(),
            g2: 4.0 * k1 * k2 * k3 - 4.0 * s1 * s2 * s3 - (2.0 * c1).cos() * (2.0 * c2).cos() * (2.0 * c3).cos(),
        }
    }

    pub fn distance(&self, other: &LocalInvariants) -> f64 {
        (self.g1() - other.g1()).norm_sqr() + (self.g2 - other.g2).powi(2)
    }
}

impl fmt::Display for LocalInvariants {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G1 = {:.6}{:+.6}i, G2 = {:.6}", self.g1_re, self.g1_im, self.g2)
    }
}

/// Columns are the magic (Bell) basis.
pub fn magic_basis() -> Mat<c64> {
    let s = FRAC_1_SQRT_2;
    let r = c64::new(s, 0.0);
    let i = c64::new(0.0, s);
    let rows = [
        [r, ZERO, ZERO, i],
        [ZERO, i, r, ZERO],
        [ZERO, i, -r, ZERO],
        [r, ZERO, ZERO, -i],
    ];
    Mat::from_fn(4, 4, |a, b| rows[a][b])
}

pub fn local_invariants(gate: &LogicalGate) -> LocalInvariants {
    let q = magic_basis();
    let gb = linalg::mul(linalg::mul(q.adjoint(), gate.matrix.as_ref()).as_ref(), q.as_ref());
    let m = linalg::mul(gb.transpose(), gb.as_ref());
    let tr: c64 = (0..4).map(|i| m[(i, i)]).sum();
    let m2 = linalg::mul(m.as_ref(), m.as_ref());
    let tr2: c64 = (0..4).map(|i| m2[(i, i)]).sum();
    let det = determinant(gate.matrix.as_ref());
    let g1 = tr * tr / (det * 16.0);
    let g2 = (tr * tr - tr2) / (det * 4.0);
    LocalInvariants {
        g1_re: g1.re,
        g1_im: g1.im,
        g2: g2.re,
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(a: MatRef<'_, c64>) -> c64 {
    let n = a.nrows();
    let mut m = a.to_owned();
    let mut det = ONE;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[(x, col)].norm().total_cmp(&m[(y, col)].norm()))
            .unwrap();
        if m[(pivot, col)] == ZERO {
            return ZERO;
        }
        if pivot != col {
            for j in 0..n {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(pivot, j)];
                m[(pivot, j)] = tmp;
            }
            det = -det;
        }
        let p = m[(col, col)];
        det *= p;
        for row in col + 1..n {
            let factor = m[(row, col)] / p;
            for j in col..n {
                let v = m[(col, j)];
                m[(row, j)] -= factor * v;
            }
        }
    }
    det
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TargetKind {
    Bgate,
    SqrtIswap,
    Cnot,
    Identity,
    WeylCoords { c1: f64, c2: f64, c3: f64 },
}

impl TargetKind {
    pub fn name(&self) -> String {
        match self {
            TargetKind::Bgate => "BGATE".into(),
            TargetKind::SqrtIswap => "sqrtISWAP".into(),
            TargetKind::Cnot => "CNOT".into(),
            TargetKind::Identity => "Identity".into(),
            TargetKind::WeylCoords { c1, c2, c3 } => format!("Weyl({c1},{c2},{c3})"),
        }
    }
}

impl std::str::FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bgate" | "b" => Ok(TargetKind::Bgate),
            "sqrtiswap" | "sqrt_iswap" => Ok(TargetKind::SqrtIswap),
            "cnot" => Ok(TargetKind::Cnot),
            "identity" | "id" => Ok(TargetKind::Identity),
            other => {
                let inner = other
                    .strip_prefix("weyl(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown target gate `{s}`")))?;
                let c: Vec<f64> = inner
                    .split(',')
                    .map(|x| x.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::InvalidConfig(format!("target `{s}`: {e}")))?;
                match c[..] {
                    [c1, c2, c3] => Ok(TargetKind::WeylCoords { c1, c2, c3 }),
                    _ => Err(Error::InvalidConfig(format!("target `{s}` needs three coordinates"))),
                }
            }
        }
    }
}

/// `exp(i/2 (c1 XX + c2 YY + c3 ZZ))`, built from the commuting factors
/// `cos(c/2) I + i sin(c/2) σσ`.
pub fn weyl_gate(c1: f64, c2: f64, c3: f64) -> Mat<c64> {
    let paulis = pauli_products();
    let mut out = Mat::<c64>::identity(4, 4);
    for (c, p) in [c1, c2, c3].into_iter().zip(paulis.iter()) {
        let (s, co) = (0.5 * c).sin_cos();
        let factor = Mat::from_fn(4, 4, |i, j| {
            let id = if i == j { co } else { 0.0 };
            c64::new(id, 0.0) + c64::new(0.0, s) * p[(i, j)]
        });
        out = linalg::mul(out.as_ref(), factor.as_ref());
    }
    out
}

/// XX, YY, ZZ on the two-qubit basis.
fn pauli_products() -> [Mat<c64>; 3] {
    let x = [[ZERO, ONE], [ONE, ZERO]];
    let y = [[ZERO, c64::new(0.0, -1.0)], [c64::new(0.0, 1.0), ZERO]];
    let z = [[ONE, ZERO], [ZERO, -ONE]];
    let kron = |a: [[c64; 2]; 2]| Mat::from_fn(4, 4, |i, j| a[i / 2][j / 2] * a[i % 2][j % 2]);
    [kron(x), kron(y), kron(z)]
}

pub fn make_target(kind: TargetKind) -> LogicalGate {
    let matrix = match kind {
        TargetKind::Bgate => weyl_gate(FRAC_PI_2, FRAC_PI_4, 0.0),
        TargetKind::WeylCoords { c1, c2, c3 } => weyl_gate(c1, c2, c3),
        TargetKind::Identity => Mat::identity(4, 4),
        TargetKind::Cnot => Mat::from_fn(4, 4, |i, j| {
            let j_expected = if i < 2 { i } else { 5 - i };
            if j == j_expected { ONE } else { ZERO }
        }),
        TargetKind::SqrtIswap => {
            let r = c64::new(FRAC_1_SQRT_2, 0.0);
            let i = c64::new(0.0, FRAC_1_SQRT_2);
            let rows = [
                [ONE, ZERO, ZERO, ZERO],
                [ZERO, r, i, ZERO],
                [ZERO, i, r, ZERO],
                [ZERO, ZERO, ZERO, ONE],
            ];
            Mat::from_fn(4, 4, |a, b| rows[a][b])
        }
    };
    LogicalGate { matrix, leakage: 0.0 }
}

/// `|ΔG1|² + |ΔG2|²`; leakage is reported separately.
pub fn li_gate_error(gate: &LogicalGate, target: &LogicalGate) -> f64 {
    local_invariants(gate).distance(&local_invariants(target))
}

/// `(|tr(target† gate)|² + 4) / 20`.
pub fn avg_gate_fidelity(gate: &LogicalGate, target: &LogicalGate) -> f64 {
    let prod = linalg::mul(target.matrix.adjoint(), gate.matrix.as_ref());
    let tr: c64 = (0..4).map(|i| prod[(i, i)]).sum();
    (tr.norm_sqr() + 4.0) / 20.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Delta1,
    Delta2,
    Deltac,
    G,
    Amplitude,
}

impl SweepParameter {
    pub const ALL: [SweepParameter; 5] = [
        SweepParameter::Delta1,
        SweepParameter::Delta2,
        SweepParameter::Deltac,
        SweepParameter::G,
        SweepParameter::Amplitude,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Delta1 => "delta1",
            SweepParameter::Delta2 => "delta2",
            SweepParameter::Deltac => "deltac",
            SweepParameter::G => "g",
            SweepParameter::Amplitude => "amplitude",
        }
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParameter::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown sweep parameter `{s}`")))
    }
}

/// Relative deviations: the parameter becomes `value · (1 + f)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationSpec {
    pub parameter: SweepParameter,
    pub factors: Vec<f64>,
}

impl DeviationSpec {
    pub fn new(parameter: SweepParameter, factors: Vec<f64>) -> Result<Self> {
        let spec = Self { parameter, factors };
        spec.validate()?;
        Ok(spec)
    }

    /// `n` evenly spaced factors over `[−max, max]`; `n` must be odd so 0 is hit.
    pub fn symmetric(parameter: SweepParameter, max: f64, n: usize) -> Result<Self> {
        if n % 2 == 0 || n < 1 {
            return Err(Error::InvalidParams(format!("need an odd number of factors, got {n}")));
        }
        let half = (n / 2) as i64;
        let factors = (-half..=half)
            .map(|k| if half == 0 { 0.0 } else { max * k as f64 / half as f64 })
            .collect();
        Self::new(parameter, factors)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(f) = self.factors.iter().find(|f| !f.is_finite()) {
            return Err(Error::InvalidParams(format!("non-finite deviation factor {f}")));
        }
        if !self.factors.contains(&0.0) {
            return Err(Error::InvalidParams("deviation factors must include the 0 baseline".into()));
        }
        Ok(())
    }

    /// The perturbed system and pulse for one factor.
    pub fn apply(&self, cfg: &SystemConfig, pulse: &Pulse, factor: f64) -> (SystemConfig, Pulse) {
        let mut cfg = cfg.clone();
        let scale = 1.0 + factor;
        let mut pulse_scale = 1.0;
        match self.parameter {
            SweepParameter::Delta1 => cfg.set_delta1(cfg.delta1() * scale),
            SweepParameter::Delta2 => cfg.set_delta2(cfg.delta2() * scale),
            SweepParameter::Deltac => cfg.set_deltac(cfg.deltac() * scale),
            SweepParameter::G => cfg.g_ghz *= scale,
            SweepParameter::Amplitude => pulse_scale = scale,
        }
        let pulse = if pulse_scale == 1.0 { pulse.clone() } else { pulse.scaled(pulse_scale) };
        (cfg, pulse)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: String,
    pub deviation: f64,
    pub li_error: f64,
    pub leakage: f64,
    pub avg_fidelity: f64,
    /// `ok`, or `failed: <reason>`.
    pub status: String,
}

impl SweepRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Realized gate of one full simulation, in the computational basis of the
/// simulated (possibly perturbed) device.
pub fn realized_gate(cfg: &SystemConfig, pulse: &Pulse, grid: &TimeGrid) -> Result<LogicalGate> {
    let prop = Propagator::new(cfg)?;
    let dressed = dressed_basis(prop.drift(), cfg.dims)?;
    let u = prop.final_unitary(pulse, grid)?;
    extract_logical_gate(u.as_ref(), &dressed)
}

/// One row per factor, computed in parallel and returned in input order.
/// A failed simulation marks its row instead of aborting the sweep.
pub fn robustness_sweep(
    cfg: &SystemConfig,
    pulse: &Pulse,
    grid: &TimeGrid,
    target: &LogicalGate,
    spec: &DeviationSpec,
) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    grid.validate()?;
    let rows = spec
        .factors
        .par_iter()
        .map(|&f| {
            let (c, p) = spec.apply(cfg, pulse, f);
            let mut row = SweepRow {
                parameter: spec.parameter.name().into(),
                deviation: f,
                li_error: f64::NAN,
                leakage: f64::NAN,
                avg_fidelity: f64::NAN,
                status: "ok".into(),
            };
            match realized_gate(&c, &p, grid) {
                Ok(gate) => {
                    row.li_error = li_gate_error(&gate, target);
                    row.leakage = gate.leakage;
                    row.avg_fidelity = avg_gate_fidelity(&gate, target);
                }
                Err(e) => row.status = format!("failed: {e}"),
            }
            row
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{drift_hamiltonian, ModeDims};
    use crate::rmt;
    use std::f64::consts::PI;

    fn kron2(a: MatRef<'_, c64>, b: MatRef<'_, c64>) -> Mat<c64> {
        Mat::from_fn(4, 4, |i, j| a[(i / 2, j / 2)] * b[(i % 2, j % 2)])
    }

    fn dress(g: &LogicalGate, seed: u64) -> LogicalGate {
        let mut rng = rmt::stream_rng(seed, 0);
        let l: Vec<_> = (0..4).map(|_| rmt::cue(2, &mut rng)).collect();
        let left = kron2(l[0].as_ref(), l[1].as_ref());
        let right = kron2(l[2].as_ref(), l[3].as_ref());
        let m = linalg::mul(linalg::mul(left.as_ref(), g.matrix.as_ref()).as_ref(), right.as_ref());
        LogicalGate::from_unitary(m).unwrap()
    }

    fn close(a: LocalInvariants, b: LocalInvariants, tol: f64) -> bool {
        (a.g1_re - b.g1_re).abs() < tol && (a.g1_im - b.g1_im).abs() < tol && (a.g2 - b.g2).abs() < tol
    }

    #[test]
    fn identity_and_cnot_invariants() {
        let id = local_invariants(&make_target(TargetKind::Identity));
        assert!(close(id, LocalInvariants { g1_re: 1.0, g1_im: 0.0, g2: 3.0 }, 1e-12));
        let cnot = local_invariants(&make_target(TargetKind::Cnot));
        assert!(close(cnot, LocalInvariants { g1_re: 0.0, g1_im: 0.0, g2: 1.0 }, 1e-12));
        assert!((li_gate_error(&make_target(TargetKind::Identity), &make_target(TargetKind::Cnot)) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn weyl_gates_match_closed_form() {
        for (c1, c2, c3) in [(0.0, 0.0, 0.0), (PI / 2.0, 0.0, 0.0), (0.3, 0.2, 0.1), (PI / 2.0, PI / 4.0, 0.0), (1.1, 0.7, -0.4)] {
            let g = LogicalGate::from_unitary(weyl_gate(c1, c2, c3)).unwrap();
            assert!(g.unitarity_defect() < 1e-14);
            assert!(close(local_invariants(&g), LocalInvariants::from_weyl(c1, c2, c3), 1e-12), "{c1} {c2} {c3}");
        }
        let cnot_class = LogicalGate::from_unitary(weyl_gate(PI / 2.0, 0.0, 0.0)).unwrap();
        assert!(li_gate_error(&cnot_class, &make_target(TargetKind::Cnot)) < 1e-24);
    }

    #[test]
    fn weyl_origin_is_identity() {
        let m = weyl_gate(0.0, 0.0, 0.0);
        assert_eq!(linalg::max_abs((m - Mat::<c64>::identity(4, 4)).as_ref()), 0.0);
    }

    #[test]
    fn sqrt_iswap_squares_to_iswap_class() {
        let s = make_target(TargetKind::SqrtIswap);
        assert!(close(local_invariants(&s), LocalInvariants::from_weyl(PI / 4.0, PI / 4.0, 0.0), 1e-12));
        let sq = s.compose(&s);
        assert!(close(local_invariants(&sq), LocalInvariants::from_weyl(PI / 2.0, PI / 2.0, 0.0), 1e-12));
        assert!(close(local_invariants(&sq), LocalInvariants { g1_re: 0.0, g1_im: 0.0, g2: -1.0 }, 1e-12));
    }

    #[test]
    fn invariants_unchanged_by_local_dressing() {
        for kind in [TargetKind::Bgate, TargetKind::Cnot, TargetKind::SqrtIswap, TargetKind::WeylCoords { c1: 0.9, c2: 0.4, c3: 0.2 }] {
            let g = make_target(kind);
            let base = local_invariants(&g);
            for seed in 0..50 {
                let d = dress(&g, seed);
                assert!(close(local_invariants(&d), base, 1e-10));
                assert!(li_gate_error(&d, &g) < 1e-20);
            }
        }
    }

    #[test]
    fn global_phase_does_not_change_invariants() {
        let g = make_target(TargetKind::Bgate);
        let phased = LogicalGate::from_unitary(g.matrix.clone() * faer::Scale(c64::from_polar(1.0, 0.77))).unwrap();
        assert!(close(local_invariants(&phased), local_invariants(&g), 1e-12));
        assert!((avg_gate_fidelity(&phased, &g) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_edges() {
        let id = make_target(TargetKind::Identity);
        assert!((avg_gate_fidelity(&id, &id) - 1.0).abs() < 1e-15);
        let zz = LogicalGate::from_unitary(pauli_products()[2].clone()).unwrap();
        assert!((avg_gate_fidelity(&zz, &id) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn determinant_matches_eigenvalue_product() {
        let mut rng = rmt::stream_rng(3, 0);
        let u = rmt::cue(4, &mut rng);
        let prod: c64 = u.as_ref().eigenvalues().unwrap().iter().product();
        assert!((determinant(u.as_ref()) - prod).norm() < 1e-12);
    }

    #[test]
    fn target_parsing_and_csv() {
        assert_eq!("BGATE".parse::<TargetKind>().unwrap(), TargetKind::Bgate);
        assert_eq!(
            "weyl(0.1, 0.2,0.3)".parse::<TargetKind>().unwrap(),
            TargetKind::WeylCoords { c1: 0.1, c2: 0.2, c3: 0.3 }
        );
        assert!("swap".parse::<TargetKind>().is_err());
        let b = make_target(TargetKind::Bgate);
        let back = LogicalGate::parse_csv(&b.to_csv()).unwrap();
        assert_eq!(linalg::max_abs((back.matrix - &b.matrix).as_ref()), 0.0);
        assert!(matches!(LogicalGate::parse_csv("1,0\n"), Err(Error::Parse { .. })));
    }

    fn small_cfg() -> SystemConfig {
        SystemConfig::default().with_dims(ModeDims::new(3, 3, 4).unwrap())
    }

    #[test]
    fn identity_evolution_gives_identity_gate() {
        let cfg = small_cfg();
        let dressed = dressed_basis(&drift_hamiltonian(&cfg), cfg.dims).unwrap();
        let id = Mat::<c64>::identity(cfg.dims.total(), cfg.dims.total());
        let g = extract_logical_gate(id.as_ref(), &dressed).unwrap();
        assert!(g.leakage < 1e-13, "{}", g.leakage);
        assert!(linalg::max_abs((g.matrix - Mat::<c64>::identity(4, 4)).as_ref()) < 1e-14);
    }

    #[test]
    fn static_evolution_gives_dressed_phases() {
        let cfg = small_cfg();
        let t = 5.0;
        let grid = TimeGrid::new(0.0, t, 0.01, 500).unwrap();
        let prop = Propagator::new(&cfg).unwrap();
        let dressed = dressed_basis(prop.drift(), cfg.dims).unwrap();
        let u = prop.final_unitary(&Pulse::zero(), &grid).unwrap();
        let g = extract_logical_gate(u.as_ref(), &dressed).unwrap();
        assert!(g.leakage < 1e-9);
        for (a, &l) in crate::hilbert::COMPUTATIONAL_LABELS.iter().enumerate() {
            let want = c64::from_polar(1.0, -2.0 * PI * dressed.energy(l) * t);
            for b in 0..4 {
                let expect = if a == b { want } else { ZERO };
                assert!((g.matrix[(a, b)] - expect).norm() < 1e-9);
            }
        }
        assert!(g.unitarity_defect() < 1e-12);
    }

    #[test]
    fn lost_subspace_is_singular() {
        let cfg = small_cfg();
        let dressed = dressed_basis(&drift_hamiltonian(&cfg), cfg.dims).unwrap();
        let n = cfg.dims.total();
        // swap dressed |00> with a far-away dressed state
        let a = dressed.column(crate::hilbert::FockLabel::new(0, 0, 0));
        let b = dressed.column(crate::hilbert::FockLabel::new(2, 2, 3));
        let mut d = vec![ONE; n];
        d[a] = ZERO;
        d[b] = ZERO;
        let v = &dressed.eigenvectors;
        let mut u = linalg::reconstruct(v.as_ref(), &d);
        let va = faer::Col::from_fn(n, |i| v[(i, a)]);
        let vb = faer::Col::from_fn(n, |i| v[(i, b)]);
        for i in 0..n {
            for j in 0..n {
                u[(i, j)] += va[i] * vb[j].conj() + vb[i] * va[j].conj();
            }
        }
        assert!(linalg::unitarity_defect(u.as_ref()) < 1e-12);
        assert!(matches!(extract_logical_gate(u.as_ref(), &dressed), Err(Error::SingularProjection(_))));
    }

    #[test]
    fn deviations_are_multiplicative() {
        let cfg = SystemConfig::default();
        let pulse = Pulse::zero();
        let spec = DeviationSpec::new(SweepParameter::Delta1, vec![0.0, 0.1]).unwrap();
        let (c, _) = spec.apply(&cfg, &pulse, 0.1);
        assert!((c.delta1() - 1.1 * cfg.delta1()).abs() < 1e-15);
        assert_eq!(c.omegad_ghz, cfg.omegad_ghz);
        let spec = DeviationSpec::new(SweepParameter::G, vec![0.0]).unwrap();
        assert!((spec.apply(&cfg, &pulse, -0.02).0.g_ghz - 0.98 * 0.07).abs() < 1e-15);
        assert!(DeviationSpec::new(SweepParameter::G, vec![0.1]).is_err());
        assert!(DeviationSpec::new(SweepParameter::G, vec![0.0, f64::NAN]).is_err());
        assert_eq!(DeviationSpec::symmetric(SweepParameter::G, 0.05, 11).unwrap().factors.len(), 11);
    }

    #[test]
    fn amplitude_sweep_without_drive_is_flat() {
        let cfg = small_cfg();
        let grid = TimeGrid::new(0.0, 1.0, 0.01, 100).unwrap();
        let spec = DeviationSpec::symmetric(SweepParameter::Amplitude, 0.05, 5).unwrap();
        let target = make_target(TargetKind::Identity);
        let rows = robustness_sweep(&cfg, &Pulse::zero(), &grid, &target, &spec).unwrap();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.ok() && r.li_error == rows[0].li_error && r.leakage == rows[0].leakage));
        let again = robustness_sweep(&cfg, &Pulse::zero(), &grid, &target, &spec).unwrap();
        assert_eq!(rows, again);
    }

    #[test]
    fn failed_row_does_not_abort() {
        let cfg = small_cfg();
        let grid = TimeGrid::new(0.0, 1.0, 0.01, 100).unwrap();
        // g -> 0 at f = -1 leaves the sweep valid; a huge g trips the
        // dressed-state assignment.
        let spec = DeviationSpec::new(SweepParameter::G, vec![0.0, -1.0, 200.0]).unwrap();
        let rows = robustness_sweep(&cfg, &Pulse::zero(), &grid, &make_target(TargetKind::Identity), &spec).unwrap();
        assert!(rows[0].ok() && rows[1].ok());
        assert!(rows[2].status.starts_with("failed"), "{:?}", rows[2]);
        assert!(rows[2].li_error.is_nan());
    }
}
