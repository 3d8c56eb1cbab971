//! Truncated Hilbert space of two transmons and a cavity, the drift
//! Hamiltonian in the frame rotating with the drive, and the dressed
//! computational basis.
//!
//! Frequencies are linear frequencies in GHz and times are in ns; the
//! propagator applies the factor 2π. Flat basis index is
//! `(i1 * n2 + i2) * nc + ic`.

use std::fmt;
use std::path::Path;

use faer::{Col, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, OperatorMatrix, ZERO};

/// Overlap gap below which a dressed-state assignment is flagged as ambiguous.
pub const DEGENERACY_GUARD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[usize; 3]", into = "[usize; 3]")]
pub struct ModeDims {
    pub n1: usize,
    pub n2: usize,
    pub nc: usize,
}

impl ModeDims {
    pub fn new(n1: usize, n2: usize, nc: usize) -> Result<Self> {
        if n1 < 2 || n2 < 2 || nc < 2 {
            return Err(Error::InvalidConfig(format!(
                "every mode needs at least 2 levels, got ({n1}, {n2}, {nc})"
            )));
        }
        Ok(Self { n1, n2, nc })
    }

    /// Total dimension N = n1·n2·nc.
    pub fn total(&self) -> usize {
        self.n1 * self.n2 * self.nc
    }

    pub fn size(&self, mode: Mode) -> usize {
        match mode {
            Mode::Q1 => self.n1,
            Mode::Q2 => self.n2,
            Mode::Cavity => self.nc,
        }
    }

    pub fn index(&self, label: FockLabel) -> usize {
        debug_assert!(label.i1 < self.n1 && label.i2 < self.n2 && label.ic < self.nc);
        (label.i1 * self.n2 + label.i2) * self.nc + label.ic
    }

    pub fn label(&self, index: usize) -> FockLabel {
        FockLabel {
            i1: index / (self.n2 * self.nc),
            i2: (index / self.nc) % self.n2,
            ic: index % self.nc,
        }
    }

    pub fn contains(&self, label: FockLabel) -> bool {
        label.i1 < self.n1 && label.i2 < self.n2 && label.ic < self.nc
    }

    /// All labels in flat-index order.
    pub fn labels(&self) -> impl Iterator<Item = FockLabel> + '_ {
        (0..self.total()).map(move |i| self.label(i))
    }

    fn sizes(&self) -> [usize; 3] {
        [self.n1, self.n2, self.nc]
    }
}

impl Default for ModeDims {
    fn default() -> Self {
        Self { n1: 5, n2: 5, nc: 6 }
    }
}

impl TryFrom<[usize; 3]> for ModeDims {
    type Error = Error;

    fn try_from(d: [usize; 3]) -> Result<Self> {
        Self::new(d[0], d[1], d[2])
    }
}

impl From<ModeDims> for [usize; 3] {
    fn from(d: ModeDims) -> Self {
        d.sizes()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Q1,
    Q2,
    Cavity,
}

impl Mode {
    fn position(self) -> usize {
        match self {
            Mode::Q1 => 0,
            Mode::Q2 => 1,
            Mode::Cavity => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FockLabel {
    pub i1: usize,
    pub i2: usize,
    pub ic: usize,
}

impl FockLabel {
    pub const fn new(i1: usize, i2: usize, ic: usize) -> Self {
        Self { i1, i2, ic }
    }
}

impl fmt::Display for FockLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{},{}>", self.i1, self.i2, self.ic)
    }
}

/// Logical basis order |00⟩, |01⟩, |10⟩, |11⟩ (cavity in vacuum).
pub const COMPUTATIONAL_LABELS: [FockLabel; 4] = [
    FockLabel::new(0, 0, 0),
    FockLabel::new(0, 1, 0),
    FockLabel::new(1, 0, 0),
    FockLabel::new(1, 1, 0),
];

/// Physical parameters. All frequencies are `frequency / 2π` in GHz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub omega1_ghz: f64,
    pub omega2_ghz: f64,
    pub omegac_ghz: f64,
    pub omegad_ghz: f64,
    pub alpha1_ghz: f64,
    pub alpha2_ghz: f64,
    pub g_ghz: f64,
    #[serde(default)]
    pub dims: ModeDims,
}

impl Default for SystemConfig {
    /// Two transmons at 6.0 and 5.9 GHz, cavity at 6.2 GHz, drive at 5.93 GHz.
    fn default() -> Self {
        Self {
            omega1_ghz: 6.0,
            omega2_ghz: 5.9,
            omegac_ghz: 6.2,
            omegad_ghz: 5.93,
            alpha1_ghz: -0.29,
            alpha2_ghz: -0.31,
            g_ghz: 0.07,
            dims: ModeDims::default(),
        }
    }
}

impl SystemConfig {
    pub fn with_dims(mut self, dims: ModeDims) -> Self {
        self.dims = dims;
        self
    }

    pub fn delta1(&self) -> f64 {
        self.omega1_ghz - self.omegad_ghz
    }

    pub fn delta2(&self) -> f64 {
        self.omega2_ghz - self.omegad_ghz
    }

    pub fn deltac(&self) -> f64 {
        self.omegac_ghz - self.omegad_ghz
    }

    /// Sets δ1 by moving ω1 relative to the (fixed) drive frequency.
    pub fn set_delta1(&mut self, delta: f64) {
        self.omega1_ghz = self.omegad_ghz + delta;
    }

    pub fn set_delta2(&mut self, delta: f64) {
        self.omega2_ghz = self.omegad_ghz + delta;
    }

    pub fn set_deltac(&mut self, delta: f64) {
        self.omegac_ghz = self.omegad_ghz + delta;
    }

    pub fn validate(&self) -> Result<()> {
        ModeDims::new(self.dims.n1, self.dims.n2, self.dims.nc)?;
        let fields = [
            ("omega1_ghz", self.omega1_ghz),
            ("omega2_ghz", self.omega2_ghz),
            ("omegac_ghz", self.omegac_ghz),
            ("omegad_ghz", self.omegad_ghz),
            ("alpha1_ghz", self.alpha1_ghz),
            ("alpha2_ghz", self.alpha2_ghz),
            ("g_ghz", self.g_ghz),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} is not finite")));
            }
        }
        for d in [self.delta1(), self.delta2(), self.deltac()] {
            if !d.is_finite() {
                return Err(Error::InvalidConfig("detuning is not finite".into()));
            }
        }
        if self.alpha1_ghz >= 0.0 || self.alpha2_ghz >= 0.0 {
            return Err(Error::InvalidConfig(
                "transmon anharmonicities must be strictly negative".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("SystemConfig always serializes")
    }
}

/// Annihilation operator of `mode`, embedded in the full space.
pub fn ladder(dims: ModeDims, mode: Mode) -> OperatorMatrix {
    let d = dims.size(mode);
    let local = Mat::from_fn(d, d, |i, j| {
        if j == i + 1 {
            c64::new((j as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    });
    linalg::embed(local.as_ref(), &dims.sizes(), mode.position())
}

/// Number operator `b†b` of `mode` (diagonal).
pub fn number(dims: ModeDims, mode: Mode) -> OperatorMatrix {
    let n = dims.total();
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            let l = dims.label(i);
            let k = match mode {
                Mode::Q1 => l.i1,
                Mode::Q2 => l.i2,
                Mode::Cavity => l.ic,
            };
            c64::new(k as f64, 0.0)
        } else {
            ZERO
        }
    })
}

/// Drift Hamiltonian (no drive) in GHz:
///
/// `H = Σ_q [δ_q n_q + (α_q/2) n_q(n_q − 1) + g(b_q†a + b_q a†)] + δ_c n_c`.
pub fn drift_hamiltonian(cfg: &SystemConfig) -> OperatorMatrix {
    let dims = cfg.dims;
    let n = dims.total();
    let (d1, d2, dc) = (cfg.delta1(), cfg.delta2(), cfg.deltac());
    let (a1, a2, g) = (cfg.alpha1_ghz, cfg.alpha2_ghz, cfg.g_ghz);
    let mut h = Mat::<c64>::zeros(n, n);
    for idx in 0..n {
        let l = dims.label(idx);
        let (i1, i2, ic) = (l.i1 as f64, l.i2 as f64, l.ic as f64);
        let diag = d1 * i1 + 0.5 * a1 * i1 * (i1 - 1.0) + d2 * i2 + 0.5 * a2 * i2 * (i2 - 1.0) + dc * ic;
        h[(idx, idx)] = c64::new(diag, 0.0);

        // b_q† a : (i_q, ic) -> (i_q + 1, ic - 1), amplitude sqrt(i_q + 1) sqrt(ic)
        if l.ic > 0 {
            if l.i1 + 1 < dims.n1 {
                let to = dims.index(FockLabel::new(l.i1 + 1, l.i2, l.ic - 1));
                let amp = g * ((i1 + 1.0) * ic).sqrt();
                h[(to, idx)] = c64::new(amp, 0.0);
                h[(idx, to)] = c64::new(amp, 0.0);
            }
            if l.i2 + 1 < dims.n2 {
                let to = dims.index(FockLabel::new(l.i1, l.i2 + 1, l.ic - 1));
                let amp = g * ((i2 + 1.0) * ic).sqrt();
                h[(to, idx)] = c64::new(amp, 0.0);
                h[(idx, to)] = c64::new(amp, 0.0);
            }
        }
    }
    h
}

/// Cavity operators `(a, a†)` for the drive term `½𝓔(t) a + ½𝓔*(t) a†`.
pub fn drive_operator(cfg: &SystemConfig) -> (OperatorMatrix, OperatorMatrix) {
    let a = ladder(cfg.dims, Mode::Cavity);
    let ad = a.adjoint().to_owned();
    (a, ad)
}

/// Full `H(t) = H_drift + ½𝓔 a + ½𝓔* a†` for a given drive amplitude.
pub fn driven_hamiltonian(drift: &OperatorMatrix, a: &OperatorMatrix, field: c64) -> OperatorMatrix {
    let n = drift.nrows();
    let half = field * 0.5;
    Mat::from_fn(n, n, |i, j| drift[(i, j)] + half * a[(i, j)] + half.conj() * a[(j, i)].conj())
}

/// Eigenbasis of the undriven Hamiltonian, each eigenvector labelled by the
/// bare Fock state it overlaps most.
#[derive(Clone, Debug)]
pub struct DressedBasis {
    pub dims: ModeDims,
    /// Eigenvalues in ascending order (GHz).
    pub energies: Vec<f64>,
    /// Eigenvectors as columns, phase-fixed so the overlap with the assigned
    /// Fock state is real and positive.
    pub eigenvectors: Mat<c64>,
    /// `assignment[flat Fock index] = eigenvector column`.
    pub assignment: Vec<usize>,
    /// `|⟨Φ|label⟩|` for each label's assigned eigenvector.
    pub overlaps: Vec<f64>,
}

impl DressedBasis {
    pub fn column(&self, label: FockLabel) -> usize {
        self.assignment[self.dims.index(label)]
    }

    pub fn energy(&self, label: FockLabel) -> f64 {
        self.energies[self.column(label)]
    }

    pub fn state(&self, label: FockLabel) -> Col<c64> {
        let c = self.column(label);
        Col::from_fn(self.dims.total(), |i| self.eigenvectors[(i, c)])
    }

    pub fn overlap(&self, label: FockLabel) -> f64 {
        self.overlaps[self.dims.index(label)]
    }

    /// Dressed |00⟩, |01⟩, |10⟩, |11⟩.
    pub fn computational_states(&self) -> [Col<c64>; 4] {
        COMPUTATIONAL_LABELS.map(|l| self.state(l))
    }
}

/// Diagonalizes the drift Hamiltonian and labels eigenvectors by maximal
/// bare-state overlap.
pub fn dressed_basis(h_drift: &OperatorMatrix, dims: ModeDims) -> Result<DressedBasis> {
    let n = dims.total();
    if h_drift.nrows() != n || h_drift.ncols() != n {
        return Err(Error::InvalidParams(format!(
            "Hamiltonian is {}x{}, dims imply {n}",
            h_drift.nrows(),
            h_drift.ncols()
        )));
    }
    let (energies, mut vecs) = linalg::hermitian_eigen(h_drift.as_ref())?;

    let mut assignment = vec![0usize; n];
    let mut overlaps = vec![0.0; n];
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for idx in 0..n {
        // overlap of bare |idx> with eigenvector k is |V[idx, k]|
        let (mut best, mut best_val, mut second_val) = (0usize, -1.0_f64, -1.0_f64);
        for k in 0..n {
            let v = vecs[(idx, k)].norm();
            if v > best_val {
                second_val = best_val;
                best_val = v;
                best = k;
            } else if v > second_val {
                second_val = v;
            }
        }
        let label = dims.label(idx);
        if best_val - second_val < DEGENERACY_GUARD {
            return Err(Error::DegenerateOverlap {
                label: label.to_string(),
                gap: best_val - second_val,
            });
        }
        if let Some(prev) = owner[best] {
            return Err(Error::AssignmentConflict {
                first: dims.label(prev).to_string(),
                second: label.to_string(),
                eigenvector: best,
            });
        }
        owner[best] = Some(idx);
        assignment[idx] = best;
        overlaps[idx] = best_val;
    }

    // gauge: ⟨label|Φ⟩ real positive
    for idx in 0..n {
        let k = assignment[idx];
        let z = vecs[(idx, k)];
        let phase = z.conj() / z.norm();
        for i in 0..n {
            vecs[(i, k)] *= phase;
        }
    }

    Ok(DressedBasis {
        dims,
        energies,
        eigenvectors: vecs,
        assignment,
        overlaps,
    })
}

/// Bare Fock state as a vector.
pub fn fock_state(dims: ModeDims, label: FockLabel) -> Col<c64> {
    linalg::basis_vector(dims.total(), dims.index(label))
}

/// Normalized superposition helper used by tests and examples.
pub fn superposition(dims: ModeDims, terms: &[(FockLabel, c64)]) -> Col<c64> {
    let mut v = Col::<c64>::zeros(dims.total());
    for &(l, a) in terms {
        v[dims.index(l)] += a;
    }
    let nrm = linalg::norm(&v);
    if nrm > 0.0 {
        for x in v.iter_mut() {
            *x /= nrm;
        }
    }
    v
}
