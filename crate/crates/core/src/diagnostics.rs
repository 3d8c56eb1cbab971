//! Population observables and out-of-time-ordered correlators.

use faer::{Col, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{self, DressedBasis, FockLabel, Mode, ModeDims, COMPUTATIONAL_LABELS};
use crate::linalg::{self, c64, OperatorMatrix};
use crate::propagator::UnitarySeries;
use crate::spectral::EigenphaseFrame;

pub const DEFAULT_THRESHOLD: f64 = 0.01;

/// Bare level populations of each mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedOccupations {
    pub t: f64,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub cavity: Vec<f64>,
}

impl ReducedOccupations {
    pub fn mode(&self, mode: Mode) -> &[f64] {
        match mode {
            Mode::Q1 => &self.q1,
            Mode::Q2 => &self.q2,
            Mode::Cavity => &self.cavity,
        }
    }
}

/// Diagonals of the single-mode reduced density matrices.
pub fn reduced_occupations(state: &Col<c64>, dims: ModeDims, t: f64) -> ReducedOccupations {
    let mut out = ReducedOccupations {
        t,
        q1: vec![0.0; dims.n1],
        q2: vec![0.0; dims.n2],
        cavity: vec![0.0; dims.nc],
    };
    for (idx, amp) in state.iter().enumerate() {
        let l = dims.label(idx);
        let p = amp.norm_sqr();
        out.q1[l.i1] += p;
        out.q2[l.i2] += p;
        out.cavity[l.ic] += p;
    }
    out
}

/// `p_sub = ¼ Σ_a ⟨a|U† Π_sub U|a⟩` over the dressed computational states.
pub fn subspace_weight_at(u: MatRef<'_, c64>, dressed: &DressedBasis) -> f64 {
    let states = dressed.computational_states();
    let mut total = 0.0;
    for a in &states {
        let ua = linalg::apply(u, a);
        for b in &states {
            total += linalg::inner(b, &ua).norm_sqr();
        }
    }
    total / 4.0
}

pub fn subspace_weight(series: &UnitarySeries, dressed: &DressedBasis) -> Vec<(f64, f64)> {
    series
        .iter()
        .map(|(t, u)| (t, subspace_weight_at(u.as_ref(), dressed)))
        .collect()
}

/// Weights `p_n = |⟨Φ_n|ψ(t)⟩|²` on the eigenvectors of one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupationSpectrum {
    pub t: f64,
    pub p: Vec<f64>,
}

pub fn occupation_spectrum(frame: &EigenphaseFrame, evolved: &Col<c64>) -> OccupationSpectrum {
    let amps = linalg::apply(frame.eigenvectors.adjoint(), evolved);
    OccupationSpectrum {
        t: frame.t,
        p: amps.iter().map(|z| z.norm_sqr()).collect(),
    }
}

/// `(1/N) Σ_n Θ(p_n − p)` with strict exceedance, `Θ(0) = 0`.
pub fn level_count_fraction(spectrum: &OccupationSpectrum, threshold: f64) -> f64 {
    let n = spectrum.p.len();
    spectrum.p.iter().filter(|&&x| x > threshold).count() as f64 / n as f64
}

/// `P_{i1,i2,ic} = Σ_n p_n |⟨Φ_n|i1,i2,ic⟩|²` and its single-mode marginals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockConditional {
    pub t: f64,
    /// Indexed by flat Fock index.
    pub full: Vec<f64>,
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub cavity: Vec<f64>,
}

impl FockConditional {
    pub fn get(&self, dims: ModeDims, label: FockLabel) -> f64 {
        self.full[dims.index(label)]
    }
}

pub fn fock_conditional(frame: &EigenphaseFrame, spectrum: &OccupationSpectrum, dims: ModeDims) -> FockConditional {
    let v = &frame.eigenvectors;
    let n = dims.total();
    let mut full = vec![0.0; n];
    for (col, &p) in spectrum.p.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (i, f) in full.iter_mut().enumerate() {
            *f += p * v[(i, col)].norm_sqr();
        }
    }
    let mut out = FockConditional {
        t: frame.t,
        full: Vec::new(),
        q1: vec![0.0; dims.n1],
        q2: vec![0.0; dims.n2],
        cavity: vec![0.0; dims.nc],
    };
    for (i, &p) in full.iter().enumerate() {
        let l = dims.label(i);
        out.q1[l.i1] += p;
        out.q2[l.i2] += p;
        out.cavity[l.ic] += p;
    }
    out.full = full;
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtocChoice {
    /// `V = b₁ + b₁†`, `W = b₂ + b₂†`.
    Quadrature,
    /// `V = b₁†b₁`, `W = b₂†b₂`.
    Number,
}

impl OtocChoice {
    pub fn name(self) -> &'static str {
        match self {
            OtocChoice::Quadrature => "Quadrature",
            OtocChoice::Number => "Number",
        }
    }
}

pub fn builtin_otoc_operators(dims: ModeDims, choice: OtocChoice) -> (OperatorMatrix, OperatorMatrix) {
    match choice {
        OtocChoice::Quadrature => {
            let quad = |mode| {
                let b = hilbert::ladder(dims, mode);
                let n = dims.total();
                Mat::from_fn(n, n, |i, j| b[(i, j)] + b[(j, i)].conj())
            };
            (quad(Mode::Q1), quad(Mode::Q2))
        }
        OtocChoice::Number => (hilbert::number(dims, Mode::Q1), hilbert::number(dims, Mode::Q2)),
    }
}

/// Operators and initial state prepared for repeated OTOC evaluation.
#[derive(Clone, Debug)]
pub struct Otoc {
    v: OperatorMatrix,
    w: OperatorMatrix,
    psi: Col<c64>,
    v_psi: Col<c64>,
}

impl Otoc {
    pub fn new(v: OperatorMatrix, w: OperatorMatrix, psi: Col<c64>) -> Result<Self> {
        for (name, op) in [("V", &v), ("W", &w)] {
            let defect = linalg::hermiticity_defect(op.as_ref());
            if defect > 1e-10 {
                return Err(Error::NotHermitian {
                    name: name.into(),
                    defect,
                });
            }
        }
        let v_psi = linalg::apply(v.as_ref(), &psi);
        Ok(Self { v, w, psi, v_psi })
    }

    /// `Re⟨ψ| W†(t) V† W(t) V |ψ⟩` with `W(t) = U† W U`, by eight
    /// matrix–vector products.
    pub fn at(&self, u: MatRef<'_, c64>) -> f64 {
        let ud = u.adjoint();
        let mut x = linalg::apply(u, &self.v_psi);
        x = linalg::apply(self.w.as_ref(), &x);
        x = linalg::apply(ud, &x);
        x = linalg::apply(self.v.adjoint(), &x);
        x = linalg::apply(u, &x);
        x = linalg::apply(self.w.adjoint(), &x);
        x = linalg::apply(ud, &x);
        linalg::inner(&self.psi, &x).re
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtocResult {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub choice: String,
    pub initial_state: String,
}

pub fn otoc(series: &UnitarySeries, v: OperatorMatrix, w: OperatorMatrix, psi: Col<c64>, choice: &str, initial: &str) -> Result<OtocResult> {
    let o = Otoc::new(v, w, psi)?;
    Ok(OtocResult {
        times: series.times.clone(),
        values: series.unitaries.iter().map(|u| o.at(u.as_ref())).collect(),
        choice: choice.into(),
        initial_state: initial.into(),
    })
}

/// Initial state: a dressed eigenstate (default) or a bare Fock state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialState {
    Dressed(FockLabel),
    Fock(FockLabel),
}

impl InitialState {
    pub fn vector(&self, dressed: &DressedBasis) -> Col<c64> {
        match *self {
            InitialState::Dressed(l) => dressed.state(l),
            InitialState::Fock(l) => hilbert::fock_state(dressed.dims, l),
        }
    }

    pub fn tag(&self) -> String {
        match self {
            InitialState::Dressed(l) => format!("dressed{}{}", l.i1, l.i2),
            InitialState::Fock(l) => format!("fock{}{}{}", l.i1, l.i2, l.ic),
        }
    }

    pub fn computational(fock: bool) -> Vec<InitialState> {
        COMPUTATIONAL_LABELS
            .iter()
            .map(|&l| if fock { InitialState::Fock(l) } else { InitialState::Dressed(l) })
            .collect()
    }
}
