//! Thin helpers over `faer` for the dense complex matrices used throughout.
//!
//! Operators and unitaries are plain `faer::Mat<c64>`; states are `faer::Col<c64>`.

use faer::linalg::matmul::matmul;
use faer::traits::Conjugate;
use faer::{Accum, Col, Mat, MatRef, Par, Side};

pub use faer::c64;

use crate::error::{Error, Result};

/// Dense complex N×N matrix representing an operator or unitary.
pub type OperatorMatrix = Mat<c64>;

/// State vector on the full tensor-product space.
pub type StateVector = Col<c64>;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

/// Matrix product, always sequential. Accepts adjoint/conjugate views.
pub fn mul<L, R>(a: MatRef<'_, L>, b: MatRef<'_, R>) -> Mat<c64>
where
    L: Conjugate<Canonical = c64>,
    R: Conjugate<Canonical = c64>,
{
    let mut out = Mat::zeros(a.nrows(), b.ncols());
    matmul(out.as_mut(), Accum::Replace, a, b, ONE, Par::Seq);
    out
}

/// `out <- a * b` without reallocating `out`.
pub fn mul_into<L, R>(out: &mut Mat<c64>, a: MatRef<'_, L>, b: MatRef<'_, R>)
where
    L: Conjugate<Canonical = c64>,
    R: Conjugate<Canonical = c64>,
{
    matmul(out.as_mut(), Accum::Replace, a, b, ONE, Par::Seq);
}

/// Matrix–vector product.
pub fn apply<L>(a: MatRef<'_, L>, v: &Col<c64>) -> Col<c64>
where
    L: Conjugate<Canonical = c64>,
{
    let mut out = Col::zeros(a.nrows());
    matmul(out.as_mut(), Accum::Replace, a, v.as_ref(), ONE, Par::Seq);
    out
}

/// `⟨a|b⟩ = Σ conj(a_i) b_i`.
pub fn inner(a: &Col<c64>, b: &Col<c64>) -> c64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(v: &Col<c64>) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Unit vector `e_index` of length `dim`.
pub fn basis_vector(dim: usize, index: usize) -> Col<c64> {
    Col::from_fn(dim, |i| if i == index { ONE } else { ZERO })
}

pub fn max_abs(a: MatRef<'_, c64>) -> f64 {
    let mut m = 0.0_f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

/// `max |A − A†|`.
pub fn hermiticity_defect(a: MatRef<'_, c64>) -> f64 {
    let n = a.nrows();
    let mut m = 0.0_f64;
    for j in 0..n {
        for i in 0..=j {
            m = m.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    m
}

/// `max |A†A − I|`.
pub fn unitarity_defect(a: MatRef<'_, c64>) -> f64 {
    let g = mul(a.adjoint(), a);
    let mut m = 0.0_f64;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { ONE } else { ZERO };
            m = m.max((g[(i, j)] - target).norm());
        }
    }
    m
}

/// Eigendecomposition of a Hermitian matrix: ascending real eigenvalues and
/// orthonormal eigenvectors as columns.
pub fn hermitian_eigen(a: MatRef<'_, c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::EigenFailure(format!("{e:?}")))?;
    let values = evd.S().column_vector().iter().map(|s| s.re).collect();
    Ok((values, evd.U().to_owned()))
}

/// `V · diag(d) · V†`.
pub fn reconstruct(v: MatRef<'_, c64>, d: &[c64]) -> Mat<c64> {
    let scaled = Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * d[j]);
    mul(scaled.as_ref(), v.adjoint())
}

/// Closest unitary to `m` (polar factor), `m (m†m)^{-1/2}`.
///
/// Returns the factor and the smallest eigenvalue of `m†m`.
pub fn polar_unitary(m: MatRef<'_, c64>) -> Result<(Mat<c64>, f64)> {
    let gram = mul(m.adjoint(), m);
    let (s, v) = hermitian_eigen(gram.as_ref())?;
    let smallest = s.iter().copied().fold(f64::INFINITY, f64::min);
    if smallest <= 0.0 {
        return Ok((m.to_owned(), smallest));
    }
    let inv_sqrt: Vec<c64> = s.iter().map(|x| c64::new(x.powf(-0.5), 0.0)).collect();
    let root = reconstruct(v.as_ref(), &inv_sqrt);
    Ok((mul(m, root.as_ref()), smallest))
}

/// Embeds a single-mode operator into a tensor product, given the sizes
/// of the modes and which one it acts on.
pub fn embed(local: MatRef<'_, c64>, sizes: &[usize], which: usize) -> Mat<c64> {
    let total: usize = sizes.iter().product();
    let inner: usize = sizes[which + 1..].iter().product();
    let d = sizes[which];
    let mut out = Mat::zeros(total, total);
    for row in 0..total {
        let lr = (row / inner) % d;
        let base = row - lr * inner;
        for lc in 0..d {
            let val = local[(lr, lc)];
            if val != ZERO {
                out[(row, base + lc * inner)] = val;
            }
        }
    }
    out
}

/// Serde adapter storing a complex number as `[re, im]`.
pub mod complex_serde {
    use super::c64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(z: &c64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<c64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(c64::new(re, im))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polar_of_scaled_unitary_is_unitary() {
        let m = Mat::from_fn(3, 3, |i, j| {
            c64::new((i + 2 * j) as f64 * 0.3, (i as f64 - j as f64) * 0.2)
        }) + Mat::<c64>::identity(3, 3);
        let (u, smallest) = polar_unitary(m.as_ref()).unwrap();
        assert!(smallest > 0.0);
        assert!(unitarity_defect(u.as_ref()) < 1e-13);
    }

    #[test]
    fn embed_places_operator_on_middle_mode() {
        let x = Mat::from_fn(2, 2, |i, j| if i != j { ONE } else { ZERO });
        let big = embed(x.as_ref(), &[2, 2, 3], 1);
        // |0,0,2> (index 2) -> |0,1,2> (index 5)
        assert_eq!(big[(5, 2)], ONE);
        assert_eq!(big[(2, 2)], ZERO);
        assert!(hermiticity_defect(big.as_ref()) == 0.0);
    }
}
