//! Orthonormalization helpers: plain thin QR and the zero-density
//! constrained QR for angular bases.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};

/// Negates every column whose largest-magnitude entry is negative. Returns
/// the flipped column indices' signs (`-1.0` where flipped).
pub(crate) fn fix_column_signs(q: &mut DMatrix<f64>) -> Vec<f64> {
    let mut signs = vec![1.0; q.ncols()];
    for (c, mut col) in q.column_iter_mut().enumerate() {
        let mut best = 0.0f64;
        for &v in col.iter() {
            if v.abs() > best.abs() {
                best = v;
            }
        }
        if best < 0.0 {
            col.neg_mut();
            signs[c] = -1.0;
        }
    }
    signs
}

/// Orthonormal basis for the column space of `a` via Householder QR, with
/// at most `a.nrows()` columns. Rank-deficient inputs still yield
/// orthonormal columns (completed by the reflectors).
pub fn orthonormal_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    if a.ncols() == 0 {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let mut q = a.clone().qr().q();
    fix_column_signs(&mut q);
    q
}

/// Householder reflector `H = I - 2 u u^T / (u^T u)` with `H c_hat = -s e_1`.
#[derive(Clone, Debug)]
pub(crate) struct Reflector {
    u: DVector<f64>,
    scale: f64,
}

impl Reflector {
    pub(crate) fn new(c: &[f64]) -> Result<Self> {
        let c = DVector::from_column_slice(c);
        let norm = c.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidConfig("constraint vector must be non-zero".into()));
        }
        let mut u = c / norm;
        let s = if u[0] >= 0.0 { 1.0 } else { -1.0 };
        u[0] += s;
        let uu = u.norm_squared();
        Ok(Reflector { u, scale: 2.0 / uu })
    }

    /// `H A` in place.
    pub(crate) fn apply(&self, a: &mut DMatrix<f64>) {
        for mut col in a.column_iter_mut() {
            let d = self.u.dot(&col);
            col.axpy(-self.scale * d, &self.u, 1.0);
        }
    }

    pub(crate) fn dim(&self) -> usize {
        self.u.len()
    }
}

/// Orthonormal basis of `span(Z Z^T L)` where `Z` spans the orthogonal
/// complement of `c`. Every output column satisfies `c^T v = 0`.
///
/// The null-space basis is `Z = H[:, 1..]` for the reflector `H` that maps
/// `c/|c|` onto a multiple of `e_1`, so `Z^T L` is `H L` without its first
/// row, and `Z Q~ = H [0; Q~]`. Rank-deficient inputs are completed by the
/// Householder QR of `Z^T L`, which stays inside the constraint subspace.
pub fn constrained_qr(l: &DMatrix<f64>, c: &[f64]) -> Result<DMatrix<f64>> {
    check_len("constrained_qr", c.len(), l.nrows())?;
    let n = l.nrows();
    if n < 2 {
        return Err(Error::InvalidConfig("constrained QR needs at least two rows".into()));
    }
    let h = Reflector::new(c)?;
    let mut hl = l.clone();
    h.apply(&mut hl);
    let zl = hl.rows(1, n - 1).into_owned();
    let qt = orthonormal_basis(&zl);
    let mut v = DMatrix::zeros(n, qt.ncols());
    v.rows_mut(1, n - 1).copy_from(&qt);
    debug_assert_eq!(h.dim(), n);
    h.apply(&mut v);
    fix_column_signs(&mut v);
    Ok(v)
}
