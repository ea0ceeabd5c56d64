//! Sparse symmetric positive definite solves: CSR storage, Jacobi-preconditioned
//! conjugate gradients, and a dense Cholesky path for small systems.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_len, Error, Result};

/// Compressed sparse row matrix.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a CSR matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and every row's entries end up sorted by column.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|(c, _)| *c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn diagonal(&self) -> DVector<f64> {
        DVector::from_iterator(self.n, (0..self.n).map(|i| self.get(i, i)))
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n);
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &DVector<f64>, y: &mut DVector<f64>) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[i] = s;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgSettings {
    pub rel_tol: f64,
    /// `None` means `10 * n`.
    pub max_iter: Option<usize>,
}

impl Default for CgSettings {
    fn default() -> Self {
        CgSettings {
            rel_tol: 1e-12,
            max_iter: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients, warm-started from `x`.
pub fn pcg(
    a: &CsrMatrix,
    b: &DVector<f64>,
    x: &mut DVector<f64>,
    settings: CgSettings,
) -> Result<CgReport> {
    let n = a.size();
    check_len("pcg rhs", n, b.len())?;
    check_len("pcg initial guess", n, x.len())?;
    let max_iter = settings.max_iter.unwrap_or(10 * n.max(1));
    let inv_diag = a.diagonal().map(|d| if d != 0.0 { 1.0 / d } else { 1.0 });
    let b_norm = b.norm();
    if b_norm == 0.0 {
        x.fill(0.0);
        return Ok(CgReport {
            iterations: 0,
            residual: 0.0,
        });
    }
    let mut r = b - a.mul_vec(x);
    let mut rel = r.norm() / b_norm;
    if rel <= settings.rel_tol {
        return Ok(CgReport {
            iterations: 0,
            residual: rel,
        });
    }
    let mut z = r.component_mul(&inv_diag);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut ap = DVector::zeros(n);
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = p.dot(&ap);
        if !(pap > 0.0) {
            return Err(Error::LinearSolve {
                iterations: it,
                residual: rel,
            });
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        rel = r.norm() / b_norm;
        if rel <= settings.rel_tol {
            return Ok(CgReport {
                iterations: it,
                residual: rel,
            });
        }
        z = r.component_mul(&inv_diag);
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.axpy(1.0, &z, beta);
    }
    Err(Error::LinearSolve {
        iterations: max_iter,
        residual: rel,
    })
}

/// Symmetric positive definite solver that picks a dense Cholesky
/// factorization for small systems and PCG otherwise.
#[derive(Clone, Debug)]
pub enum SpdSolver {
    Dense(Cholesky<f64, Dyn>),
    Iterative { matrix: CsrMatrix, settings: CgSettings },
}

/// Systems up to this size are factorized densely.
pub const DENSE_LIMIT: usize = 1024;

impl SpdSolver {
    pub fn new(matrix: CsrMatrix, settings: CgSettings) -> Result<Self> {
        if matrix.size() <= DENSE_LIMIT {
            let chol = Cholesky::new(matrix.to_dense()).ok_or(Error::Singular("dense Cholesky"))?;
            Ok(SpdSolver::Dense(chol))
        } else {
            Ok(SpdSolver::Iterative { matrix, settings })
        }
    }

    /// Solves `A x = b`; `x` is the initial guess for the iterative path.
    pub fn solve(&self, b: &DVector<f64>, x: &mut DVector<f64>) -> Result<CgReport> {
        match self {
            SpdSolver::Dense(chol) => {
                check_len("dense solve rhs", chol.l_dirty().nrows(), b.len())?;
                *x = chol.solve(b);
                Ok(CgReport {
                    iterations: 0,
                    residual: 0.0,
                })
            }
            SpdSolver::Iterative { matrix, settings } => pcg(matrix, b, x, *settings),
        }
    }
}
