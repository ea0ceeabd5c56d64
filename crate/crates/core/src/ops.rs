//! Discrete transport operators and inner products.
//!
//! Matrices `G` live on the fluctuation lattice with one column per ordinate
//! (`N_g x N_Omega`); density vectors live on the density lattice.
//!
//! * `advect` / `advect_adjoint` (the upwind advection `A` and its weighted
//!   adjoint) difference along one lattice, one full cell apart.
//! * `flux_div` (`H`) and `density_grad` (`J`) move between the lattices with
//!   half-cell differences.

use nalgebra::{DMatrix, DVector};

use crate::angular::QuadratureSet;
use crate::error::{check_len, check_shape, Error, Result};
use crate::grid::{Lattice, Side, StaggeredGrid};

/// A grid together with an angular rule, plus cached diagonal data.
#[derive(Clone, Debug)]
pub struct PhaseSpace {
    pub grid: StaggeredGrid,
    pub quad: QuadratureSet,
    sqrt_w: Vec<f64>,
    q_plus: Vec<Vec<f64>>,
    q_minus: Vec<Vec<f64>>,
}

impl PhaseSpace {
    pub fn new(grid: StaggeredGrid, quad: QuadratureSet) -> Result<Self> {
        if grid.dim() != quad.dim() {
            return Err(Error::InvalidConfig(format!(
                "grid is {}-D but the quadrature is {}-D",
                grid.dim(),
                quad.dim()
            )));
        }
        let d = grid.dim();
        let sqrt_w = quad.sqrt_weights();
        let q_plus = (0..d).map(|j| quad.upwind(j, true)).collect();
        let q_minus = (0..d).map(|j| quad.upwind(j, false)).collect();
        Ok(PhaseSpace {
            grid,
            quad,
            sqrt_w,
            q_plus,
            q_minus,
        })
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn n_rho(&self) -> usize {
        self.grid.rho_count()
    }

    pub fn n_g(&self) -> usize {
        self.grid.g_count()
    }

    pub fn n_omega(&self) -> usize {
        self.quad.count()
    }

    pub fn sqrt_weights(&self) -> &[f64] {
        &self.sqrt_w
    }

    fn check_g(&self, context: &'static str, g: &DMatrix<f64>) -> Result<()> {
        check_shape(context, (self.n_g(), self.n_omega()), g.shape())
    }

    /// `A(G) = sum_j D^(j),- G Q^(j),+ + D^(j),+ G Q^(j),-`.
    pub fn advect(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_g("advect", g)?;
        Ok(self.advect_unchecked(g))
    }

    pub(crate) fn advect_unchecked(&self, g: &DMatrix<f64>) -> DMatrix<f64> {
        let (n, m) = g.shape();
        let mut out = DMatrix::zeros(n, m);
        for axis in 0..self.dim() {
            let (fwd, bwd) = self.grid.shift_neighbours(Lattice::G, axis);
            let inv = 1.0 / self.grid.spacing(axis);
            let (qp, qm) = (&self.q_plus[axis], &self.q_minus[axis]);
            for k in 0..m {
                let src = g.column(k);
                let mut dst = out.column_mut(k);
                if qp[k] != 0.0 {
                    let c = qp[k] * inv;
                    for i in 0..n {
                        dst[i] += c * (src[i] - src[bwd[i]]);
                    }
                }
                if qm[k] != 0.0 {
                    let c = qm[k] * inv;
                    for i in 0..n {
                        dst[i] += c * (src[fwd[i]] - src[i]);
                    }
                }
            }
        }
        out
    }

    /// `A*(G) = -sum_j D^(j),- G Q^(j),- + D^(j),+ G Q^(j),+`, the adjoint of
    /// [`advect`](Self::advect) in the weighted inner product.
    pub fn advect_adjoint(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_g("advect_adjoint", g)?;
        let (n, m) = g.shape();
        let mut out = DMatrix::zeros(n, m);
        for axis in 0..self.dim() {
            let (fwd, bwd) = self.grid.shift_neighbours(Lattice::G, axis);
            let inv = 1.0 / self.grid.spacing(axis);
            let (qp, qm) = (&self.q_plus[axis], &self.q_minus[axis]);
            for k in 0..m {
                let src = g.column(k);
                let mut dst = out.column_mut(k);
                if qm[k] != 0.0 {
                    let c = qm[k] * inv;
                    for i in 0..n {
                        dst[i] -= c * (src[i] - src[bwd[i]]);
                    }
                }
                if qp[k] != 0.0 {
                    let c = qp[k] * inv;
                    for i in 0..n {
                        dst[i] -= c * (src[fwd[i]] - src[i]);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Right projection `F (I - w 1^T / |D|)`: removes the weighted angular
    /// mean of every row.
    pub fn project_right(&self, f: &mut DMatrix<f64>) {
        let w = self.quad.weights();
        let inv = 1.0 / self.quad.measure();
        let mean = &*f * DVector::from_column_slice(w) * inv;
        for mut col in f.column_iter_mut() {
            col -= &mean;
        }
    }

    /// `A(G) (I - w 1^T / |D|)`.
    pub fn advect_projected_dense(&self, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut a = self.advect(g)?;
        self.project_right(&mut a);
        Ok(a)
    }

    /// `H(G) = (1/|D|) sum_j D^(j),- G Q^(j) w`.
    pub fn flux_div(&self, g: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_g("flux_div", g)?;
        let moments: Vec<DVector<f64>> = (0..self.dim()).map(|j| self.flux_moment(g, j)).collect();
        self.flux_div_from_moments(&moments)
    }

    /// `G Q^(j) w`, the per-axis flux on the fluctuation lattice.
    pub fn flux_moment(&self, g: &DMatrix<f64>, axis: usize) -> DVector<f64> {
        let qw = DVector::from_iterator(
            self.n_omega(),
            self.quad
                .omega(axis)
                .iter()
                .zip(self.quad.weights())
                .map(|(o, w)| o * w),
        );
        g * qw
    }

    /// `(1/|D|) sum_j D^(j),- m_j` given the per-axis fluxes `m_j`.
    pub fn flux_div_from_moments(&self, moments: &[DVector<f64>]) -> Result<DVector<f64>> {
        if moments.len() != self.dim() {
            return Err(Error::Shape {
                context: "flux moments",
                expected: self.dim().to_string(),
                got: moments.len().to_string(),
            });
        }
        let mut out = DVector::zeros(self.n_rho());
        for (axis, m) in moments.iter().enumerate() {
            check_len("flux moment", self.n_g(), m.len())?;
            let d = self.grid.diff(axis, Side::Minus, m.as_slice())?;
            for (o, v) in out.iter_mut().zip(d) {
                *o += v;
            }
        }
        Ok(out / self.quad.measure())
    }

    /// `J(rho) = sum_j (D^(j),+ rho) (Omega^(j))^T` in factored form.
    pub fn density_grad(&self, rho: &DVector<f64>) -> Result<DensityGradient> {
        check_len("density_grad", self.n_rho(), rho.len())?;
        let mut cols = Vec::with_capacity(self.dim());
        let mut rows = Vec::with_capacity(self.dim());
        for axis in 0..self.dim() {
            cols.push(DVector::from_vec(self.grid.diff(axis, Side::Plus, rho.as_slice())?));
            rows.push(DVector::from_column_slice(self.quad.omega(axis)));
        }
        Ok(DensityGradient { cols, rows })
    }

    /// `<u, v> = (prod dx) u^T v`.
    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        check_len("inner", u.len(), v.len())?;
        Ok(self.grid.cell_volume() * u.dot(v))
    }

    pub fn norm(&self, u: &DVector<f64>) -> f64 {
        (self.grid.cell_volume() * u.norm_squared()).sqrt()
    }

    /// `<F1, F2>_w = (prod dx) tr(F1 M^2 F2^T)`.
    pub fn inner_w(&self, f1: &DMatrix<f64>, f2: &DMatrix<f64>) -> Result<f64> {
        check_shape("inner_w", f1.shape(), f2.shape())?;
        check_len("inner_w angular size", self.n_omega(), f1.ncols())?;
        let w = self.quad.weights();
        let s: f64 = (0..f1.ncols())
            .map(|k| w[k] * f1.column(k).dot(&f2.column(k)))
            .sum();
        Ok(self.grid.cell_volume() * s)
    }

    pub fn norm_w(&self, f: &DMatrix<f64>) -> Result<f64> {
        Ok(self.inner_w(f, f)?.max(0.0).sqrt())
    }

    /// Diagonal of the angular metric used by a low-rank representation:
    /// `M` in weighted mode, the identity otherwise.
    pub fn metric(&self, weighted: bool) -> Vec<f64> {
        if weighted {
            self.sqrt_w.clone()
        } else {
            vec![1.0; self.n_omega()]
        }
    }

    /// `ℬ`: the projected advection of a factored `G m = X S V^T`,
    /// `A(X S V^T m^{-1}) (I - w 1^T/|D|) m`, returned in factored form.
    ///
    /// `m` is the metric diagonal ([`metric`](Self::metric)); `s` may be
    /// rectangular.
    pub fn advect_projected(
        &self,
        x: &DMatrix<f64>,
        s: &DMatrix<f64>,
        v: &DMatrix<f64>,
        weighted: bool,
    ) -> Result<Factored> {
        check_len("advect_projected X rows", self.n_g(), x.nrows())?;
        check_len("advect_projected V rows", self.n_omega(), v.nrows())?;
        check_shape("advect_projected S", (x.ncols(), v.ncols()), s.shape())?;
        let m = self.metric(weighted);
        let xs_terms = self.spatial_shifts(x);
        let b = self.angular_blocks(v, &m);
        let r = v.ncols();
        let d = self.dim();
        let mut left = DMatrix::zeros(self.n_g(), 2 * d * r);
        let mut right = DMatrix::zeros(self.n_omega(), 2 * d * r);
        for axis in 0..d {
            let (dm, dp) = &xs_terms[axis];
            let (bp, bm) = &b[axis];
            let base = 2 * axis * r;
            left.columns_mut(base, r).copy_from(&(dm * s));
            right.columns_mut(base, r).copy_from(bp);
            left.columns_mut(base + r, r).copy_from(&(dp * s));
            right.columns_mut(base + r, r).copy_from(bm);
        }
        Ok(Factored { left, right })
    }

    /// `(D^(j),- X, D^(j),+ X)` per axis, full-cell differences.
    pub(crate) fn spatial_shifts(&self, x: &DMatrix<f64>) -> Vec<(DMatrix<f64>, DMatrix<f64>)> {
        (0..self.dim())
            .map(|axis| {
                (
                    self.grid.shift_diff_cols(axis, Side::Minus, x),
                    self.grid.shift_diff_cols(axis, Side::Plus, x),
                )
            })
            .collect()
    }

    /// `(B^(j),+, B^(j),-)` per axis with `B^± = m P^T Q^± m^{-1} V`,
    /// `P^T z = z - 1 (w^T z)/|D|`.
    pub(crate) fn angular_blocks(
        &self,
        v: &DMatrix<f64>,
        m: &[f64],
    ) -> Vec<(DMatrix<f64>, DMatrix<f64>)> {
        let w = self.quad.weights();
        let inv_measure = 1.0 / self.quad.measure();
        let n = self.n_omega();
        let block = |q: &[f64]| {
            let mut out = DMatrix::zeros(n, v.ncols());
            for c in 0..v.ncols() {
                let col = v.column(c);
                let mut mean = 0.0;
                for k in 0..n {
                    let z = q[k] * col[k] / m[k];
                    out[(k, c)] = z;
                    mean += w[k] * z;
                }
                mean *= inv_measure;
                for k in 0..n {
                    out[(k, c)] = m[k] * (out[(k, c)] - mean);
                }
            }
            out
        };
        (0..self.dim())
            .map(|axis| (block(&self.q_plus[axis]), block(&self.q_minus[axis])))
            .collect()
    }
}

/// `J(rho) = sum_j c_j r_j^T`, with spatial columns `c_j` on the fluctuation
/// lattice and angular rows `r_j = Omega^(j)`.
#[derive(Clone, Debug)]
pub struct DensityGradient {
    pub cols: Vec<DVector<f64>>,
    pub rows: Vec<DVector<f64>>,
}

impl DensityGradient {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.cols[0].len(), self.rows[0].len());
        for (c, r) in self.cols.iter().zip(&self.rows) {
            out += c * r.transpose();
        }
        out
    }

    /// `J diag(m) Y` without forming `J`.
    pub fn apply_right(&self, m: &[f64], y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.cols[0].len(), y.ncols());
        for (c, r) in self.cols.iter().zip(&self.rows) {
            let rm = DVector::from_iterator(r.len(), r.iter().zip(m).map(|(a, b)| a * b));
            let coeff = rm.transpose() * y;
            out += c * coeff;
        }
        out
    }

    /// `diag(m) J^T X` without forming `J`.
    pub fn apply_left_transpose(&self, m: &[f64], x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows[0].len(), x.ncols());
        for (c, r) in self.cols.iter().zip(&self.rows) {
            let rm = DVector::from_iterator(r.len(), r.iter().zip(m).map(|(a, b)| a * b));
            let coeff = c.transpose() * x;
            out += rm * coeff;
        }
        out
    }
}

/// A matrix stored as `left * right^T`.
#[derive(Clone, Debug)]
pub struct Factored {
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
}

impl Factored {
    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.left * self.right.transpose()
    }
}
