//! Low-rank representation of the fluctuation and the BUG-type integrators.
//!
//! In the default (weighted) mode the factors represent `G M = X S V^T` with
//! `M = diag(sqrt(w))`, so that orthonormality of `V` matches the weighted
//! energy norm. The unweighted mode stores `G = X S V^T` directly; it exists
//! to reproduce the energy growth such a mismatched factorization can show.
//!
//! Both modes keep the zero-density constraint `G w = 0` by restricting the
//! angular basis to the orthogonal complement of `m^{-1} w` (`M 1` when
//! weighted, `w` when not).

mod integrator;
mod qr;

pub use integrator::{abug_step, bug_step, bug_step_detailed, StepDetail};
pub(crate) use integrator::explicit_flux_moments;
pub use qr::{constrained_qr, orthonormal_basis};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, check_shape, Error, Result};
use crate::ops::PhaseSpace;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Integrator {
    /// Fixed-rank basis update & Galerkin.
    Bug,
    /// Augmented BUG with relative-tolerance truncation.
    Abug,
    /// Augmented BUG with diffusion-limit enrichment and protected columns.
    ApAbug,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowRankConfig {
    pub integrator: Integrator,
    /// Fixed rank for BUG; initial rank for the augmented variants.
    pub rank: usize,
    /// Relative truncation tolerance of the augmented variants.
    pub tau: f64,
    pub max_rank: usize,
}

impl LowRankConfig {
    pub fn bug(rank: usize) -> Self {
        LowRankConfig {
            integrator: Integrator::Bug,
            rank,
            tau: 1e-5,
            max_rank: usize::MAX,
        }
    }

    pub fn abug(rank: usize, tau: f64) -> Self {
        LowRankConfig {
            integrator: Integrator::Abug,
            rank,
            tau,
            max_rank: usize::MAX,
        }
    }

    pub fn ap_abug(rank: usize, tau: f64) -> Self {
        LowRankConfig {
            integrator: Integrator::ApAbug,
            ..Self::abug(rank, tau)
        }
    }

    pub fn with_max_rank(mut self, max_rank: usize) -> Self {
        self.max_rank = max_rank;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.rank == 0 {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidConfig(format!("tau must be positive, got {}", self.tau)));
        }
        if self.max_rank == 0 {
            return Err(Error::InvalidConfig("max_rank must be at least 1".into()));
        }
        Ok(())
    }
}

/// Factors `X S V^T` of `G m` with `m = M` (weighted) or `m = I`.
#[derive(Clone, Debug)]
pub struct LowRankState {
    pub x: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub weighted: bool,
}

/// Largest rank a weighted state on `ps` can carry.
pub fn rank_cap(ps: &PhaseSpace) -> usize {
    rank_cap_for(ps, true)
}

/// As [`rank_cap`]; unweighted bases are unconstrained and may span every
/// direction.
pub fn rank_cap_for(ps: &PhaseSpace, weighted: bool) -> usize {
    let n_omega = if weighted { ps.n_omega() - 1 } else { ps.n_omega() };
    ps.n_g().min(n_omega)
}

/// Constraint vector `m^{-1} w` for the angular basis.
pub fn constraint_vector(ps: &PhaseSpace, weighted: bool) -> Vec<f64> {
    if weighted {
        ps.sqrt_weights().to_vec()
    } else {
        ps.quad.weights().to_vec()
    }
}

impl LowRankState {
    pub fn new(x: DMatrix<f64>, s: DMatrix<f64>, v: DMatrix<f64>, weighted: bool) -> Result<Self> {
        check_shape("low-rank S", (x.ncols(), v.ncols()), s.shape())?;
        Ok(LowRankState { x, s, v, weighted })
    }

    /// Number of retained basis pairs (`min` of the two basis sizes).
    pub fn rank(&self) -> usize {
        self.x.ncols().min(self.v.ncols())
    }

    /// `S = 0` with deterministic orthonormal bases from a seeded generator.
    pub fn seeded_zero(ps: &PhaseSpace, rank: usize, weighted: bool, seed: u64) -> Result<Self> {
        let r = rank.min(rank_cap(ps));
        if r == 0 {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |rows: usize| DMatrix::from_fn(rows, r, |_, _| rng.gen_range(-0.5..0.5));
        let x = orthonormal_basis(&draw(ps.n_g()));
        let v = constrained_qr(&draw(ps.n_omega()), &constraint_vector(ps, weighted))?;
        Ok(LowRankState {
            s: DMatrix::zeros(x.ncols(), v.ncols()),
            x,
            v,
            weighted,
        })
    }

    /// Factorizes a dense fluctuation by a truncated SVD of `G m`. Directions
    /// beyond the numerical rank are completed inside the constraint
    /// subspace, so the result always satisfies it exactly.
    pub fn from_dense(ps: &PhaseSpace, g: &DMatrix<f64>, rank: usize, weighted: bool) -> Result<Self> {
        check_shape("from_dense", (ps.n_g(), ps.n_omega()), g.shape())?;
        let r = rank.min(rank_cap(ps));
        if r == 0 {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        let m = ps.metric(weighted);
        let c = DVector::from_vec(constraint_vector(ps, weighted));
        let chat = &c / c.norm();
        let mut gm = g.clone();
        for (k, mut col) in gm.column_iter_mut().enumerate() {
            col *= m[k];
        }
        let proj = &gm * &chat;
        gm.ger(-1.0, &proj, &chat, 1.0);
        let svd = gm.clone().svd(true, true);
        let u = svd.u.expect("left singular vectors");
        let vt = svd.v_t.expect("right singular vectors");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let keep = &order[..r.min(order.len())];
        let x_raw = DMatrix::from_columns(&keep.iter().map(|&i| u.column(i)).collect::<Vec<_>>());
        let v_raw = DMatrix::from_columns(
            &keep.iter().map(|&i| vt.row(i).transpose()).collect::<Vec<_>>(),
        );
        let x = orthonormal_basis(&x_raw);
        let v = constrained_qr(&v_raw, c.as_slice())?;
        let s = x.transpose() * &gm * &v;
        Ok(LowRankState { x, s, v, weighted })
    }

    /// Dense `G`: `X S V^T M^{-1}` (weighted) or `X S V^T`.
    pub fn reconstruct(&self, ps: &PhaseSpace) -> DMatrix<f64> {
        let mut g = &self.x * (&self.s * self.v.transpose());
        if self.weighted {
            for (k, mut col) in g.column_iter_mut().enumerate() {
                col /= ps.sqrt_weights()[k];
            }
        }
        g
    }

    /// `||G||_w^2` from the factors.
    pub fn norm_w_squared(&self, ps: &PhaseSpace) -> f64 {
        let vol = ps.grid.cell_volume();
        if self.weighted {
            vol * self.s.norm_squared()
        } else {
            let mut vm = self.v.clone();
            for (k, mut row) in vm.row_iter_mut().enumerate() {
                row *= ps.sqrt_weights()[k];
            }
            vol * (&self.s * vm.transpose()).norm_squared()
        }
    }

    /// `||G w||_inf` from the factors.
    pub fn zero_density_residual(&self, ps: &PhaseSpace) -> f64 {
        let c = DVector::from_vec(constraint_vector(ps, self.weighted));
        let coeff = &self.s * (self.v.transpose() * c);
        (&self.x * coeff).amax()
    }

    /// Largest deviation of `X^T X` and `V^T V` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let ex = (self.x.transpose() * &self.x - DMatrix::identity(self.x.ncols(), self.x.ncols())).amax();
        let ev = (self.v.transpose() * &self.v - DMatrix::identity(self.v.ncols(), self.v.ncols())).amax();
        ex.max(ev)
    }

    /// `|c^T V|_inf` for the constraint vector `c`.
    pub fn angular_constraint_error(&self, ps: &PhaseSpace) -> f64 {
        let c = DVector::from_vec(constraint_vector(ps, self.weighted));
        (self.v.transpose() * c).amax()
    }

    /// `G Q^(j) w` from the factors, without reconstructing `G`.
    pub fn flux_moment(&self, ps: &PhaseSpace, axis: usize) -> DVector<f64> {
        let a = self.angular_moment(ps, axis);
        &self.x * (&self.s * a)
    }

    /// `V^T m^{-1} Q^(j) w`.
    pub(crate) fn angular_moment(&self, ps: &PhaseSpace, axis: usize) -> DVector<f64> {
        let m = ps.metric(self.weighted);
        let qw = DVector::from_iterator(
            ps.n_omega(),
            (0..ps.n_omega()).map(|k| ps.quad.omega(axis)[k] * ps.quad.weights()[k] / m[k]),
        );
        self.v.transpose() * qw
    }

    pub(crate) fn check(&self, ps: &PhaseSpace) -> Result<()> {
        check_len("low-rank X rows", ps.n_g(), self.x.nrows())?;
        check_len("low-rank V rows", ps.n_omega(), self.v.nrows())?;
        check_shape("low-rank S", (self.x.ncols(), self.v.ncols()), self.s.shape())
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(self.s.iter()).chain(self.v.iter()).all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::QuadratureSet;
    use crate::grid::StaggeredGrid;

    fn ps() -> PhaseSpace {
        PhaseSpace::new(
            StaggeredGrid::new_1d((0.0, 1.0), 8).unwrap(),
            QuadratureSet::gauss_legendre_1d(8).unwrap(),
        )
        .unwrap()
    }

    fn constrained_dense(ps: &PhaseSpace, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = DMatrix::from_fn(ps.n_g(), ps.n_omega(), |_, _| rng.gen_range(-1.0..1.0));
        ps.project_right(&mut g);
        g
    }

    #[test]
    fn unweighted_cap_counts_every_direction() {
        let ps = ps();
        assert_eq!(rank_cap(&ps), 7);
        assert_eq!(rank_cap_for(&ps, false), 8);
    }

    #[test]
    fn full_rank_factorization_is_exact() {
        let ps = ps();
        let g = constrained_dense(&ps, 1);
        for weighted in [true, false] {
            let st = LowRankState::from_dense(&ps, &g, 100, weighted).unwrap();
            assert_eq!(st.rank(), rank_cap(&ps));
            assert!((st.reconstruct(&ps) - &g).amax() < 1e-12);
            assert!(st.orthonormality_error() < 1e-12);
            assert!(st.angular_constraint_error(&ps) < 1e-13);
            let dense = ps.norm_w(&g).unwrap().powi(2);
            assert!((st.norm_w_squared(&ps) - dense).abs() < 1e-12 * dense);
        }
    }

    #[test]
    fn singular_values_survive_round_trip() {
        let ps = ps();
        let g = constrained_dense(&ps, 2);
        let st = LowRankState::from_dense(&ps, &g, 3, true).unwrap();
        let g2 = st.reconstruct(&ps);
        let again = LowRankState::from_dense(&ps, &g2, 3, true).unwrap();
        let mut a: Vec<f64> = st.s.singular_values().iter().copied().collect();
        let mut b: Vec<f64> = again.s.singular_values().iter().copied().collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn seeded_zero_is_deterministic() {
        let ps = ps();
        let a = LowRankState::seeded_zero(&ps, 3, true, 42).unwrap();
        let b = LowRankState::seeded_zero(&ps, 3, true, 42).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.v, b.v);
        assert_eq!(a.reconstruct(&ps).amax(), 0.0);
        assert_eq!(a.zero_density_residual(&ps), 0.0);
        assert!(a.angular_constraint_error(&ps) < 1e-14);
    }

    #[test]
    fn factored_moments_match_dense() {
        let ps = ps();
        let g = constrained_dense(&ps, 5);
        let st = LowRankState::from_dense(&ps, &g, 4, true).unwrap();
        let gd = st.reconstruct(&ps);
        let dense = ps.flux_moment(&gd, 0);
        assert!((st.flux_moment(&ps, 0) - dense).amax() < 1e-12);
        let r = st.zero_density_residual(&ps);
        let rd = (&gd * ps.quad.weights_vec()).amax();
        assert!((r - rd).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(LowRankConfig::bug(0).validate().is_err());
        assert!(LowRankConfig::abug(2, 0.0).validate().is_err());
        assert!(LowRankConfig::ap_abug(2, 1e-5).validate().is_ok());
    }
}
