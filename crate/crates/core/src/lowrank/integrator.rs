//! K-, L- and S-steps and the fixed-rank / augmented integrators.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::qr::{constrained_qr, fix_column_signs, orthonormal_basis};
use super::{constraint_vector, Integrator, LowRankConfig, LowRankState};
use crate::error::{check_len, Error, Result};
use crate::fullrank::SolverConfig;
use crate::grid::Side;
use crate::material::MaterialField;
use crate::ops::{DensityGradient, PhaseSpace};

/// Intermediate quantities of one step, exposed for verification.
#[derive(Clone, Debug)]
pub struct StepDetail {
    /// `K^{n+1}` from the K-step.
    pub k: DMatrix<f64>,
    /// `L^{n+1}` from the L-step.
    pub l: DMatrix<f64>,
    /// Spatial basis used by the Galerkin step (augmented for aBUG).
    pub x_hat: DMatrix<f64>,
    /// Angular basis used by the Galerkin step.
    pub v_hat: DMatrix<f64>,
    /// `X_hat^T X^n S^n (V^n)^T V_hat`.
    pub s_tilde: DMatrix<f64>,
    /// Galerkin solution before any truncation.
    pub s_galerkin: DMatrix<f64>,
}

struct Context<'a> {
    ps: &'a PhaseSpace,
    cfg: &'a SolverConfig,
    m: Vec<f64>,
    damping: DVector<f64>,
    r: DVector<f64>,
    grad: DensityGradient,
    source: Option<(f64, &'a DMatrix<f64>, &'a DMatrix<f64>)>,
}

impl<'a> Context<'a> {
    fn new(
        ps: &'a PhaseSpace,
        material: &'a MaterialField,
        cfg: &'a SolverConfig,
        weighted: bool,
        rho: &DVector<f64>,
        t_next: f64,
    ) -> Result<Self> {
        cfg.validate()?;
        material.check_micro_source(ps.n_g(), ps.n_omega())?;
        Ok(Context {
            ps,
            cfg,
            m: ps.metric(weighted),
            damping: material.micro_damping(cfg.epsilon),
            r: material.implicit_factor(cfg.dt, cfg.epsilon),
            grad: ps.density_grad(rho)?,
            source: material.source.micro_at(t_next),
        })
    }

    fn scaled_rows(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = v.clone();
        for (k, mut row) in out.row_iter_mut().enumerate() {
            row *= self.m[k];
        }
        out
    }

    /// `I/dt + X^T diag(sigma_s/eps^2 + sigma_a) X`.
    fn reduced_damping(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut dx = x.clone();
        for mut col in dx.column_iter_mut() {
            col.component_mul_assign(&self.damping);
        }
        let mut a = x.transpose() * dx;
        for i in 0..a.nrows() {
            a[(i, i)] += 1.0 / self.cfg.dt;
        }
        // symmetrize against roundoff before factorizing
        (&a + a.transpose()) * 0.5
    }

    fn k_step(&self, st: &LowRankState) -> DMatrix<f64> {
        let k = &st.x * &st.s;
        let inv_eps = 1.0 / self.cfg.epsilon;
        let e2 = self.cfg.epsilon * self.cfg.epsilon;
        let mut rhs = &k / self.cfg.dt;
        let blocks = self.ps.angular_blocks(&st.v, &self.m);
        let shifts = self.ps.spatial_shifts(&k);
        for ((dm, dp), (bp, bm)) in shifts.iter().zip(&blocks) {
            rhs -= dm * (bp.transpose() * &st.v) * inv_eps;
            rhs -= dp * (bm.transpose() * &st.v) * inv_eps;
        }
        rhs -= self.grad.apply_right(&self.m, &st.v) / e2;
        if let Some((c, u, w)) = self.source {
            rhs += u * (w.transpose() * self.scaled_rows(&st.v)) * c;
        }
        for mut col in rhs.column_iter_mut() {
            col.component_mul_assign(&self.r);
        }
        rhs
    }

    fn l_step(&self, st: &LowRankState) -> Result<DMatrix<f64>> {
        let l = &st.v * st.s.transpose();
        let inv_eps = 1.0 / self.cfg.epsilon;
        let e2 = self.cfg.epsilon * self.cfg.epsilon;
        let mut rhs = &l / self.cfg.dt;
        let blocks = self.ps.angular_blocks(&l, &self.m);
        let shifts = self.ps.spatial_shifts(&st.x);
        for ((dm, dp), (bp, bm)) in shifts.iter().zip(&blocks) {
            rhs -= bp * (dm.transpose() * &st.x) * inv_eps;
            rhs -= bm * (dp.transpose() * &st.x) * inv_eps;
        }
        rhs -= self.grad.apply_left_transpose(&self.m, &st.x) / e2;
        if let Some((c, u, w)) = self.source {
            rhs += self.scaled_rows(w) * (u.transpose() * &st.x) * c;
        }
        let a = self.reduced_damping(&st.x);
        let chol = cholesky(a, "L-step")?;
        Ok(chol.solve(&rhs.transpose()).transpose())
    }

    /// Galerkin step on the bases `(xh, vh)`; returns `(S_tilde, S^{n+1})`.
    fn s_step(
        &self,
        st: &LowRankState,
        xh: &DMatrix<f64>,
        vh: &DMatrix<f64>,
    ) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let s_tilde = (xh.transpose() * &st.x) * &st.s * (st.v.transpose() * vh);
        let inv_eps = 1.0 / self.cfg.epsilon;
        let e2 = self.cfg.epsilon * self.cfg.epsilon;
        let mut rhs = &s_tilde / self.cfg.dt;
        let blocks = self.ps.angular_blocks(vh, &self.m);
        let shifts = self.ps.spatial_shifts(xh);
        for ((dm, dp), (bp, bm)) in shifts.iter().zip(&blocks) {
            let xm = xh.transpose() * dm;
            let xp = xh.transpose() * dp;
            rhs -= xm * &s_tilde * (bp.transpose() * vh) * inv_eps;
            rhs -= xp * &s_tilde * (bm.transpose() * vh) * inv_eps;
        }
        rhs -= xh.transpose() * self.grad.apply_right(&self.m, vh) / e2;
        if let Some((c, u, w)) = self.source {
            rhs += (xh.transpose() * u) * (w.transpose() * self.scaled_rows(vh)) * c;
        }
        let a = self.reduced_damping(xh);
        let chol = cholesky(a, "S-step")?;
        Ok((s_tilde, chol.solve(&rhs)))
    }
}

fn cholesky(a: DMatrix<f64>, context: &'static str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(a).ok_or(Error::Singular(context))
}

fn check_inputs(ps: &PhaseSpace, st: &LowRankState, rho: &DVector<f64>) -> Result<()> {
    st.check(ps)?;
    check_len("density for J", ps.n_rho(), rho.len())
}

/// Orthonormal angular basis for `span(l)`. The weighted factorization
/// also imposes the zero-density constraint; the unweighted one only
/// orthonormalizes.
fn angular_basis(ps: &PhaseSpace, l: &DMatrix<f64>, weighted: bool) -> Result<DMatrix<f64>> {
    if weighted {
        constrained_qr(l, &constraint_vector(ps, true))
    } else {
        let mut v = orthonormal_basis(l);
        if v.ncols() > l.ncols() {
            v = v.columns(0, l.ncols()).into_owned();
        }
        Ok(v)
    }
}

/// One fixed-rank BUG step, returning the intermediate quantities as well.
///
/// `rho_for_j` is the density entering `J`: `rho^n` for IMEX coupling,
/// `rho^{n+1}` for IMEX-S coupling.
pub fn bug_step_detailed(
    ps: &PhaseSpace,
    material: &MaterialField,
    cfg: &SolverConfig,
    state: &LowRankState,
    rho_for_j: &DVector<f64>,
    t_next: f64,
) -> Result<(LowRankState, StepDetail)> {
    check_inputs(ps, state, rho_for_j)?;
    let ctx = Context::new(ps, material, cfg, state.weighted, rho_for_j, t_next)?;
    let k = ctx.k_step(state);
    let l = ctx.l_step(state)?;
    let x_new = orthonormal_basis(&k);
    let v_new = angular_basis(ps, &l, state.weighted)?;
    let (s_tilde, s_new) = ctx.s_step(state, &x_new, &v_new)?;
    let next = LowRankState {
        x: x_new.clone(),
        s: s_new.clone(),
        v: v_new.clone(),
        weighted: state.weighted,
    };
    Ok((
        next,
        StepDetail {
            k,
            l,
            x_hat: x_new,
            v_hat: v_new,
            s_tilde,
            s_galerkin: s_new,
        },
    ))
}

/// One fixed-rank BUG step.
pub fn bug_step(
    ps: &PhaseSpace,
    material: &MaterialField,
    cfg: &SolverConfig,
    state: &LowRankState,
    rho_for_j: &DVector<f64>,
    t_next: f64,
) -> Result<LowRankState> {
    bug_step_detailed(ps, material, cfg, state, rho_for_j, t_next).map(|(s, _)| s)
}

/// Singular value decomposition with descending singular values.
fn sorted_svd(s: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let svd = s.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors");
    let vt = svd.v_t.expect("right singular vectors");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let uu = DMatrix::from_columns(&order.iter().map(|&i| u.column(i)).collect::<Vec<_>>());
    let vv = DMatrix::from_columns(&order.iter().map(|&i| vt.row(i).transpose()).collect::<Vec<_>>());
    let sv = order.iter().map(|&i| svd.singular_values[i]).collect();
    (uu, sv, vv)
}

/// Smallest `k` whose discarded tail satisfies
/// `sqrt(sum_{i >= k} s_i^2) <= tau * reference`.
pub(crate) fn truncation_rank(sv: &[f64], tau: f64, reference: f64, min_rank: usize) -> usize {
    let mut tail = 0.0;
    let mut k = sv.len();
    while k > min_rank {
        let next = tail + sv[k - 1] * sv[k - 1];
        if next.sqrt() > tau * reference {
            break;
        }
        tail = next;
        k -= 1;
    }
    k
}

/// Normalizes basis signs and absorbs the flips into `S`.
fn canonical_signs(x: &mut DMatrix<f64>, s: &mut DMatrix<f64>, v: &mut DMatrix<f64>) {
    let sx = fix_column_signs(x);
    for (i, sign) in sx.iter().enumerate() {
        if *sign < 0.0 {
            s.row_mut(i).neg_mut();
        }
    }
    let sv = fix_column_signs(v);
    for (j, sign) in sv.iter().enumerate() {
        if *sign < 0.0 {
            s.column_mut(j).neg_mut();
        }
    }
}

/// Truncates the Galerkin solution on `(xh, vh)`; the first `pinned`
/// columns of each basis are kept and only the trailing block of `S` is
/// compressed.
fn truncate(
    xh: &DMatrix<f64>,
    s: &DMatrix<f64>,
    vh: &DMatrix<f64>,
    tau: f64,
    pinned: usize,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let reference = s.norm();
    let (p, q) = s.shape();
    let d = pinned.min(p).min(q);
    let s_rr = s.view((d, d), (p - d, q - d)).into_owned();
    let (u, sv, w) = if s_rr.nrows() > 0 && s_rr.ncols() > 0 {
        sorted_svd(&s_rr)
    } else {
        (DMatrix::zeros(p - d, 0), Vec::new(), DMatrix::zeros(q - d, 0))
    };
    let min_rank = if d == 0 { 1 } else { 0 };
    let k = truncation_rank(&sv, tau, reference, min_rank).min(sv.len());
    let uk = u.columns(0, k).into_owned();
    let wk = w.columns(0, k).into_owned();
    let n = d + k;
    let mut x = DMatrix::zeros(xh.nrows(), n);
    let mut v = DMatrix::zeros(vh.nrows(), n);
    let mut s_new = DMatrix::zeros(n, n);
    if d > 0 {
        x.columns_mut(0, d).copy_from(&xh.columns(0, d));
        v.columns_mut(0, d).copy_from(&vh.columns(0, d));
        s_new.view_mut((0, 0), (d, d)).copy_from(&s.view((0, 0), (d, d)));
        let s_pr = s.view((0, d), (d, q - d)) * &wk;
        s_new.view_mut((0, d), (d, k)).copy_from(&s_pr);
        let s_rp = uk.transpose() * s.view((d, 0), (p - d, d));
        s_new.view_mut((d, 0), (k, d)).copy_from(&s_rp);
    }
    x.columns_mut(d, k).copy_from(&(xh.columns(d, p - d) * &uk));
    v.columns_mut(d, k).copy_from(&(vh.columns(d, q - d) * &wk));
    for i in 0..k {
        s_new[(d + i, d + i)] = sv[i];
    }
    (x, s_new, v)
}

/// One augmented BUG step (`Abug`) or its diffusion-limit enriched variant
/// (`ApAbug`), followed by truncation at relative tolerance `tau`.
pub fn abug_step(
    ps: &PhaseSpace,
    material: &MaterialField,
    cfg: &SolverConfig,
    lr: &LowRankConfig,
    state: &LowRankState,
    rho_for_j: &DVector<f64>,
    t_next: f64,
) -> Result<(LowRankState, StepDetail)> {
    lr.validate()?;
    check_inputs(ps, state, rho_for_j)?;
    let ctx = Context::new(ps, material, cfg, state.weighted, rho_for_j, t_next)?;
    let k = ctx.k_step(state);
    let l = ctx.l_step(state)?;
    let d = ps.dim();
    let enrich = lr.integrator == Integrator::ApAbug;
    let (extra_x, extra_v) = if enrich {
        if material.sigma_s_g.iter().any(|s| *s <= 0.0) {
            return Err(Error::InvalidMaterial(
                "enrichment needs sigma_s > 0 on the fluctuation lattice".into(),
            ));
        }
        let mut ex = DMatrix::zeros(ps.n_g(), d);
        let mut ev = DMatrix::zeros(ps.n_omega(), d);
        for axis in 0..d {
            let grad = ps.grid.diff(axis, Side::Plus, rho_for_j.as_slice())?;
            for i in 0..ps.n_g() {
                ex[(i, axis)] = -grad[i] / material.sigma_s_g[i];
            }
            for kk in 0..ps.n_omega() {
                ev[(kk, axis)] = ctx.m[kk] * ps.quad.omega(axis)[kk];
            }
        }
        (ex, ev)
    } else {
        (DMatrix::zeros(ps.n_g(), 0), DMatrix::zeros(ps.n_omega(), 0))
    };
    let xcat = hcat(&[&extra_x, &k, &state.x]);
    let vcat = hcat(&[&extra_v, &l, &state.v]);
    let xh = orthonormal_basis(&xcat);
    let vh = angular_basis(ps, &vcat, state.weighted)?;
    let (s_tilde, s_gal) = ctx.s_step(state, &xh, &vh)?;
    let pinned = if enrich { d } else { 0 };
    let (mut x, mut s, mut v) = truncate(&xh, &s_gal, &vh, lr.tau, pinned);
    let rank = x.ncols();
    if rank > lr.max_rank {
        return Err(Error::RankOverflow {
            rank,
            max_rank: lr.max_rank,
        });
    }
    canonical_signs(&mut x, &mut s, &mut v);
    Ok((
        LowRankState {
            x,
            s,
            v,
            weighted: state.weighted,
        },
        StepDetail {
            k,
            l,
            x_hat: xh,
            v_hat: vh,
            s_tilde,
            s_galerkin: s_gal,
        },
    ))
}

fn hcat(parts: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = parts[0].nrows();
    let cols: usize = parts.iter().map(|p| p.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for p in parts {
        out.columns_mut(at, p.ncols()).copy_from(*p);
        at += p.ncols();
    }
    out
}

/// Per-axis fluxes `b Q^(j) w` of the explicit fluctuation part
/// `b = G/dt - (1/eps) A(G)(I - w 1^T/|D|) + Psi`, computed from the factors.
pub(crate) fn explicit_flux_moments(
    ps: &PhaseSpace,
    material: &MaterialField,
    cfg: &SolverConfig,
    state: &LowRankState,
    t_next: f64,
) -> Result<Vec<DVector<f64>>> {
    let m = ps.metric(state.weighted);
    let b = ps.advect_projected(&state.x, &state.s, &state.v, state.weighted)?;
    let source = material.source.micro_at(t_next);
    let mut out = Vec::with_capacity(ps.dim());
    for axis in 0..ps.dim() {
        let qw: Vec<f64> = (0..ps.n_omega())
            .map(|k| ps.quad.omega(axis)[k] * ps.quad.weights()[k])
            .collect();
        let qw_m = DVector::from_iterator(ps.n_omega(), qw.iter().zip(&m).map(|(a, b)| a / b));
        let mut mom = state.flux_moment(ps, axis) / cfg.dt;
        mom -= &b.left * (b.right.transpose() * &qw_m) / cfg.epsilon;
        if let Some((c, u, w)) = source {
            mom += u * (w.transpose() * DVector::from_vec(qw)) * c;
        }
        out.push(mom);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_rule() {
        let sv = [3.0, 1.0, 1e-3, 1e-6];
        let total = sv.iter().map(|s| s * s).sum::<f64>().sqrt();
        assert_eq!(truncation_rank(&sv, 0.9, total, 1), 1);
        assert_eq!(truncation_rank(&sv, 1e-2, total, 1), 2);
        assert_eq!(truncation_rank(&sv, 1e-5, total, 1), 3);
        assert_eq!(truncation_rank(&sv, 1e-9, total, 1), 4);
        assert_eq!(truncation_rank(&[0.0, 0.0], 1e-5, 0.0, 1), 1);
        assert_eq!(truncation_rank(&[0.0], 1e-5, 0.0, 0), 0);
    }

    #[test]
    fn pinned_truncation_keeps_leading_columns() {
        let xh = orthonormal_basis(&DMatrix::from_fn(10, 4, |i, j| ((i + 1) * (j + 2)) as f64 + (i * j) as f64 * 0.1 + if i == j { 1.0 } else { 0.0 }));
        let vh = orthonormal_basis(&DMatrix::from_fn(6, 4, |i, j| if i == j { 1.0 } else { 0.01 * (i + j) as f64 }));
        let mut s = DMatrix::zeros(4, 4);
        s[(0, 0)] = 1.0;
        s[(1, 1)] = 2.0;
        s[(2, 2)] = 1e-9;
        let (x, s2, v) = truncate(&xh, &s, &vh, 1e-5, 1);
        assert_eq!(x.ncols(), 2);
        assert!((x.column(0) - xh.column(0)).amax() < 1e-15);
        assert!((v.column(0) - vh.column(0)).amax() < 1e-15);
        let before = &xh * &s * vh.transpose();
        let after = &x * &s2 * v.transpose();
        assert!((before - after).amax() < 1e-8);
    }
}
