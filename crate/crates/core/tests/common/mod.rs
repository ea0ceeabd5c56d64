//! Shared oracles and random inputs for the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aplr::angular::QuadratureSet;
use aplr::fullrank::SolverConfig;
use aplr::grid::{Lattice, Side, StaggeredGrid};
use aplr::lowrank::StepDetail;
use aplr::material::MaterialField;
use aplr::ops::PhaseSpace;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn phase_space_1d(nx: usize, n_omega: usize) -> PhaseSpace {
    PhaseSpace::new(
        StaggeredGrid::new_1d((0.0, 1.0), nx).unwrap(),
        QuadratureSet::gauss_legendre_1d(n_omega).unwrap(),
    )
    .unwrap()
}

pub fn phase_space_2d(nx: usize, ny: usize, n_polar: usize) -> PhaseSpace {
    PhaseSpace::new(
        StaggeredGrid::new_2d([(0.0, 1.0), (-0.5, 1.5)], [nx, ny]).unwrap(),
        QuadratureSet::chebyshev_legendre_2d(n_polar).unwrap(),
    )
    .unwrap()
}

/// A small random phase space, 1D or 2D.
pub fn random_phase_space(rng: &mut ChaCha8Rng) -> PhaseSpace {
    if rng.gen_bool(0.5) {
        let nx = rng.gen_range(3..12);
        let m = 2 * rng.gen_range(1..5);
        phase_space_1d(nx, m)
    } else {
        let nx = rng.gen_range(3..7);
        let ny = rng.gen_range(3..7);
        phase_space_2d(nx, ny, rng.gen_range(2..4))
    }
}

/// A random fluctuation with zero angular density, `G w = 0`.
pub fn random_constrained_g(rng: &mut ChaCha8Rng, ps: &PhaseSpace) -> DMatrix<f64> {
    let mut g = random_matrix(rng, ps.n_g(), ps.n_omega());
    ps.project_right(&mut g);
    g
}

fn half_key(grid: &StaggeredGrid, p: [f64; 2]) -> [i64; 2] {
    let mut key = [0i64; 2];
    for axis in 0..grid.dim() {
        let (lo, _) = grid.bounds(axis);
        let period = 2 * grid.cells(axis) as i64;
        let h = ((p[axis] - lo) / (0.5 * grid.spacing(axis))).round() as i64;
        key[axis] = h.rem_euclid(period);
    }
    key
}

fn lookup(grid: &StaggeredGrid, lattice: Lattice) -> HashMap<[i64; 2], usize> {
    (0..grid.points())
        .map(|k| (half_key(grid, grid.position(lattice, k)), k))
        .collect()
}

/// Difference matrix built from lattice coordinates alone: the value at a
/// target point `p` is `(f(p + a e) - f(p - b e)) / dx` with offsets `a`,
/// `b` in half cells, periodic wrap.
fn coordinate_difference(
    grid: &StaggeredGrid,
    from: Lattice,
    to: Lattice,
    axis: usize,
    ahead: f64,
    behind: f64,
) -> DMatrix<f64> {
    let src = lookup(grid, from);
    let n = grid.points();
    let dx = grid.spacing(axis);
    let mut m = DMatrix::zeros(n, n);
    for k in 0..n {
        let p = grid.position(to, k);
        let mut fwd = p;
        fwd[axis] += ahead * 0.5 * dx;
        let mut bwd = p;
        bwd[axis] -= behind * 0.5 * dx;
        let f = src[&half_key(grid, fwd)];
        let b = src[&half_key(grid, bwd)];
        m[(k, f)] += 1.0 / dx;
        m[(k, b)] -= 1.0 / dx;
    }
    m
}

/// Cross-lattice `D^(j),+` (density -> fluctuation) from coordinates.
pub fn oracle_grad(grid: &StaggeredGrid, axis: usize) -> DMatrix<f64> {
    coordinate_difference(grid, Lattice::Rho, Lattice::G, axis, 1.0, 1.0)
}

/// Cross-lattice `D^(j),-` (fluctuation -> density) from coordinates.
pub fn oracle_div(grid: &StaggeredGrid, axis: usize) -> DMatrix<f64> {
    coordinate_difference(grid, Lattice::G, Lattice::Rho, axis, 1.0, 1.0)
}

/// Full-cell forward (`Plus`) or backward (`Minus`) difference on the
/// fluctuation lattice, from coordinates.
pub fn oracle_shift(grid: &StaggeredGrid, axis: usize, side: Side) -> DMatrix<f64> {
    match side {
        Side::Plus => coordinate_difference(grid, Lattice::G, Lattice::G, axis, 2.0, 0.0),
        Side::Minus => coordinate_difference(grid, Lattice::G, Lattice::G, axis, 0.0, 2.0),
    }
}

fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(v))
}

pub struct DenseOps {
    pub n_rho: usize,
    pub n_g: usize,
    pub n_omega: usize,
    /// `vec(A(G) P)` as a matrix acting on `vec(G)` (column-major).
    pub advect_projected: DMatrix<f64>,
    /// `H` acting on `vec(G)`.
    pub flux_div: DMatrix<f64>,
    /// `vec(J(rho))` acting on `rho`.
    pub density_grad: DMatrix<f64>,
}

/// Kronecker-assembled dense operators of a phase space, independent of the
/// library's stencil tables.
pub fn dense_ops(ps: &PhaseSpace) -> DenseOps {
    let g = &ps.grid;
    let (n, m) = (ps.n_g(), ps.n_omega());
    let w = ps.quad.weights();
    let measure: f64 = w.iter().sum();
    let mut adv = DMatrix::zeros(n * m, n * m);
    let mut h = DMatrix::zeros(ps.n_rho(), n * m);
    let mut j = DMatrix::zeros(n * m, ps.n_rho());
    for axis in 0..ps.dim() {
        let om = ps.quad.omega(axis);
        let qp: Vec<f64> = om.iter().map(|o| o.max(0.0)).collect();
        let qm: Vec<f64> = om.iter().map(|o| o.min(0.0)).collect();
        adv += diag(&qp).kronecker(&oracle_shift(g, axis, Side::Minus));
        adv += diag(&qm).kronecker(&oracle_shift(g, axis, Side::Plus));
        let qw = DMatrix::from_row_slice(1, m, &om.iter().zip(w).map(|(o, w)| o * w).collect::<Vec<_>>());
        h += qw.kronecker(&oracle_div(g, axis)) / measure;
        j += DMatrix::from_column_slice(m, 1, om).kronecker(&oracle_grad(g, axis));
    }
    // right projection P = I - w 1^T / |D|: vec(F P) = (P^T (x) I) vec(F)
    let mut p = DMatrix::<f64>::identity(m, m);
    for r in 0..m {
        for c in 0..m {
            p[(r, c)] -= w[r] / measure;
        }
    }
    let proj = p.transpose().kronecker(&DMatrix::<f64>::identity(n, n));
    DenseOps {
        n_rho: ps.n_rho(),
        n_g: n,
        n_omega: m,
        advect_projected: proj * adv,
        flux_div: h,
        density_grad: j,
    }
}

pub fn vec_of(g: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(g.as_slice())
}

pub fn unvec(v: &DVector<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(rows, cols, v.as_slice())
}

/// Monolithic solve of one coupled step. With `implicit_density` the
/// fluctuation equation sees `J(rho^{n+1})` (IMEX-S); otherwise `J(rho^n)`
/// is moved to the right-hand side (IMEX).
pub fn block_oracle_step(
    ps: &PhaseSpace,
    material: &MaterialField,
    cfg: &SolverConfig,
    rho: &DVector<f64>,
    g: &DMatrix<f64>,
    t_next: f64,
    implicit_density: bool,
) -> (DVector<f64>, DMatrix<f64>) {
    let ops = dense_ops(ps);
    let (nr, ng, nm) = (ops.n_rho, ops.n_g, ops.n_omega);
    let size = nr + ng * nm;
    let (dt, eps) = (cfg.dt, cfg.epsilon);
    let e2 = eps * eps;
    let mut a = DMatrix::zeros(size, size);
    let mut b = DVector::zeros(size);
    for i in 0..nr {
        a[(i, i)] = 1.0 / dt + material.sigma_a_rho[i];
    }
    a.view_mut((0, nr), (nr, ng * nm)).copy_from(&ops.flux_div);
    for k in 0..nm {
        for i in 0..ng {
            let r = nr + k * ng + i;
            a[(r, r)] = 1.0 / dt + material.sigma_s_g[i] / e2 + material.sigma_a_g[i];
        }
    }
    let mut rhs_rho = rho / dt;
    if let Some(phi) = material.source.macro_at(t_next) {
        rhs_rho += phi;
    }
    let mut rhs_g = vec_of(g) / dt - &ops.advect_projected * vec_of(g) / eps;
    if let Some(psi) = material.source.micro_dense_at(t_next) {
        rhs_g += vec_of(&psi);
    }
    if implicit_density {
        a.view_mut((nr, 0), (ng * nm, nr)).copy_from(&(&ops.density_grad / e2));
    } else {
        rhs_g -= &ops.density_grad * rho / e2;
    }
    b.rows_mut(0, nr).copy_from(&rhs_rho);
    b.rows_mut(nr, ng * nm).copy_from(&rhs_g);
    let z = a.lu().solve(&b).expect("block system is nonsingular");
    let rho_new = z.rows(0, nr).into_owned();
    let g_new = unvec(&z.rows(nr, ng * nm).into_owned(), ng, nm);
    (rho_new, g_new)
}

/// `X_hat^T (R m) V_hat` for the dense residual `R` of the source-free
/// fluctuation equation at the Galerkin solution, and the scale it is
/// measured against.
pub fn galerkin_residual(
    ps: &PhaseSpace,
    material: &MaterialField,
    cfg: &SolverConfig,
    detail: &StepDetail,
    rho_for_j: &DVector<f64>,
    weighted: bool,
) -> (f64, f64) {
    let m = ps.metric(weighted);
    let ops = dense_ops(ps);
    let (ng, nm) = (ps.n_g(), ps.n_omega());
    let to_g = |s: &DMatrix<f64>| {
        let mut gm = &detail.x_hat * s * detail.v_hat.transpose();
        for (k, mut col) in gm.column_iter_mut().enumerate() {
            col /= m[k];
        }
        gm
    };
    let g_new = to_g(&detail.s_galerkin);
    let g_old = to_g(&detail.s_tilde);
    let (dt, eps) = (cfg.dt, cfg.epsilon);
    let e2 = eps * eps;
    let mut terms: Vec<DMatrix<f64>> = Vec::new();
    terms.push(&g_new / dt);
    terms.push(-&g_old / dt);
    terms.push(unvec(&(&ops.advect_projected * vec_of(&g_old)), ng, nm) / eps);
    let mut damp = g_new.clone();
    for mut col in damp.column_iter_mut() {
        for i in 0..ng {
            col[i] *= material.sigma_s_g[i] / e2 + material.sigma_a_g[i];
        }
    }
    terms.push(damp);
    terms.push(unvec(&(&ops.density_grad * rho_for_j), ng, nm) / e2);
    let project = |r: &DMatrix<f64>| {
        let mut rm = r.clone();
        for (k, mut col) in rm.column_iter_mut().enumerate() {
            col *= m[k];
        }
        detail.x_hat.transpose() * rm * &detail.v_hat
    };
    let total: DMatrix<f64> = terms.iter().fold(DMatrix::zeros(ng, nm), |acc, t| acc + t);
    let scale: f64 = terms.iter().map(|t| project(t).norm()).fold(0.0, f64::max);
    (project(&total).norm(), scale)
}

/// `((Q h)^2, C_B |D| sum_k |Omega_k| w_k h_k^2)` built by hand.
pub fn angular_moment_bound(ps: &PhaseSpace, axis: usize, h: &DVector<f64>) -> (f64, f64) {
    let w = ps.quad.weights();
    let om = ps.quad.omega(axis);
    let qh: f64 = (0..w.len()).map(|k| w[k] * om[k] * h[k]).sum();
    let measure: f64 = w.iter().sum();
    let c_b = (0..w.len()).map(|k| w[k] * om[k].abs()).sum::<f64>() / measure;
    let rhs: f64 = c_b * measure * (0..w.len()).map(|k| om[k].abs() * w[k] * h[k] * h[k]).sum::<f64>();
    (qh * qh, rhs)
}

/// `|D| <rho, H(G)> + <J(rho), G>_w` and the magnitude of its terms.
pub fn summation_by_parts(ps: &PhaseSpace, rho: &DVector<f64>, g: &DMatrix<f64>) -> (f64, f64) {
    let a = ps.quad.measure() * ps.inner(rho, &ps.flux_div(g).unwrap()).unwrap();
    let b = ps.inner_w(&ps.density_grad(rho).unwrap().to_dense(), g).unwrap();
    (a + b, a.abs() + b.abs())
}

fn scale_columns(f: &DMatrix<f64>, c: &[f64]) -> DMatrix<f64> {
    let mut out = f.clone();
    for (k, mut col) in out.column_iter_mut().enumerate() {
        col *= c[k];
    }
    out
}

/// `D^(j),+ G` on the fluctuation lattice, full-cell forward difference.
fn forward(ps: &PhaseSpace, axis: usize, g: &DMatrix<f64>) -> DMatrix<f64> {
    oracle_shift(&ps.grid, axis, Side::Plus) * g
}

/// `<A(G0), G1>_w - [sum_j (dx_j/2) <D+ G1 |Q|, D+ G1>_w - <A*(G1), G1 - G0>_w]`
/// and the magnitude of its terms.
pub fn advection_dissipation(ps: &PhaseSpace, g0: &DMatrix<f64>, g1: &DMatrix<f64>) -> (f64, f64) {
    let lhs = ps.inner_w(&ps.advect(g0).unwrap(), g1).unwrap();
    let mut dissipation = 0.0;
    for axis in 0..ps.dim() {
        let d = forward(ps, axis, g1);
        let abs_q: Vec<f64> = ps.quad.omega(axis).iter().map(|o| o.abs()).collect();
        dissipation += 0.5 * ps.grid.spacing(axis) * ps.inner_w(&scale_columns(&d, &abs_q), &d).unwrap();
    }
    let cross = ps.inner_w(&ps.advect_adjoint(g1).unwrap(), &(g1 - g0)).unwrap();
    (lhs - (dissipation - cross), lhs.abs() + dissipation.abs() + cross.abs())
}

/// `(|A*(G)|_w^2, d sum_j |D+ G |Q^(j)||_w^2)`.
pub fn adjoint_advection_bound(ps: &PhaseSpace, g: &DMatrix<f64>) -> (f64, f64) {
    let lhs = ps.norm_w(&ps.advect_adjoint(g).unwrap()).unwrap().powi(2);
    let mut rhs = 0.0;
    for axis in 0..ps.dim() {
        let abs_q: Vec<f64> = ps.quad.omega(axis).iter().map(|o| o.abs()).collect();
        rhs += ps.norm_w(&scale_columns(&forward(ps, axis, g), &abs_q)).unwrap().powi(2);
    }
    (lhs, ps.dim() as f64 * rhs)
}

/// `<A(F), G>_w - <F, A*(G)>_w` and the magnitude of its terms.
pub fn adjointness(ps: &PhaseSpace, f: &DMatrix<f64>, g: &DMatrix<f64>) -> (f64, f64) {
    let a = ps.inner_w(&ps.advect(f).unwrap(), g).unwrap();
    let b = ps.inner_w(f, &ps.advect_adjoint(g).unwrap()).unwrap();
    (a - b, a.abs() + b.abs())
}

/// Upwind splitting `Q+ + Q- = Q`, `Q+ Q- = 0`, checked exactly.
pub fn upwind_split_exact(ps: &PhaseSpace) -> bool {
    (0..ps.dim()).all(|axis| {
        let om = ps.quad.omega(axis);
        let qp = ps.quad.upwind(axis, true);
        let qm = ps.quad.upwind(axis, false);
        (0..om.len()).all(|k| qp[k] + qm[k] == om[k] && qp[k] * qm[k] == 0.0)
    })
}
