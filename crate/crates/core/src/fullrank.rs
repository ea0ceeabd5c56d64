//! Full-rank IMEX and IMEX-S steppers and the Schur-complement density
//! solve.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::linsolve::{CgReport, CgSettings, CsrMatrix, SpdSolver};
use crate::material::MaterialField;
use crate::ops::PhaseSpace;
use crate::grid::{Side, StaggeredGrid};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub dt: f64,
    /// Energy parameter in `[0, 1]`; only diagnostics read it.
    pub theta: f64,
    pub cg: CgSettings,
}

impl SolverConfig {
    pub fn new(epsilon: f64, dt: f64) -> Result<Self> {
        let c = SolverConfig {
            epsilon,
            dt,
            theta: 1.0,
            cg: CgSettings::default(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        self.theta = theta;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidConfig(format!("theta must lie in [0, 1], got {}", self.theta)));
        }
        Ok(())
    }
}

/// Assembles `diag(d) + scale * sum_{j,k} c_jk (D^(j),+)^T diag(r) D^(k),+`
/// on the density lattice. With `D^- = -(D^+)^T` this is
/// `diag(d) - scale * sum c_jk D^(j),- r D^(k),+`.
pub(crate) fn assemble_coupled(
    grid: &StaggeredGrid,
    diag: &DVector<f64>,
    r: &DVector<f64>,
    c: &[[f64; 2]; 2],
    scale: f64,
) -> CsrMatrix {
    let d = grid.dim();
    let n = grid.points();
    let cmax = (0..d)
        .flat_map(|j| (0..d).map(move |k| (j, k)))
        .fold(0.0f64, |m, (j, k)| m.max(c[j][k].abs()));
    let mut triplets: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, diag[i])).collect();
    let stencil = |axis: usize, i: usize| {
        let (fwd, bwd) = grid.cross_neighbours(axis, Side::Plus);
        let h = 1.0 / grid.spacing(axis);
        [(fwd[i], h), (bwd[i], -h)]
    };
    for i in 0..n {
        for j in 0..d {
            for k in 0..d {
                let cjk = c[j][k];
                if cjk.abs() <= 1e-14 * cmax {
                    continue;
                }
                let coeff = scale * r[i] * cjk;
                for (p, a) in stencil(j, i) {
                    for (q, b) in stencil(k, i) {
                        triplets.push((p, q, coeff * a * b));
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets(n, triplets)
}

/// The Schur complement of the coupled IMEX-S system,
/// `T = (1/dt + sigma_a) I - (1/eps^2) sum_jk <Omega_j Omega_k> D^(j),- R D^(k),+`.
#[derive(Clone, Debug)]
pub struct SchurOperator {
    matrix: CsrMatrix,
    solver: SpdSolver,
    r: DVector<f64>,
    moments: [[f64; 2]; 2],
    diag: DVector<f64>,
    epsilon: f64,
    dt: f64,
}

/// Builds the Schur operator for fixed `(dt, eps, material)`.
pub fn build_schur(
    ps: &PhaseSpace,
    material: &MaterialField,
    config: &SolverConfig,
) -> Result<SchurOperator> {
    config.validate()?;
    let r = material.implicit_factor(config.dt, config.epsilon);
    if r.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::Singular("implicit factor"));
    }
    let d = ps.dim();
    let mut moments = [[0.0; 2]; 2];
    for j in 0..d {
        for k in 0..d {
            moments[j][k] = ps.quad.second_moment(j, k);
        }
    }
    let diag = material.sigma_a_rho.map(|a| 1.0 / config.dt + a);
    let e2 = config.epsilon * config.epsilon;
    let matrix = assemble_coupled(&ps.grid, &diag, &r, &moments, 1.0 / e2);
    if matrix.size() <= 512 {
        let asym = matrix.asymmetry();
        if asym > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "assembled Schur operator is not symmetric ({asym:.2e})"
            )));
        }
    }
    let solver = SpdSolver::new(matrix.clone(), config.cg)?;
    Ok(SchurOperator {
        matrix,
        solver,
        r,
        moments,
        diag,
        epsilon: config.epsilon,
        dt: config.dt,
    })
}

impl SchurOperator {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Pointwise implicit factor `R` on the fluctuation lattice.
    pub fn implicit_factor(&self) -> &DVector<f64> {
        &self.r
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Applies `T` through the assembled matrix.
    pub fn apply(&self, rho: &DVector<f64>) -> DVector<f64> {
        self.matrix.mul_vec(rho)
    }

    /// Applies `T` by composing the difference operators, without the
    /// assembled matrix.
    pub fn apply_matrix_free(&self, ps: &PhaseSpace, rho: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("schur apply", ps.n_rho(), rho.len())?;
        let d = ps.dim();
        let grads: Vec<Vec<f64>> = (0..d)
            .map(|k| ps.grid.diff(k, Side::Plus, rho.as_slice()))
            .collect::<Result<_>>()?;
        let mut out = self.diag.component_mul(rho);
        let e2 = self.epsilon * self.epsilon;
        for j in 0..d {
            let flux: Vec<f64> = (0..ps.n_g())
                .map(|i| self.r[i] * (0..d).map(|k| self.moments[j][k] * grads[k][i]).sum::<f64>())
                .collect();
            let div = ps.grid.diff(j, Side::Minus, &flux)?;
            for (o, v) in out.iter_mut().zip(div) {
                *o -= v / e2;
            }
        }
        Ok(out)
    }

    /// Solves `T rho = b`, warm-started from `guess`.
    pub fn solve(&self, b: &DVector<f64>, guess: &DVector<f64>) -> Result<(DVector<f64>, CgReport)> {
        let mut x = guess.clone();
        let rep = self.solver.solve(b, &mut x)?;
        Ok((x, rep))
    }
}

/// `G/dt - (1/eps) A(G)(I - w 1^T/|D|) + Psi`, the explicit part of the
/// fluctuation update.
fn explicit_micro(
    ps: &PhaseSpace,
    material: &MaterialField,
    config: &SolverConfig,
    g: &DMatrix<f64>,
    t_next: f64,
) -> Result<DMatrix<f64>> {
    let mut b = ps.advect_projected_dense(g)?;
    b *= -1.0 / config.epsilon;
    b += g / config.dt;
    if let Some(psi) = material.source.micro_dense_at(t_next) {
        b += psi;
    }
    Ok(b)
}

fn scale_rows(m: &mut DMatrix<f64>, r: &DVector<f64>) {
    for mut col in m.column_iter_mut() {
        col.component_mul_assign(r);
    }
}

/// Subtracts `J(rho)/eps^2` from `b`.
fn subtract_density_grad(ps: &PhaseSpace, b: &mut DMatrix<f64>, rho: &DVector<f64>, epsilon: f64) -> Result<()> {
    let j = ps.density_grad(rho)?;
    let e2 = epsilon * epsilon;
    for (c, r) in j.cols.iter().zip(&j.rows) {
        b.ger(-1.0 / e2, c, r, 1.0);
    }
    Ok(())
}

/// One IMEX step: the fluctuation is updated first with `J(rho^n)`, then the
/// density with `H(G^{n+1})`. Sources are sampled at `t_next`.
pub fn imex_step(
    ps: &PhaseSpace,
    material: &MaterialField,
    config: &SolverConfig,
    rho: &DVector<f64>,
    g: &DMatrix<f64>,
    t_next: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_len("imex rho", ps.n_rho(), rho.len())?;
    let mut b = explicit_micro(ps, material, config, g, t_next)?;
    subtract_density_grad(ps, &mut b, rho, config.epsilon)?;
    let r = material.implicit_factor(config.dt, config.epsilon);
    scale_rows(&mut b, &r);
    let g_new = b;
    let rho_new = macro_diagonal_update(material, config, rho, &ps.flux_div(&g_new)?, t_next);
    Ok((rho_new, g_new))
}

/// `(1/dt + sigma_a) rho' = rho/dt + Phi - H`.
pub(crate) fn macro_diagonal_update(
    material: &MaterialField,
    config: &SolverConfig,
    rho: &DVector<f64>,
    h: &DVector<f64>,
    t_next: f64,
) -> DVector<f64> {
    let mut rhs = rho / config.dt - h;
    if let Some(phi) = material.source.macro_at(t_next) {
        rhs += phi;
    }
    let inv_dt = 1.0 / config.dt;
    rhs.zip_map(&material.sigma_a_rho, |v, a| v / (inv_dt + a))
}

/// Right-hand side of the Schur system, `rho/dt + Phi - H(R b)`, given the
/// per-axis fluxes `(b Q^(j) w)_j` of the explicit fluctuation part `b`.
pub(crate) fn schur_rhs(
    ps: &PhaseSpace,
    material: &MaterialField,
    schur: &SchurOperator,
    rho: &DVector<f64>,
    flux_moments: &[DVector<f64>],
    t_next: f64,
) -> Result<DVector<f64>> {
    let scaled: Vec<DVector<f64>> = flux_moments
        .iter()
        .map(|m| m.component_mul(schur.implicit_factor()))
        .collect();
    let h = ps.flux_div_from_moments(&scaled)?;
    let mut rhs = rho / schur.dt() - h;
    if let Some(phi) = material.source.macro_at(t_next) {
        rhs += phi;
    }
    Ok(rhs)
}

/// One IMEX-S step: density from the Schur system, then the fluctuation
/// from its pointwise-implicit update with `J(rho^{n+1})`.
pub fn imex_s_step(
    ps: &PhaseSpace,
    material: &MaterialField,
    config: &SolverConfig,
    schur: &SchurOperator,
    rho: &DVector<f64>,
    g: &DMatrix<f64>,
    t_next: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    check_len("imex-s rho", ps.n_rho(), rho.len())?;
    let mut b = explicit_micro(ps, material, config, g, t_next)?;
    let moments: Vec<DVector<f64>> = (0..ps.dim()).map(|j| ps.flux_moment(&b, j)).collect();
    let rhs = schur_rhs(ps, material, schur, rho, &moments, t_next)?;
    let (rho_new, _) = schur.solve(&rhs, rho)?;
    subtract_density_grad(ps, &mut b, &rho_new, config.epsilon)?;
    scale_rows(&mut b, schur.implicit_factor());
    Ok((rho_new, b))
}
