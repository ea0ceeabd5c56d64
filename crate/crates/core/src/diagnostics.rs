//! Energy functional, time-step bounds, error norms and the diffusion-limit
//! reference solver.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Result};
use crate::fullrank::assemble_coupled;
use crate::grid::StaggeredGrid;
use crate::linsolve::{CgSettings, SpdSolver};
use crate::material::MaterialField;
use crate::ops::PhaseSpace;
use crate::stepper::MicroState;

/// Per-step diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyRecord {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub energy: f64,
    pub rho_norm: f64,
    pub micro_norm_w: f64,
    pub rank: usize,
    pub zero_density_residual: f64,
    pub mass: f64,
}

/// `E_theta = |D| |rho|^2 + (eps^2 + (1 - theta) dt sigma_0) |G|_w^2`, from the
/// squared norms.
pub fn energy_from_norms(
    measure: f64,
    rho_norm_sq: f64,
    micro_norm_w_sq: f64,
    epsilon: f64,
    dt: f64,
    sigma_floor: f64,
    theta: f64,
) -> f64 {
    measure * rho_norm_sq + (epsilon * epsilon + (1.0 - theta) * dt * sigma_floor) * micro_norm_w_sq
}

/// Discrete energy of a state. Low-rank states are evaluated from the
/// factors.
pub fn energy(
    ps: &PhaseSpace,
    rho: &DVector<f64>,
    micro: &MicroState,
    theta: f64,
    epsilon: f64,
    dt: f64,
    material: &MaterialField,
) -> Result<f64> {
    check_len("energy rho", ps.n_rho(), rho.len())?;
    let rho_sq = ps.grid.cell_volume() * rho.norm_squared();
    Ok(energy_from_norms(
        ps.quad.measure(),
        rho_sq,
        micro.norm_w_squared(ps),
        epsilon,
        dt,
        material.sigma_s_floor,
        theta,
    ))
}

/// Stability-limited step sizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DtBound {
    Finite(f64),
    Unconditional,
}

impl DtBound {
    pub fn value(&self) -> Option<f64> {
        match self {
            DtBound::Finite(v) => Some(*v),
            DtBound::Unconditional => None,
        }
    }
}

/// Explicit-coupling bound: `(2/3) eps dx + (1/3) sigma_0 dx^2` in 1D,
/// `(1/3) eps ds + (1/12) sigma_0 ds^2` in 2D with `ds = min(dx, dy)`.
pub fn dt_explicit_formula(dim: usize, epsilon: f64, sigma_floor: f64, ds: f64) -> f64 {
    if dim == 1 {
        2.0 / 3.0 * epsilon * ds + 1.0 / 3.0 * sigma_floor * ds * ds
    } else {
        1.0 / 3.0 * epsilon * ds + 1.0 / 12.0 * sigma_floor * ds * ds
    }
}

/// Schur-coupling bound for `theta`-stability:
/// `dt <= (eps^2/2) / (eps d/(2 ds) - (1 - theta) sigma_0/4)`, unconditional
/// when the bracket is not positive.
pub fn dt_implicit_formula(dim: usize, epsilon: f64, sigma_floor: f64, ds: f64, theta: f64) -> DtBound {
    let denom = epsilon * dim as f64 / (2.0 * ds) - (1.0 - theta) * sigma_floor / 4.0;
    if denom <= 0.0 {
        DtBound::Unconditional
    } else {
        DtBound::Finite(0.5 * epsilon * epsilon / denom)
    }
}

pub fn dt_explicit(grid: &StaggeredGrid, epsilon: f64, material: &MaterialField) -> f64 {
    dt_explicit_formula(grid.dim(), epsilon, material.sigma_s_floor, grid.min_spacing())
}

/// The bound of the optimized (`theta = 0`) IMEX-S condition.
pub fn dt_implicit(grid: &StaggeredGrid, epsilon: f64, material: &MaterialField) -> DtBound {
    dt_implicit_formula(grid.dim(), epsilon, material.sigma_s_floor, grid.min_spacing(), 0.0)
}

/// `(prod dx / 2)^{1/2} |a - b|`: the L2 norm with each lattice point
/// carrying half a cell.
pub fn l2_error(grid: &StaggeredGrid, numeric: &DVector<f64>, reference: &DVector<f64>) -> Result<f64> {
    check_len("l2_error", numeric.len(), reference.len())?;
    check_len("l2_error grid", grid.points(), numeric.len())?;
    Ok((grid.point_volume() * (numeric - reference).norm_squared()).sqrt())
}

/// `|a - b| / |b|` in the same norm.
pub fn relative_l2(numeric: &DVector<f64>, reference: &DVector<f64>) -> Result<f64> {
    check_len("relative_l2", numeric.len(), reference.len())?;
    let denom = reference.norm();
    Ok(if denom == 0.0 {
        (numeric - reference).norm()
    } else {
        (numeric - reference).norm() / denom
    })
}

/// Total density `sum rho * (prod dx / 2)`.
pub fn mass(grid: &StaggeredGrid, rho: &DVector<f64>) -> f64 {
    grid.point_volume() * rho.sum()
}

/// `|G w|_inf` of a dense fluctuation.
pub fn zero_density_residual_dense(ps: &PhaseSpace, g: &DMatrix<f64>) -> f64 {
    (g * ps.quad.weights_vec()).amax()
}

pub fn zero_density_residual(ps: &PhaseSpace, micro: &MicroState) -> f64 {
    micro.zero_density_residual(ps)
}

/// Backward-Euler steps of the limiting diffusion equation
/// `rho_t = sum_j D^(j),- ((1/3) sigma_s^{-1} D^(j),+ rho) - sigma_a rho + Phi`.
pub fn diffusion_reference(
    grid: &StaggeredGrid,
    rho0: &DVector<f64>,
    material: &MaterialField,
    dt: f64,
    n_steps: usize,
    cg: CgSettings,
) -> Result<DVector<f64>> {
    check_len("diffusion_reference", grid.points(), rho0.len())?;
    if material.sigma_s_g.iter().any(|s| *s <= 0.0) {
        return Err(crate::Error::InvalidMaterial(
            "diffusion limit needs sigma_s > 0 on the fluctuation lattice".into(),
        ));
    }
    let diag = material.sigma_a_rho.map(|a| 1.0 / dt + a);
    let inv_sigma = material.sigma_s_g.map(|s| 1.0 / s);
    let third = 1.0 / 3.0;
    let c = [[third, 0.0], [0.0, third]];
    let matrix = assemble_coupled(grid, &diag, &inv_sigma, &c, 1.0);
    let solver = SpdSolver::new(matrix, cg)?;
    let mut rho = rho0.clone();
    for n in 0..n_steps {
        let mut rhs = &rho / dt;
        if let Some(phi) = material.source.macro_at((n + 1) as f64 * dt) {
            rhs += phi;
        }
        let mut next = rho.clone();
        solver.solve(&rhs, &mut next)?;
        rho = next;
    }
    Ok(rho)
}

/// Backward-Euler diffusion reference at time `t_final`, with step count
/// `ceil(t_final / dt_max)` and a uniform adjusted step.
pub fn diffusion_reference_to(
    grid: &StaggeredGrid,
    rho0: &DVector<f64>,
    material: &MaterialField,
    dt_max: f64,
    t_final: f64,
) -> Result<DVector<f64>> {
    let n = (t_final / dt_max - 1e-9).ceil().max(1.0) as usize;
    diffusion_reference(grid, rho0, material, t_final / n as f64, n, CgSettings::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_formula_values() {
        let v = dt_explicit_formula(1, 1.0, 1.0, 0.006);
        assert!((v - 0.004012).abs() < 1e-15);
        let v2 = dt_explicit_formula(2, 1.0, 1.0, 0.5);
        assert!((v2 - (1.0 / 6.0 + 1.0 / 48.0)).abs() < 1e-15);
    }

    #[test]
    fn implicit_formula_values() {
        // 1D: eps/(2dx) - sigma/4 = 0.5/0.2 - 0.25 = 2.25
        match dt_implicit_formula(1, 0.5, 1.0, 0.1, 0.0) {
            DtBound::Finite(v) => assert!((v - 0.125 / 2.25).abs() < 1e-15),
            DtBound::Unconditional => panic!(),
        }
        // 2D: eps/ds = 1e-6/0.1 < 1/4
        assert_eq!(dt_implicit_formula(2, 1e-6, 1.0, 0.1, 0.0), DtBound::Unconditional);
        // boundary case counts as unconditional
        assert_eq!(dt_implicit_formula(1, 0.05, 1.0, 0.1, 0.0), DtBound::Unconditional);
        // theta = 1 never gives an unconditional bound
        assert!(matches!(dt_implicit_formula(1, 1e-6, 1.0, 0.1, 1.0), DtBound::Finite(_)));
    }

    #[test]
    fn unit_square_l2() {
        let g = StaggeredGrid::new_2d([(0.0, 1.0), (0.0, 1.0)], [16, 16]).unwrap();
        let ones = DVector::from_element(g.points(), 1.0);
        let zero = DVector::zeros(g.points());
        assert!((l2_error(&g, &ones, &zero).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(l2_error(&g, &ones, &ones).unwrap(), 0.0);
        assert!((mass(&g, &ones) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn energy_formula() {
        let e = energy_from_norms(2.0, 3.0, 5.0, 0.5, 0.1, 1.0, 0.0);
        assert!((e - (6.0 + (0.25 + 0.1) * 5.0)).abs() < 1e-15);
        let e1 = energy_from_norms(2.0, 3.0, 5.0, 0.5, 0.1, 1.0, 1.0);
        let e2 = energy_from_norms(2.0, 3.0, 5.0, 0.5, 7.0, 1.0, 1.0);
        assert_eq!(e1, e2);
    }

    #[test]
    fn diffusion_conserves_mass_and_constants() {
        let g = StaggeredGrid::new_1d((-1.0, 1.0), 64).unwrap();
        let m = MaterialField::uniform(&g, 1.0, 0.0).unwrap();
        let rho0 = g.sample(crate::grid::Lattice::Rho, |x, _| (-x * x / 0.02).exp());
        let rho = diffusion_reference(&g, &rho0, &m, 1e-3, 20, CgSettings::default()).unwrap();
        assert!((mass(&g, &rho) - mass(&g, &rho0)).abs() < 1e-11 * mass(&g, &rho0));
        let c = DVector::from_element(g.points(), 3.0);
        let c1 = diffusion_reference(&g, &c, &m, 1e-3, 5, CgSettings::default()).unwrap();
        assert!((c1 - c).amax() < 1e-12);
    }
}
