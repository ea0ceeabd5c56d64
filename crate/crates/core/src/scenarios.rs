//! Built-in experiments: initial data, materials, sources, step-size
//! policies and reference solutions.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::angular::QuadratureSet;
use crate::diagnostics::{self, DtBound};
use crate::error::{Error, Result};
use crate::fullrank::SolverConfig;
use crate::grid::{Lattice, StaggeredGrid};
use crate::material::{MaterialField, Source, TimeProfile};
use crate::ops::PhaseSpace;
use crate::stepper::{MicroState, Scheme, Stepper};

/// Names accepted by [`Scenario::build`].
pub const SCENARIO_NAMES: [&str; 11] = [
    "gaussian1d-kinetic",
    "gaussian1d-mid",
    "gaussian1d-diff",
    "bimodal1d",
    "mms2d-16",
    "mms2d-32",
    "mms2d-64",
    "mms2d-128",
    "mms2d-256",
    "gaussian2d",
    "lattice2d",
];

/// Construction-time overrides.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScenarioOptions {
    /// Divides spatial cells and angular resolution.
    pub mesh_div: usize,
    pub epsilon: Option<f64>,
    /// Drops the source term (lattice only has one).
    pub disable_source: bool,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        ScenarioOptions {
            mesh_div: 1,
            epsilon: None,
            disable_source: false,
        }
    }
}

impl ScenarioOptions {
    pub fn with_mesh_div(mut self, div: usize) -> Self {
        self.mesh_div = div;
        self
    }

    pub fn with_epsilon(mut self, eps: f64) -> Self {
        self.epsilon = Some(eps);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DtPolicy {
    /// Explicit bound for the IMEX family; the Schur bound (or ten times the
    /// explicit one where the Schur scheme is unconditional) for IMEX-S.
    Bounds,
    /// Explicit bound for every scheme.
    Explicit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Reference {
    None,
    /// Backward-Euler diffusion limit with `dt = dt_scale * ds^2`.
    Diffusion { dt_scale: f64 },
    /// Closed-form density of the manufactured solution.
    Manufactured,
    /// Full-rank IMEX on a mesh refined `factor` times per axis.
    SelfRefined { factor: usize },
}

/// A line of density samples: points whose coordinate on `fixed_axis`
/// equals `at`.
#[derive(Clone, Debug, PartialEq)]
pub struct Slice {
    pub name: String,
    pub fixed_axis: usize,
    pub at: f64,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub ps: PhaseSpace,
    pub material: MaterialField,
    pub epsilon: f64,
    pub t_final: f64,
    pub rho0: DVector<f64>,
    /// Initial fluctuation; `None` means isotropic initial data.
    pub g0: Option<DMatrix<f64>>,
    pub rank: usize,
    pub tau: f64,
    pub dt_policy: DtPolicy,
    pub reference: Reference,
    pub slices: Vec<Slice>,
    /// Whether augmented schemes use the diffusion-limit enrichment.
    pub ap_default: bool,
    options: ScenarioOptions,
}

fn divided(n: usize, div: usize, what: &str) -> Result<usize> {
    if div == 0 {
        return Err(Error::InvalidConfig("mesh divisor must be at least 1".into()));
    }
    let m = n / div;
    if m < 2 {
        return Err(Error::InvalidConfig(format!("mesh divisor {div} leaves {m} {what}")));
    }
    Ok(m)
}

fn even_divided(n: usize, div: usize, what: &str) -> Result<usize> {
    let m = divided(n, div, what)?;
    Ok(if m % 2 == 1 { m + 1 } else { m })
}

fn ap_rule(material: &MaterialField, epsilon: f64) -> bool {
    material.sigma_s_floor > 0.0 && epsilon <= 1e-3
}

impl Scenario {
    /// Builds a named scenario.
    pub fn build(name: &str, opts: ScenarioOptions) -> Result<Self> {
        let mut sc = match name {
            "gaussian1d-kinetic" => gaussian_1d(1.0, 1.0, 50, opts)?,
            "gaussian1d-mid" => gaussian_1d(1e-2, 0.2, 10, opts)?,
            "gaussian1d-diff" => gaussian_1d(1e-6, 0.2, 3, opts)?,
            "bimodal1d" => bimodal_1d(opts)?,
            "gaussian2d" => gaussian_2d(opts)?,
            "lattice2d" => lattice_2d(opts)?,
            _ => match name.strip_prefix("mms2d-").map(str::parse::<usize>) {
                Some(Ok(n)) => manufactured_2d(n, opts)?,
                _ => return Err(Error::UnknownScenario(name.to_string())),
            },
        };
        sc.name = name.to_string();
        sc.options = opts;
        Ok(sc)
    }

    pub fn options(&self) -> ScenarioOptions {
        self.options
    }

    pub fn grid(&self) -> &StaggeredGrid {
        &self.ps.grid
    }

    /// Maximal step for `scheme` under the scenario's policy.
    pub fn dt_for(&self, scheme: Scheme) -> f64 {
        let explicit = diagnostics::dt_explicit(&self.ps.grid, self.epsilon, &self.material);
        match self.dt_policy {
            DtPolicy::Explicit => explicit,
            DtPolicy::Bounds if !scheme.is_schur() => explicit,
            DtPolicy::Bounds => match diagnostics::dt_implicit(&self.ps.grid, self.epsilon, &self.material) {
                DtBound::Finite(v) => v,
                DtBound::Unconditional => 10.0 * explicit,
            },
        }
    }

    /// Number of uniform steps reaching `t_final` with steps no larger than
    /// `dt_max`, and the adjusted step.
    pub fn step_count(&self, dt_max: f64) -> (usize, f64) {
        step_count(self.t_final, dt_max)
    }

    /// A stepper ready to run `scheme` with step `dt`.
    pub fn stepper(
        &self,
        scheme: Scheme,
        dt: f64,
        theta: f64,
        lowrank: Option<crate::lowrank::LowRankConfig>,
        weighted: bool,
        seed: u64,
    ) -> Result<Stepper> {
        let config = SolverConfig::new(self.epsilon, dt)?.with_theta(theta)?;
        let micro = MicroState::initial(&self.ps, scheme, lowrank.as_ref(), self.g0.as_ref(), weighted, seed)?;
        Stepper::new(
            self.ps.clone(),
            self.material.clone(),
            scheme,
            config,
            lowrank,
            self.rho0.clone(),
            micro,
        )
    }

    /// Default low-rank configuration for `scheme` with tolerance `1e-5`
    /// (`1e-8` on the manufactured problem).
    pub fn lowrank_config(&self, scheme: Scheme, rank: Option<usize>, tau: Option<f64>, ap: Option<bool>) -> Option<crate::lowrank::LowRankConfig> {
        use crate::lowrank::LowRankConfig;
        if !scheme.is_low_rank() {
            return None;
        }
        let r = rank.unwrap_or(self.rank);
        let t = tau.unwrap_or(self.tau);
        let cap = crate::lowrank::rank_cap(&self.ps);
        Some(if scheme.is_augmented() {
            if ap.unwrap_or(self.ap_default) {
                LowRankConfig::ap_abug(r, t).with_max_rank(cap)
            } else {
                LowRankConfig::abug(r, t).with_max_rank(cap)
            }
        } else {
            LowRankConfig::bug(r)
        })
    }

    /// Reference density at `t_final`, if the scenario has one.
    pub fn reference_density(&self) -> Result<Option<DVector<f64>>> {
        match self.reference {
            Reference::None => Ok(None),
            Reference::Manufactured => Ok(Some(
                self.ps.grid.sample(Lattice::Rho, |x, y| mms_density(self.t_final, x, y)),
            )),
            Reference::Diffusion { dt_scale } => {
                let ds = self.ps.grid.min_spacing();
                diagnostics::diffusion_reference_to(&self.ps.grid, &self.rho0, &self.material, dt_scale * ds * ds, self.t_final)
                    .map(Some)
            }
            Reference::SelfRefined { factor } => self.self_reference(factor).map(Some),
        }
    }

    fn self_reference(&self, factor: usize) -> Result<DVector<f64>> {
        let div = self.options.mesh_div;
        if factor == 0 || div == 0 {
            return Err(Error::InvalidConfig("refinement factor must be positive".into()));
        }
        // The refinement acts on space only; the angular rule stays fixed.
        let grid = &self.ps.grid;
        let dim = grid.dim();
        let bounds: Vec<(f64, f64)> = (0..dim).map(|a| grid.bounds(a)).collect();
        let cells: Vec<usize> = (0..dim).map(|a| grid.cells(a) * factor).collect();
        let fine_grid = StaggeredGrid::new(dim, &bounds, &cells)?;
        let fine = rebuild_on(self, fine_grid)?;
        let dt = diagnostics::dt_explicit(&fine.ps.grid, fine.epsilon, &fine.material);
        let (n, dt) = fine.step_count(dt);
        let mut st = fine.stepper(Scheme::Imex, dt, 1.0, None, true, 0)?;
        for _ in 0..n {
            st.step()?;
        }
        restrict(&fine.ps.grid, st.rho(), grid)
    }
}

/// `ceil(t_final / dt_max)` uniform steps and the adjusted step size.
pub fn step_count(t_final: f64, dt_max: f64) -> (usize, f64) {
    let n = (t_final / dt_max * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    (n, t_final / n as f64)
}

/// Samples a fine-grid density at the coarse grid's points, which are a
/// subset of the fine lattice.
pub fn restrict(fine: &StaggeredGrid, rho: &DVector<f64>, coarse: &StaggeredGrid) -> Result<DVector<f64>> {
    let dim = coarse.dim();
    let mut out = DVector::zeros(coarse.points());
    let ratio: Vec<f64> = (0..dim).map(|a| coarse.spacing(a) / fine.spacing(a)).collect();
    for k in 0..coarse.points() {
        let p = coarse.position(Lattice::Rho, k);
        // Locate by half-cell coordinates on the fine lattice.
        let mut h = [0usize; 2];
        for a in 0..dim {
            let (lo, _) = fine.bounds(a);
            let q = ((p[a] - lo) / (0.5 * fine.spacing(a))).round();
            if ((p[a] - lo) / (0.5 * fine.spacing(a)) - q).abs() > 1e-6 || ratio[a].fract().abs() > 1e-9 {
                return Err(Error::InvalidGrid("coarse points are not on the fine lattice".into()));
            }
            h[a] = q as usize;
        }
        let idx = fine_index(fine, h)?;
        out[k] = rho[idx];
    }
    Ok(out)
}

fn fine_index(grid: &StaggeredGrid, h: [usize; 2]) -> Result<usize> {
    // Density blocks: block 0 has odd half-coordinates, block 1 even ones.
    let dim = grid.dim();
    let parity = h[0] % 2;
    if (0..dim).any(|a| h[a] % 2 != parity) {
        return Err(Error::InvalidGrid("point is not on the density lattice".into()));
    }
    let block = if parity == 1 { 0 } else { 1 };
    let i = (h[0] / 2) % grid.cells(0);
    let j = if dim == 2 { (h[1] / 2) % grid.cells(1) } else { 0 };
    Ok(grid.index_of(block, i, j))
}

fn rebuild_on(sc: &Scenario, grid: StaggeredGrid) -> Result<Scenario> {
    let quad = sc.ps.quad.clone();
    let ps = PhaseSpace::new(grid, quad)?;
    let opts = sc.options;
    let mut fine = match sc.name.as_str() {
        "gaussian1d-kinetic" | "gaussian1d-mid" | "gaussian1d-diff" => {
            gaussian_1d_on(ps, sc.epsilon, sc.t_final, sc.rank)?
        }
        _ => {
            return Err(Error::InvalidConfig(format!(
                "no refined reference for scenario {}",
                sc.name
            )))
        }
    };
    fine.options = opts;
    fine.name = sc.name.clone();
    Ok(fine)
}

fn base(
    name: &str,
    ps: PhaseSpace,
    material: MaterialField,
    epsilon: f64,
    t_final: f64,
    rho0: DVector<f64>,
    g0: Option<DMatrix<f64>>,
    rank: usize,
) -> Scenario {
    let ap_default = ap_rule(&material, epsilon);
    Scenario {
        name: name.to_string(),
        ps,
        material,
        epsilon,
        t_final,
        rho0,
        g0,
        rank,
        tau: 1e-5,
        dt_policy: DtPolicy::Bounds,
        reference: Reference::None,
        slices: Vec::new(),
        ap_default,
        options: ScenarioOptions::default(),
    }
}

/// Isotropic Gaussian pulse in slab geometry.
pub fn gaussian_1d(epsilon: f64, t_final: f64, rank: usize, opts: ScenarioOptions) -> Result<Scenario> {
    let nx = divided(500, opts.mesh_div, "cells")?;
    let nw = even_divided(200, opts.mesh_div, "ordinates")?;
    let ps = PhaseSpace::new(
        StaggeredGrid::new_1d((-1.5, 1.5), nx)?,
        QuadratureSet::gauss_legendre_1d(nw)?,
    )?;
    let mut sc = gaussian_1d_on(ps, opts.epsilon.unwrap_or(epsilon), t_final, rank)?;
    sc.options = opts;
    Ok(sc)
}

fn gaussian_1d_on(ps: PhaseSpace, epsilon: f64, t_final: f64, rank: usize) -> Result<Scenario> {
    let sigma2: f64 = 9e-4;
    let sigma = sigma2.sqrt();
    let material = MaterialField::uniform(&ps.grid, 1.0, 0.0)?;
    let rho0 = ps
        .grid
        .sample(Lattice::Rho, |x, _| (-x * x / (2.0 * sigma2)).exp() / ((2.0 * PI).sqrt() * sigma));
    let mut sc = base("gaussian1d", ps, material, epsilon, t_final, rho0, None, rank);
    sc.reference = if epsilon <= 1e-3 {
        Reference::Diffusion { dt_scale: 0.75 }
    } else {
        Reference::SelfRefined { factor: 4 }
    };
    Ok(sc)
}

/// Non-equilibrium two-beam initial state.
pub fn bimodal_1d(opts: ScenarioOptions) -> Result<Scenario> {
    let nx = divided(50, opts.mesh_div, "cells")?;
    let nw = even_divided(50, opts.mesh_div, "ordinates")?;
    let ps = PhaseSpace::new(
        StaggeredGrid::new_1d((-1.5, 1.5), nx)?,
        QuadratureSet::gauss_legendre_1d(nw)?,
    )?;
    let epsilon = opts.epsilon.unwrap_or(1.0);
    let sigma2: f64 = 1e-4;
    let space = |x: f64| (-x * x / (2.0 * sigma2)).exp() / (2.0 * PI * sigma2);
    let beams = |v: f64| (-(v - 1.0).powi(2) / (2.0 * sigma2)).exp() + (-(v + 1.0).powi(2) / (2.0 * sigma2)).exp();
    let b: Vec<f64> = ps.quad.omega(0).iter().map(|&v| beams(v)).collect();
    let b_avg = ps.quad.average(|k| b[k]);
    let rho0 = ps.grid.sample(Lattice::Rho, |x, _| space(x) * b_avg);
    let a_g = ps.grid.sample(Lattice::G, |x, _| space(x));
    let mut g0 = DMatrix::from_fn(ps.n_g(), ps.n_omega(), |i, k| a_g[i] * (b[k] - b_avg) / epsilon);
    project_zero_density(&ps, &mut g0);
    let material = MaterialField::uniform(&ps.grid, 1.0, 0.0)?;
    let mut sc = base("bimodal1d", ps, material, epsilon, 2.5, rho0, Some(g0), 2);
    sc.options = opts;
    Ok(sc)
}

/// Removes the density component: `G - (G w) 1^T / |D|`.
pub fn project_zero_density(ps: &PhaseSpace, g: &mut DMatrix<f64>) {
    ps.project_right(g);
}

fn mms_s(x: f64, y: f64) -> [f64; 3] {
    let (sx, cx) = (2.0 * PI * x).sin_cos();
    let (sy, cy) = (2.0 * PI * y).sin_cos();
    [sx * sy, 2.0 * PI * cx * sy, 2.0 * PI * sx * cy]
}

/// Manufactured kinetic solution
/// `f = 2 + e^{-t} s + eps e^{-t} s Omega_y`, `s = sin(2 pi x) sin(2 pi y)`.
pub fn mms_f(t: f64, x: f64, y: f64, _ox: f64, oy: f64, epsilon: f64) -> f64 {
    let [s, _, _] = mms_s(x, y);
    2.0 + (-t).exp() * s * (1.0 + epsilon * oy)
}

/// Density of the manufactured solution.
pub fn mms_density(t: f64, x: f64, y: f64) -> f64 {
    2.0 + (-t).exp() * mms_s(x, y)[0]
}

/// Source making [`mms_f`] an exact solution with `sigma_s = 1`,
/// `sigma_a = 0`.
pub fn mms_source(t: f64, x: f64, y: f64, ox: f64, oy: f64, epsilon: f64) -> f64 {
    let [s, sx, sy] = mms_s(x, y);
    (-t).exp()
        * (-s + (ox * sx + oy * sy) / epsilon + (1.0 / epsilon - epsilon) * s * oy + ox * oy * sx + oy * oy * sy)
}

/// Manufactured low-rank solution on `[0, 1]^2` with `N x N` cells and
/// `N/8` polar nodes.
pub fn manufactured_2d(n: usize, opts: ScenarioOptions) -> Result<Scenario> {
    let n = divided(n, opts.mesh_div, "cells")?;
    if n % 8 != 0 {
        return Err(Error::InvalidConfig(format!("mms2d needs N divisible by 8, got {n}")));
    }
    let epsilon = opts.epsilon.unwrap_or(1.0);
    let ps = PhaseSpace::new(
        StaggeredGrid::new_2d([(0.0, 1.0), (0.0, 1.0)], [n, n])?,
        QuadratureSet::chebyshev_legendre_2d(n / 8)?,
    )?;
    let cyy = ps.quad.second_moment(1, 1);
    let rho0 = ps.grid.sample(Lattice::Rho, |x, y| mms_density(0.0, x, y));
    let macro_src = ps.grid.sample(Lattice::Rho, |x, y| {
        let [s, _, sy] = mms_s(x, y);
        -s + cyy * sy
    });
    let g_pts = ps.grid.positions(Lattice::G);
    let ox = ps.quad.omega(0).to_vec();
    let oy = ps.quad.omega(1).to_vec();
    let inv = 1.0 / epsilon;
    let u = DMatrix::from_fn(ps.n_g(), 4, |i, c| {
        let [s, sx, sy] = mms_s(g_pts[i][0], g_pts[i][1]);
        inv * match c {
            0 => sx * inv,
            1 => sy * inv + (inv - epsilon) * s,
            2 => sx,
            _ => sy,
        }
    });
    let w = DMatrix::from_fn(ps.n_omega(), 4, |k, c| match c {
        0 => ox[k],
        1 => oy[k],
        2 => ox[k] * oy[k],
        _ => oy[k] * oy[k] - cyy,
    });
    let g0 = DMatrix::from_fn(ps.n_g(), ps.n_omega(), |i, k| mms_s(g_pts[i][0], g_pts[i][1])[0] * oy[k]);
    let source = Source::new(Some(macro_src), Some((u, w)), TimeProfile::Exponential { rate: -1.0 })?;
    let material = MaterialField::uniform(&ps.grid, 1.0, 0.0)?.with_source(source)?;
    let mut sc = base("mms2d", ps, material, epsilon, 0.1, rho0, Some(g0), 4);
    sc.tau = 1e-8;
    sc.dt_policy = DtPolicy::Explicit;
    sc.reference = Reference::Manufactured;
    sc.options = opts;
    Ok(sc)
}

fn polar_for(n_polar: usize, div: usize) -> Result<usize> {
    if div == 0 {
        return Err(Error::InvalidConfig("mesh divisor must be at least 1".into()));
    }
    Ok((n_polar / div).max(2))
}

/// Gaussian pulse in the diffusive regime on `[-1, 1]^2`.
pub fn gaussian_2d(opts: ScenarioOptions) -> Result<Scenario> {
    let n = divided(128, opts.mesh_div, "cells")?;
    let ps = PhaseSpace::new(
        StaggeredGrid::new_2d([(-1.0, 1.0), (-1.0, 1.0)], [n, n])?,
        QuadratureSet::chebyshev_legendre_2d(polar_for(16, opts.mesh_div)?)?,
    )?;
    let epsilon = opts.epsilon.unwrap_or(1e-6);
    let sigma2 = 1e-2;
    let rho0 = ps.grid.sample(Lattice::Rho, |x, y| {
        (-(x * x + y * y) / (4.0 * sigma2)).exp() / (4.0 * PI * sigma2)
    });
    let material = MaterialField::uniform(&ps.grid, 1.0, 0.0)?;
    let mut sc = base("gaussian2d", ps, material, epsilon, 0.1, rho0, None, 10);
    sc.reference = Reference::Diffusion { dt_scale: 0.75 };
    sc.slices = vec![Slice {
        name: "y0".into(),
        fixed_axis: 1,
        at: 0.0,
    }];
    sc.options = opts;
    Ok(sc)
}

/// Lower-left corners of the absorbing blocks of the lattice problem.
pub fn lattice_absorbers() -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 1..=5 {
        for j in 1..=5 {
            if (i + j) % 2 == 0 && (i, j) != (3, 3) && (i, j) != (3, 5) {
                out.push((i, j));
            }
        }
    }
    out
}

fn in_absorber(x: f64, y: f64) -> bool {
    let (i, j) = (x.floor(), y.floor());
    if i < 0.0 || j < 0.0 {
        return false;
    }
    lattice_absorbers().contains(&(i as usize, j as usize))
}

/// Checkerboard lattice on `[0, 7]^2` with a central source.
pub fn lattice_2d(opts: ScenarioOptions) -> Result<Scenario> {
    let n = divided(128, opts.mesh_div, "cells")?;
    let ps = PhaseSpace::new(
        StaggeredGrid::new_2d([(0.0, 7.0), (0.0, 7.0)], [n, n])?,
        QuadratureSet::chebyshev_legendre_2d(polar_for(16, opts.mesh_div)?)?,
    )?;
    let epsilon = opts.epsilon.unwrap_or(1.0);
    let material = MaterialField::from_fn(
        &ps.grid,
        |x, y| if in_absorber(x, y) { 0.0 } else { 1.0 },
        |x, y| if in_absorber(x, y) { 10.0 } else { 0.0 },
        Some(0.0),
    )?;
    let material = if opts.disable_source {
        material
    } else {
        let phi = ps.grid.sample(Lattice::Rho, |x, y| {
            if (3.0..4.0).contains(&x) && (3.0..4.0).contains(&y) {
                1.0
            } else {
                0.0
            }
        });
        material.with_source(Source::constant(phi))?
    };
    let sigma2 = 1e-2;
    let rho0 = ps.grid.sample(Lattice::Rho, |x, y| {
        let r2 = (x - 3.5).powi(2) + (y - 3.5).powi(2);
        (-r2 / (4.0 * sigma2)).exp() / (4.0 * PI * sigma2)
    });
    let mut sc = base("lattice2d", ps, material, epsilon, 2.0, rho0, None, 100);
    sc.slices = vec![
        Slice {
            name: "x3.5".into(),
            fixed_axis: 0,
            at: 3.5,
        },
        Slice {
            name: "y3.5".into(),
            fixed_axis: 1,
            at: 3.5,
        },
    ];
    sc.options = opts;
    Ok(sc)
}

/// `(coordinate, rho)` pairs along a slice, sorted by the free coordinate.
pub fn extract_slice(grid: &StaggeredGrid, rho: &DVector<f64>, slice: &Slice) -> Vec<(f64, f64)> {
    if grid.dim() < 2 {
        return Vec::new();
    }
    let free = 1 - slice.fixed_axis;
    let tol = 0.25 * grid.spacing(slice.fixed_axis);
    let mut out: Vec<(f64, f64)> = (0..grid.points())
        .filter_map(|k| {
            let p = grid.position(Lattice::Rho, k);
            ((p[slice.fixed_axis] - slice.at).abs() < tol).then_some((p[free], rho[k]))
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}
