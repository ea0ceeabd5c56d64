//! Scheme tags and a stateful stepper that couples a macroscopic update with
//! either a dense or a low-rank microscopic state.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::diagnostics::{self, EnergyRecord};
use crate::error::{check_len, check_shape, Error, Result};
use crate::fullrank::{self, build_schur, SchurOperator, SolverConfig};
use crate::lowrank::{self, Integrator, LowRankConfig, LowRankState, StepDetail};
use crate::material::MaterialField;
use crate::ops::PhaseSpace;

/// The six coupled schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Imex,
    ImexS,
    ImexBug,
    ImexAbug,
    ImexSBug,
    ImexSAbug,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Imex,
        Scheme::ImexS,
        Scheme::ImexBug,
        Scheme::ImexAbug,
        Scheme::ImexSBug,
        Scheme::ImexSAbug,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::Imex => "IMEX",
            Scheme::ImexS => "IMEX-S",
            Scheme::ImexBug => "IMEX-BUG",
            Scheme::ImexAbug => "IMEX-aBUG",
            Scheme::ImexSBug => "IMEX-S-BUG",
            Scheme::ImexSAbug => "IMEX-S-aBUG",
        }
    }

    /// Density solved first through the Schur complement.
    pub fn is_schur(self) -> bool {
        matches!(self, Scheme::ImexS | Scheme::ImexSBug | Scheme::ImexSAbug)
    }

    pub fn is_low_rank(self) -> bool {
        !matches!(self, Scheme::Imex | Scheme::ImexS)
    }

    pub fn is_augmented(self) -> bool {
        matches!(self, Scheme::ImexAbug | Scheme::ImexSAbug)
    }

    /// The energy parameter whose stability theorem governs the scheme.
    pub fn default_theta(self) -> f64 {
        if self.is_schur() {
            0.0
        } else {
            1.0
        }
    }

    /// The dense counterpart of a low-rank scheme.
    pub fn full_rank(self) -> Scheme {
        if self.is_schur() {
            Scheme::ImexS
        } else {
            Scheme::Imex
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        let scheme = match key.as_str() {
            "imex" => Scheme::Imex,
            "imex-s" => Scheme::ImexS,
            "imex-bug" => Scheme::ImexBug,
            "imex-abug" | "imex-ap-abug" => Scheme::ImexAbug,
            "imex-s-bug" => Scheme::ImexSBug,
            "imex-s-abug" | "imex-s-ap-abug" => Scheme::ImexSAbug,
            _ => return Err(Error::UnknownScheme(s.to_string())),
        };
        Ok(scheme)
    }
}

/// Dense or factored fluctuation.
#[derive(Clone, Debug)]
pub enum MicroState {
    Full(DMatrix<f64>),
    LowRank(LowRankState),
}

impl MicroState {
    /// Initial state for `scheme`. Low-rank schemes factorize `g0` at the
    /// configured rank, or start from `S = 0` with seeded bases when `g0` is
    /// absent or zero.
    pub fn initial(
        ps: &PhaseSpace,
        scheme: Scheme,
        lowrank: Option<&LowRankConfig>,
        g0: Option<&DMatrix<f64>>,
        weighted: bool,
        seed: u64,
    ) -> Result<Self> {
        if let Some(g) = g0 {
            check_shape("initial fluctuation", (ps.n_g(), ps.n_omega()), g.shape())?;
        }
        if !scheme.is_low_rank() {
            return Ok(MicroState::Full(
                g0.cloned().unwrap_or_else(|| DMatrix::zeros(ps.n_g(), ps.n_omega())),
            ));
        }
        let lr = lowrank.ok_or_else(|| {
            Error::InvalidConfig(format!("{scheme} needs a low-rank configuration"))
        })?;
        lr.validate()?;
        let state = match g0 {
            Some(g) if g.amax() > 0.0 => LowRankState::from_dense(ps, g, lr.rank, weighted)?,
            _ => LowRankState::seeded_zero(ps, lr.rank, weighted, seed)?,
        };
        Ok(MicroState::LowRank(state))
    }

    pub fn rank(&self) -> usize {
        match self {
            MicroState::Full(g) => g.nrows().min(g.ncols()),
            MicroState::LowRank(s) => s.rank(),
        }
    }

    pub fn norm_w_squared(&self, ps: &PhaseSpace) -> f64 {
        match self {
            MicroState::Full(g) => ps.norm_w(g).map(|n| n * n).unwrap_or(f64::NAN),
            MicroState::LowRank(s) => s.norm_w_squared(ps),
        }
    }

    pub fn zero_density_residual(&self, ps: &PhaseSpace) -> f64 {
        match self {
            MicroState::Full(g) => diagnostics::zero_density_residual_dense(ps, g),
            MicroState::LowRank(s) => s.zero_density_residual(ps),
        }
    }

    pub fn to_dense(&self, ps: &PhaseSpace) -> DMatrix<f64> {
        match self {
            MicroState::Full(g) => g.clone(),
            MicroState::LowRank(s) => s.reconstruct(ps),
        }
    }

    pub fn as_low_rank(&self) -> Option<&LowRankState> {
        match self {
            MicroState::LowRank(s) => Some(s),
            MicroState::Full(_) => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            MicroState::Full(g) => g.iter().all(|v| v.is_finite()),
            MicroState::LowRank(s) => s.is_finite(),
        }
    }
}

/// What one step did, for stability checks.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub step: usize,
    pub time: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    /// `E~` of the Galerkin starting point `X_hat^T X S V^T V_hat` (weighted
    /// low-rank steps only).
    pub energy_intermediate: Option<f64>,
    pub cg_iterations: Option<usize>,
    pub rank: usize,
}

/// Owns the state of one run.
#[derive(Clone, Debug)]
pub struct Stepper {
    ps: PhaseSpace,
    material: MaterialField,
    scheme: Scheme,
    config: SolverConfig,
    lowrank: Option<LowRankConfig>,
    schur: Option<SchurOperator>,
    rho: DVector<f64>,
    micro: MicroState,
    time: f64,
    step: usize,
    last_detail: Option<StepDetail>,
}

impl Stepper {
    pub fn new(
        ps: PhaseSpace,
        material: MaterialField,
        scheme: Scheme,
        config: SolverConfig,
        lowrank: Option<LowRankConfig>,
        rho0: DVector<f64>,
        micro0: MicroState,
    ) -> Result<Self> {
        config.validate()?;
        material.validate(&ps.grid)?;
        check_len("initial density", ps.n_rho(), rho0.len())?;
        match (&micro0, scheme.is_low_rank()) {
            (MicroState::Full(g), false) => {
                check_shape("initial fluctuation", (ps.n_g(), ps.n_omega()), g.shape())?
            }
            (MicroState::LowRank(s), true) => s.check(&ps)?,
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "micro-state representation does not match scheme {scheme}"
                )))
            }
        }
        let lowrank = if scheme.is_low_rank() {
            let lr = lowrank.ok_or_else(|| {
                Error::InvalidConfig(format!("{scheme} needs a low-rank configuration"))
            })?;
            lr.validate()?;
            if scheme.is_augmented() && lr.integrator == Integrator::Bug {
                return Err(Error::InvalidConfig(format!("{scheme} needs an augmented integrator")));
            }
            if !scheme.is_augmented() && lr.integrator != Integrator::Bug {
                return Err(Error::InvalidConfig(format!("{scheme} needs the fixed-rank integrator")));
            }
            Some(lr)
        } else {
            None
        };
        let schur = if scheme.is_schur() {
            Some(build_schur(&ps, &material, &config)?)
        } else {
            None
        };
        Ok(Stepper {
            ps,
            material,
            scheme,
            config,
            lowrank,
            schur,
            rho: rho0,
            micro: micro0,
            time: 0.0,
            step: 0,
            last_detail: None,
        })
    }

    pub fn phase_space(&self) -> &PhaseSpace {
        &self.ps
    }

    pub fn material(&self) -> &MaterialField {
        &self.material
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn lowrank_config(&self) -> Option<&LowRankConfig> {
        self.lowrank.as_ref()
    }

    pub fn schur(&self) -> Option<&SchurOperator> {
        self.schur.as_ref()
    }

    pub fn rho(&self) -> &DVector<f64> {
        &self.rho
    }

    pub fn micro(&self) -> &MicroState {
        &self.micro
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Intermediate factors of the most recent low-rank step.
    pub fn last_detail(&self) -> Option<&StepDetail> {
        self.last_detail.as_ref()
    }

    /// `E_theta` of the current state with the configured `theta`.
    pub fn energy(&self) -> f64 {
        self.energy_with(self.config.theta)
    }

    pub fn energy_with(&self, theta: f64) -> f64 {
        diagnostics::energy(
            &self.ps,
            &self.rho,
            &self.micro,
            theta,
            self.config.epsilon,
            self.config.dt,
            &self.material,
        )
        .unwrap_or(f64::NAN)
    }

    pub fn record(&self) -> EnergyRecord {
        EnergyRecord {
            step: self.step,
            time: self.time,
            dt: self.config.dt,
            energy: self.energy(),
            rho_norm: self.ps.norm(&self.rho),
            micro_norm_w: self.micro.norm_w_squared(&self.ps).sqrt(),
            rank: self.micro.rank(),
            zero_density_residual: self.micro.zero_density_residual(&self.ps),
            mass: diagnostics::mass(&self.ps.grid, &self.rho),
        }
    }

    /// Advances one step of size `dt`.
    pub fn step(&mut self) -> Result<StepReport> {
        let energy_before = self.energy();
        let t_next = self.time + self.config.dt;
        let mut cg_iterations = None;
        let mut detail = None;
        let (rho_new, micro_new) = match (&self.micro, self.scheme) {
            (MicroState::Full(g), Scheme::Imex) => {
                let (r, g) = fullrank::imex_step(&self.ps, &self.material, &self.config, &self.rho, g, t_next)?;
                (r, MicroState::Full(g))
            }
            (MicroState::Full(g), Scheme::ImexS) => {
                let schur = self.schur.as_ref().ok_or(Error::Singular("missing Schur operator"))?;
                let (r, g) = fullrank::imex_s_step(
                    &self.ps,
                    &self.material,
                    &self.config,
                    schur,
                    &self.rho,
                    g,
                    t_next,
                )?;
                (r, MicroState::Full(g))
            }
            (MicroState::LowRank(state), scheme) => {
                let lr = self.lowrank.as_ref().ok_or(Error::Singular("missing low-rank config"))?;
                if scheme.is_schur() {
                    let schur = self.schur.as_ref().ok_or(Error::Singular("missing Schur operator"))?;
                    let moments = lowrank::explicit_flux_moments(&self.ps, &self.material, &self.config, state, t_next)?;
                    let rhs = fullrank::schur_rhs(&self.ps, &self.material, schur, &self.rho, &moments, t_next)?;
                    let (rho_new, rep) = schur.solve(&rhs, &self.rho)?;
                    cg_iterations = Some(rep.iterations);
                    let (next, d) = self.micro_step(lr, state, &rho_new, t_next)?;
                    detail = Some(d);
                    (rho_new, MicroState::LowRank(next))
                } else {
                    let (next, d) = self.micro_step(lr, state, &self.rho, t_next)?;
                    detail = Some(d);
                    let h = self.ps.flux_div_from_moments(
                        &(0..self.ps.dim()).map(|j| next.flux_moment(&self.ps, j)).collect::<Vec<_>>(),
                    )?;
                    let rho_new = fullrank::macro_diagonal_update(&self.material, &self.config, &self.rho, &h, t_next);
                    (rho_new, MicroState::LowRank(next))
                }
            }
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "micro-state representation does not match scheme {}",
                    self.scheme
                )))
            }
        };
        if !(micro_new.is_finite() && rho_new.iter().all(|v| v.is_finite())) {
            return Err(Error::Diverged { step: self.step + 1 });
        }
        let energy_intermediate = match (&detail, &self.micro) {
            (Some(d), MicroState::LowRank(s)) if s.weighted => {
                let g_sq = self.ps.grid.cell_volume() * d.s_tilde.norm_squared();
                Some(diagnostics::energy_from_norms(
                    self.ps.quad.measure(),
                    self.ps.grid.cell_volume() * self.rho.norm_squared(),
                    g_sq,
                    self.config.epsilon,
                    self.config.dt,
                    self.material.sigma_s_floor,
                    self.config.theta,
                ))
            }
            _ => None,
        };
        self.rho = rho_new;
        self.micro = micro_new;
        self.step += 1;
        self.time = self.step as f64 * self.config.dt;
        self.last_detail = detail;
        Ok(StepReport {
            step: self.step,
            time: self.time,
            energy_before,
            energy_after: self.energy(),
            energy_intermediate,
            cg_iterations,
            rank: self.micro.rank(),
        })
    }

    fn micro_step(
        &self,
        lr: &LowRankConfig,
        state: &LowRankState,
        rho_for_j: &DVector<f64>,
        t_next: f64,
    ) -> Result<(LowRankState, StepDetail)> {
        match lr.integrator {
            Integrator::Bug => {
                lowrank::bug_step_detailed(&self.ps, &self.material, &self.config, state, rho_for_j, t_next)
            }
            Integrator::Abug | Integrator::ApAbug => {
                lowrank::abug_step(&self.ps, &self.material, &self.config, lr, state, rho_for_j, t_next)
            }
        }
    }
}
