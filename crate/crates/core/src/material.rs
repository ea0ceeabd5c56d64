//! Material coefficients and source terms sampled on the staggered lattices.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, check_shape, Error, Result};
use crate::grid::{Lattice, StaggeredGrid};

/// Time dependence shared by every part of a [`Source`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeProfile {
    Constant,
    /// Multiplies the profile by `exp(rate * t)`.
    Exponential { rate: f64 },
}

impl TimeProfile {
    pub fn factor(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Constant => 1.0,
            TimeProfile::Exponential { rate } => (rate * t).exp(),
        }
    }
}

/// Source data: `Phi` on the density lattice and an optional
/// angular-resolved fluctuation source `Psi = U W^T` on the fluctuation
/// lattice (already scaled for the micro equation).
#[derive(Clone, Debug)]
pub struct Source {
    macro_profile: Option<DVector<f64>>,
    micro: Option<(DMatrix<f64>, DMatrix<f64>)>,
    time: TimeProfile,
}

impl Default for Source {
    fn default() -> Self {
        Source::none()
    }
}

impl Source {
    pub fn none() -> Self {
        Source {
            macro_profile: None,
            micro: None,
            time: TimeProfile::Constant,
        }
    }

    pub fn constant(phi: DVector<f64>) -> Self {
        Source {
            macro_profile: Some(phi),
            micro: None,
            time: TimeProfile::Constant,
        }
    }

    pub fn new(
        macro_profile: Option<DVector<f64>>,
        micro: Option<(DMatrix<f64>, DMatrix<f64>)>,
        time: TimeProfile,
    ) -> Result<Self> {
        if let Some((u, w)) = &micro {
            if u.ncols() != w.ncols() {
                return Err(Error::Shape {
                    context: "micro source factors",
                    expected: format!("{} columns", u.ncols()),
                    got: format!("{} columns", w.ncols()),
                });
            }
        }
        Ok(Source {
            macro_profile,
            micro,
            time,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.macro_profile.is_none() && self.micro.is_none()
    }

    pub fn has_micro(&self) -> bool {
        self.micro.is_some()
    }

    /// `Phi(t)` on the density lattice, or `None` if there is no macroscopic
    /// source.
    pub fn macro_at(&self, t: f64) -> Option<DVector<f64>> {
        self.macro_profile
            .as_ref()
            .map(|p| p * self.time.factor(t))
    }

    /// Factors `(c, U, W)` with `Psi(t) = c U W^T`.
    pub fn micro_at(&self, t: f64) -> Option<(f64, &DMatrix<f64>, &DMatrix<f64>)> {
        self.micro
            .as_ref()
            .map(|(u, w)| (self.time.factor(t), u, w))
    }

    /// Dense `Psi(t)`; for tests and the full-rank path.
    pub fn micro_dense_at(&self, t: f64) -> Option<DMatrix<f64>> {
        self.micro_at(t).map(|(c, u, w)| (u * w.transpose()) * c)
    }

    fn check(&self, n_rho: usize, n_g: usize) -> Result<()> {
        if let Some(p) = &self.macro_profile {
            check_len("macro source", n_rho, p.len())?;
        }
        if let Some((u, _)) = &self.micro {
            check_len("micro source rows", n_g, u.nrows())?;
        }
        Ok(())
    }
}

/// Scattering and absorption coefficients on both lattices plus the source.
#[derive(Clone, Debug)]
pub struct MaterialField {
    pub sigma_s_rho: DVector<f64>,
    pub sigma_a_rho: DVector<f64>,
    pub sigma_s_g: DVector<f64>,
    pub sigma_a_g: DVector<f64>,
    /// Lower bound `sigma_0^s` used by the time-step formulas.
    pub sigma_s_floor: f64,
    pub source: Source,
}

impl MaterialField {
    pub fn uniform(grid: &StaggeredGrid, sigma_s: f64, sigma_a: f64) -> Result<Self> {
        Self::from_fn(grid, |_, _| sigma_s, |_, _| sigma_a, None)
    }

    /// Samples the coefficient functions pointwise at every lattice point.
    /// With `floor = None` the floor is the smallest sampled `sigma_s`.
    pub fn from_fn<S, A>(
        grid: &StaggeredGrid,
        sigma_s: S,
        sigma_a: A,
        floor: Option<f64>,
    ) -> Result<Self>
    where
        S: Fn(f64, f64) -> f64,
        A: Fn(f64, f64) -> f64,
    {
        let sigma_s_rho = grid.sample(Lattice::Rho, &sigma_s);
        let sigma_s_g = grid.sample(Lattice::G, &sigma_s);
        let sigma_a_rho = grid.sample(Lattice::Rho, &sigma_a);
        let sigma_a_g = grid.sample(Lattice::G, &sigma_a);
        let floor = floor.unwrap_or_else(|| sigma_s_rho.min().min(sigma_s_g.min()));
        let m = MaterialField {
            sigma_s_rho,
            sigma_a_rho,
            sigma_s_g,
            sigma_a_g,
            sigma_s_floor: floor,
            source: Source::none(),
        };
        m.validate(grid)?;
        Ok(m)
    }

    pub fn with_source(mut self, source: Source) -> Result<Self> {
        self.source = source;
        let n = self.sigma_s_rho.len();
        self.source.check(n, self.sigma_s_g.len())?;
        Ok(self)
    }

    pub fn validate(&self, grid: &StaggeredGrid) -> Result<()> {
        let n = grid.points();
        check_len("sigma_s on rho lattice", n, self.sigma_s_rho.len())?;
        check_len("sigma_a on rho lattice", n, self.sigma_a_rho.len())?;
        check_len("sigma_s on g lattice", n, self.sigma_s_g.len())?;
        check_len("sigma_a on g lattice", n, self.sigma_a_g.len())?;
        if !(self.sigma_s_floor >= 0.0) {
            return Err(Error::InvalidMaterial(format!(
                "scattering floor must be non-negative, got {}",
                self.sigma_s_floor
            )));
        }
        for (name, v) in [
            ("sigma_s", &self.sigma_s_rho),
            ("sigma_s", &self.sigma_s_g),
            ("sigma_a", &self.sigma_a_rho),
            ("sigma_a", &self.sigma_a_g),
        ] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidMaterial(format!("{name} has non-finite entries")));
            }
        }
        let tol = 1e-14 * self.sigma_s_floor.max(1.0);
        if self.sigma_s_rho.min() < self.sigma_s_floor - tol
            || self.sigma_s_g.min() < self.sigma_s_floor - tol
        {
            return Err(Error::InvalidMaterial(format!(
                "sigma_s drops below the floor {}",
                self.sigma_s_floor
            )));
        }
        if self.sigma_a_rho.min() < 0.0 || self.sigma_a_g.min() < 0.0 {
            return Err(Error::InvalidMaterial("sigma_a must be non-negative".into()));
        }
        self.source.check(n, n)?;
        Ok(())
    }

    /// `R = (1/dt + sigma_s/eps^2 + sigma_a)^{-1}` on the fluctuation lattice.
    pub fn implicit_factor(&self, dt: f64, epsilon: f64) -> DVector<f64> {
        let e2 = epsilon * epsilon;
        self.sigma_s_g
            .zip_map(&self.sigma_a_g, |s, a| 1.0 / (1.0 / dt + s / e2 + a))
    }

    /// `sigma_s/eps^2 + sigma_a` on the fluctuation lattice.
    pub fn micro_damping(&self, epsilon: f64) -> DVector<f64> {
        let e2 = epsilon * epsilon;
        self.sigma_s_g.zip_map(&self.sigma_a_g, |s, a| s / e2 + a)
    }

    pub fn has_zero_scattering(&self) -> bool {
        self.sigma_s_g.iter().any(|&s| s <= 0.0) || self.sigma_s_rho.iter().any(|&s| s <= 0.0)
    }

    pub(crate) fn check_micro_source(&self, n_g: usize, n_omega: usize) -> Result<()> {
        if let Some((_, u, w)) = self.source.micro_at(0.0) {
            check_shape("micro source", (n_g, w.ncols()), (u.nrows(), u.ncols()))?;
            check_len("micro source angular rows", n_omega, w.nrows())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_material_is_valid() {
        let g = StaggeredGrid::new_1d((0.0, 1.0), 8).unwrap();
        let m = MaterialField::uniform(&g, 1.0, 0.0).unwrap();
        assert_eq!(m.sigma_s_floor, 1.0);
        let r = m.implicit_factor(0.5, 1.0);
        assert!((r[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid_coefficients() {
        let g = StaggeredGrid::new_1d((0.0, 1.0), 8).unwrap();
        assert!(MaterialField::uniform(&g, 1.0, -1.0).is_err());
        assert!(MaterialField::from_fn(&g, |_, _| 0.5, |_, _| 0.0, Some(1.0)).is_err());
        assert!(MaterialField::uniform(&g, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn exponential_source_decays() {
        let phi = DVector::from_element(4, 2.0);
        let s = Source::new(Some(phi), None, TimeProfile::Exponential { rate: -1.0 }).unwrap();
        let v = s.macro_at(1.0).unwrap();
        assert!((v[0] - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!(s.micro_at(0.0).is_none());
    }
}
