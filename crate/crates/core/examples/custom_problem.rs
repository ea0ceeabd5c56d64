//! Assembling a stepper by hand: heterogeneous scattering, a decaying
//! source and an anisotropic initial fluctuation.

use aplr::angular::QuadratureSet;
use aplr::fullrank::SolverConfig;
use aplr::grid::{Lattice, StaggeredGrid};
use aplr::lowrank::LowRankConfig;
use aplr::material::{MaterialField, Source, TimeProfile};
use aplr::ops::PhaseSpace;
use aplr::{diagnostics, MicroState, Scheme, Stepper};
use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

fn main() -> aplr::Result<()> {
    let grid = StaggeredGrid::new_1d((0.0, 2.0), 128)?;
    let ps = PhaseSpace::new(grid.clone(), QuadratureSet::gauss_legendre_1d(16)?)?;
    let eps = 0.05;

    let phi = grid.sample(Lattice::Rho, |x, _| (-40.0 * (x - 1.0).powi(2)).exp());
    let source = Source::new(Some(phi), None, TimeProfile::Exponential { rate: -10.0 })?;
    let material = MaterialField::from_fn(
        &grid,
        |x, _| if (0.5..1.5).contains(&x) { 5.0 } else { 0.5 },
        |_, _| 0.1,
        None,
    )?
    .with_source(source)?;

    let rho0 = DVector::from_element(ps.n_rho(), 0.1);
    let xs = grid.sample(Lattice::G, |x, _| (PI * x).sin());
    let mu = DVector::from_column_slice(ps.quad.omega(0));
    let mut g0: DMatrix<f64> = &xs * mu.transpose() * 0.2;
    ps.project_right(&mut g0);

    let dt = diagnostics::dt_explicit(&grid, eps, &material);
    let (n, dt) = aplr::scenarios::step_count(0.5, dt);
    let cfg = SolverConfig::new(eps, dt)?;
    let lr = LowRankConfig::abug(4, 1e-6).with_max_rank(aplr::lowrank::rank_cap(&ps));
    let micro = MicroState::initial(&ps, Scheme::ImexAbug, Some(&lr), Some(&g0), true, 0)?;
    let mut st = Stepper::new(ps, material, Scheme::ImexAbug, cfg, Some(lr), rho0, micro)?;
    for k in 1..=n {
        let rep = st.step()?;
        if k % (n / 10).max(1) == 0 {
            let rec = st.record();
            println!("t {:.3}  rank {:2}  mass {:.5}  energy {:.5e}", rep.time, rep.rank, rec.mass, rec.energy);
        }
    }
    Ok(())
}
