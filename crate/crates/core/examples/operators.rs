//! The staggered periodic grid, discrete transport operators and the two
//! time-step bounds.

use aplr::angular::QuadratureSet;
use aplr::diagnostics::{self, DtBound};
use aplr::grid::{Lattice, StaggeredGrid};
use aplr::material::MaterialField;
use aplr::ops::PhaseSpace;
use nalgebra::DMatrix;
use std::f64::consts::PI;

fn main() -> aplr::Result<()> {
    let grid = StaggeredGrid::new_2d([(0.0, 1.0), (0.0, 1.0)], [16, 16])?;
    let ps = PhaseSpace::new(grid.clone(), QuadratureSet::chebyshev_legendre_2d(4)?)?;
    println!(
        "{} density points, {} fluctuation points, {} directions",
        ps.n_rho(),
        ps.n_g(),
        ps.n_omega()
    );

    // summation by parts: |S| <rho, H g> = -<J rho, g>_w
    let rho = grid.sample(Lattice::Rho, |x, y| (2.0 * PI * x).sin() * (2.0 * PI * y).cos());
    let mut g = DMatrix::from_fn(ps.n_g(), ps.n_omega(), |i, k| {
        let [x, y] = grid.position(Lattice::G, i);
        (x + 2.0 * y + k as f64).sin()
    });
    ps.project_right(&mut g);
    let lhs = ps.quad.measure() * ps.inner(&rho, &ps.flux_div(&g)?)?;
    let rhs = ps.inner_w(&ps.density_grad(&rho)?.to_dense(), &g)?;
    println!("|S| <rho, H g> = {lhs:+.12e}");
    println!("   <J rho, g>_w = {rhs:+.12e}");

    // the projected upwind advection keeps zero angular mass
    let a = ps.advect_projected_dense(&g)?;
    let mass = (a * ps.quad.weights_vec()).amax();
    println!("max |<A g>| = {mass:.2e}");

    let material = MaterialField::uniform(&grid, 1.0, 0.0)?;
    for eps in [1.0, 1e-2, 1e-4] {
        let explicit = diagnostics::dt_explicit(&grid, eps, &material);
        let implicit = match diagnostics::dt_implicit(&grid, eps, &material) {
            DtBound::Finite(v) => format!("{v:.3e}"),
            DtBound::Unconditional => "unconditional".to_string(),
        };
        println!("eps = {eps:.0e}: dt_E = {explicit:.3e}, dt_I = {implicit}");
    }
    Ok(())
}
