mod common;

use nalgebra::{DMatrix, DVector};

use aplr::fullrank::{build_schur, imex_s_step, imex_step, SolverConfig};
use aplr::grid::{Lattice, Side};
use aplr::lowrank::{bug_step_detailed, LowRankConfig, LowRankState};
use aplr::material::{MaterialField, Source};
use aplr::stepper::{MicroState, Scheme, Stepper};

use common::*;

fn wavy_material(ps: &aplr::ops::PhaseSpace) -> MaterialField {
    MaterialField::from_fn(
        &ps.grid,
        |x, y| 1.0 + 0.5 * (6.0 * x).sin() + 0.2 * y.cos(),
        |x, _| 0.3 + 0.2 * (4.0 * x).cos(),
        None,
    )
    .unwrap()
}

#[test]
fn coordinate_differences_match_library_stencils() {
    for ps in [phase_space_1d(7, 4), phase_space_2d(4, 5, 2)] {
        let g = &ps.grid;
        for axis in 0..ps.dim() {
            assert_eq!(g.diff_matrix(axis, Side::Plus), oracle_grad(g, axis));
            assert_eq!(g.diff_matrix(axis, Side::Minus), oracle_div(g, axis));
            for side in [Side::Plus, Side::Minus] {
                assert_eq!(g.shift_diff_matrix(Lattice::G, axis, side), oracle_shift(g, axis, side));
            }
        }
    }
}

#[test]
fn operators_match_dense_assembly() {
    let mut r = rng(11);
    for ps in [phase_space_1d(8, 8), phase_space_2d(4, 3, 2)] {
        let ops = dense_ops(&ps);
        let g = random_matrix(&mut r, ps.n_g(), ps.n_omega());
        let rho = random_vector(&mut r, ps.n_rho());
        let a = ps.advect_projected_dense(&g).unwrap();
        let a_ref = unvec(&(&ops.advect_projected * vec_of(&g)), ps.n_g(), ps.n_omega());
        assert!((a - &a_ref).amax() <= 1e-13 * a_ref.amax());
        let h = ps.flux_div(&g).unwrap();
        let h_ref = &ops.flux_div * vec_of(&g);
        assert!((h - &h_ref).amax() <= 1e-13 * h_ref.amax());
        let j = ps.density_grad(&rho).unwrap().to_dense();
        let j_ref = unvec(&(&ops.density_grad * &rho), ps.n_g(), ps.n_omega());
        assert!((j - &j_ref).amax() <= 1e-13 * j_ref.amax());
    }
}

#[test]
fn factored_advection_matches_dense() {
    let mut r = rng(12);
    let ps = phase_space_1d(8, 8);
    for weighted in [true, false] {
        let m = ps.metric(weighted);
        let x = aplr::lowrank::orthonormal_basis(&random_matrix(&mut r, ps.n_g(), 3));
        let v = aplr::lowrank::orthonormal_basis(&random_matrix(&mut r, ps.n_omega(), 3));
        let s = random_matrix(&mut r, 3, 3);
        let f = ps.advect_projected(&x, &s, &v, weighted).unwrap().to_dense();
        let mut g = &x * &s * v.transpose();
        for (k, mut col) in g.column_iter_mut().enumerate() {
            col /= m[k];
        }
        let mut dense = ps.advect_projected_dense(&g).unwrap();
        for (k, mut col) in dense.column_iter_mut().enumerate() {
            col *= m[k];
        }
        assert!((f - &dense).amax() <= 1e-12 * dense.amax().max(1.0));
    }
}

#[test]
fn full_rank_steps_match_block_solve() {
    let mut r = rng(13);
    let ps = phase_space_1d(8, 4);
    let phi = ps.grid.sample(Lattice::Rho, |x, _| 0.5 + (2.0 * std::f64::consts::PI * x).sin());
    let material = wavy_material(&ps).with_source(Source::constant(phi)).unwrap();
    for eps in [1.0, 1e-2, 1e-5] {
        let cfg = SolverConfig::new(eps, 3e-3).unwrap();
        let rho = random_vector(&mut r, ps.n_rho());
        let g = random_constrained_g(&mut r, &ps);
        let (r1, g1) = imex_step(&ps, &material, &cfg, &rho, &g, cfg.dt).unwrap();
        let (r1o, g1o) = block_oracle_step(&ps, &material, &cfg, &rho, &g, cfg.dt, false);
        assert!((r1 - &r1o).amax() <= 1e-10 * r1o.amax().max(1.0), "IMEX rho at eps {eps}");
        assert!((g1 - &g1o).amax() <= 1e-10 * g1o.amax().max(1.0), "IMEX G at eps {eps}");
        let schur = build_schur(&ps, &material, &cfg).unwrap();
        let (r2, g2) = imex_s_step(&ps, &material, &cfg, &schur, &rho, &g, cfg.dt).unwrap();
        let (r2o, g2o) = block_oracle_step(&ps, &material, &cfg, &rho, &g, cfg.dt, true);
        assert!((r2 - &r2o).amax() <= 1e-10 * r2o.amax().max(1.0), "IMEX-S rho at eps {eps}");
        assert!((g2 - &g2o).amax() <= 1e-10 * g2o.amax().max(1.0), "IMEX-S G at eps {eps}");
    }
}

#[test]
fn full_rank_2d_steps_match_block_solve() {
    let mut r = rng(14);
    let ps = phase_space_2d(3, 4, 2);
    let material = wavy_material(&ps);
    let cfg = SolverConfig::new(0.1, 1e-2).unwrap();
    let rho = random_vector(&mut r, ps.n_rho());
    let g = random_constrained_g(&mut r, &ps);
    let schur = build_schur(&ps, &material, &cfg).unwrap();
    let (r2, g2) = imex_s_step(&ps, &material, &cfg, &schur, &rho, &g, cfg.dt).unwrap();
    let (r2o, g2o) = block_oracle_step(&ps, &material, &cfg, &rho, &g, cfg.dt, true);
    assert!((r2 - r2o).amax() < 1e-10);
    assert!((g2 - g2o).amax() < 1e-10);
    let (r1, g1) = imex_step(&ps, &material, &cfg, &rho, &g, cfg.dt).unwrap();
    let (r1o, g1o) = block_oracle_step(&ps, &material, &cfg, &rho, &g, cfg.dt, false);
    assert!((r1 - r1o).amax() < 1e-10);
    assert!((g1 - g1o).amax() < 1e-10);
}

#[test]
fn bug_step_satisfies_projected_equation() {
    let mut r = rng(15);
    let ps = phase_space_1d(10, 6);
    let material = wavy_material(&ps);
    for (eps, weighted) in [(1.0, true), (1e-3, true), (0.5, false)] {
        let cfg = SolverConfig::new(eps, 1e-2).unwrap();
        let g0 = random_constrained_g(&mut r, &ps);
        let st = LowRankState::from_dense(&ps, &g0, 3, weighted).unwrap();
        let rho = random_vector(&mut r, ps.n_rho());
        let (_, detail) = bug_step_detailed(&ps, &material, &cfg, &st, &rho, cfg.dt).unwrap();
        let (res, scale) = galerkin_residual(&ps, &material, &cfg, &detail, &rho, weighted);
        assert!(res <= 1e-10 * scale, "residual {res:e} vs scale {scale:e}");
    }
}

#[test]
fn augmented_low_rank_tracks_full_rank() {
    // initial data of exact rank two, represented with room for the full
    // constrained angular space; small tau keeps the truncation error well
    // below the comparison tolerance
    let ps = phase_space_1d(32, 8);
    let material = MaterialField::uniform(&ps.grid, 1.0, 0.0).unwrap();
    let rho0 = ps.grid.sample(Lattice::Rho, |x, _| 1.0 + 0.3 * (2.0 * std::f64::consts::PI * x).cos());
    let xs = ps.grid.sample(Lattice::G, |x, _| (2.0 * std::f64::consts::PI * x).sin());
    let xc = ps.grid.sample(Lattice::G, |x, _| (4.0 * std::f64::consts::PI * x).cos());
    let mu = DVector::from_column_slice(ps.quad.omega(0));
    let mu3 = mu.map(|m| m * m * m - 0.6 * m);
    let mut g0 = &xs * mu.transpose() * 0.1 + &xc * mu3.transpose() * 0.05;
    ps.project_right(&mut g0);
    let cfg = SolverConfig::new(0.5, 2e-3).unwrap();
    let cap = aplr::lowrank::rank_cap(&ps);
    let lr = LowRankConfig::abug(cap, 1e-8).with_max_rank(cap);
    let micro = MicroState::initial(&ps, Scheme::ImexAbug, Some(&lr), Some(&g0), true, 0).unwrap();
    let mut low = Stepper::new(ps.clone(), material.clone(), Scheme::ImexAbug, cfg, Some(lr), rho0.clone(), micro).unwrap();
    let mut full = Stepper::new(ps.clone(), material, Scheme::Imex, cfg, None, rho0, MicroState::Full(g0)).unwrap();
    for _ in 0..10 {
        low.step().unwrap();
        full.step().unwrap();
    }
    let drho = (low.rho() - full.rho()).amax();
    let dg = (low.micro().to_dense(&ps) - full.micro().to_dense(&ps)).amax();
    assert!(drho < 1e-6, "rho differs by {drho:e}");
    assert!(dg < 1e-6, "G differs by {dg:e}");
}

#[test]
fn low_rank_energy_matches_reconstruction() {
    let mut r = rng(16);
    let ps = phase_space_2d(4, 4, 2);
    let g = random_constrained_g(&mut r, &ps);
    let st = LowRankState::from_dense(&ps, &g, 4, true).unwrap();
    let dense = st.reconstruct(&ps);
    let a = st.norm_w_squared(&ps);
    let b = ps.norm_w(&dense).unwrap().powi(2);
    assert!((a - b).abs() <= 1e-12 * b);
    let full = DMatrix::zeros(ps.n_g(), ps.n_omega()) + dense;
    assert!((MicroState::Full(full).norm_w_squared(&ps) - a).abs() <= 1e-12 * a);
}
