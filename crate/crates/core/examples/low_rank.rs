//! Fixed-rank BUG, rank-adaptive aBUG and the diffusion-enriched AP-aBUG
//! compared with the full-rank solution.

use aplr::scenarios::{Scenario, ScenarioOptions};
use aplr::Scheme;

fn main() -> aplr::Result<()> {
    let sc = Scenario::build("gaussian1d-mid", ScenarioOptions::default().with_mesh_div(2))?;
    let (n, dt) = sc.step_count(sc.dt_for(Scheme::Imex));
    let mut full = sc.stepper(Scheme::Imex, dt, 1.0, None, true, 0)?;
    for _ in 0..n {
        full.step()?;
    }
    let cases = [
        ("BUG r=4", Scheme::ImexBug, Some(4), None),
        ("aBUG tau=1e-5", Scheme::ImexAbug, None, Some(false)),
        ("AP-aBUG tau=1e-5", Scheme::ImexAbug, None, Some(true)),
    ];
    for (label, scheme, rank, ap) in cases {
        let lr = sc.lowrank_config(scheme, rank, None, ap);
        let mut st = sc.stepper(scheme, dt, scheme.default_theta(), lr, true, 0)?;
        let mut ranks = Vec::with_capacity(n);
        for _ in 0..n {
            ranks.push(st.step()?.rank);
        }
        let diff = (st.rho() - full.rho()).norm() / full.rho().norm();
        let lr = st.micro().as_low_rank().expect("low-rank state");
        println!(
            "{label:17} final rank {:2} (max {:2})  |rho - rho_full|/|rho_full| {diff:.2e}  orth err {:.1e}  zero-density {:.1e}",
            st.micro().rank(),
            ranks.iter().max().unwrap(),
            lr.orthonormality_error(),
            lr.zero_density_residual(st.phase_space()),
        );
    }
    Ok(())
}
