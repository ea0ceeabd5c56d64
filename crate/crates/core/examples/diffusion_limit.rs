//! As epsilon shrinks the kinetic density approaches the solution of the
//! limiting diffusion equation, at a step size independent of epsilon.

use aplr::diagnostics;
use aplr::scenarios::{Scenario, ScenarioOptions};
use aplr::Scheme;

fn main() -> aplr::Result<()> {
    for eps in [1e-1, 1e-2, 1e-4, 1e-6] {
        let opts = ScenarioOptions::default().with_mesh_div(2).with_epsilon(eps);
        let sc = Scenario::build("gaussian1d-diff", opts)?;
        let reference = sc.reference_density()?.expect("diffusion reference");
        for scheme in [Scheme::ImexS, Scheme::ImexSAbug] {
            let (n, dt) = sc.step_count(sc.dt_for(scheme));
            let lr = sc.lowrank_config(scheme, None, None, None);
            let mut st = sc.stepper(scheme, dt, scheme.default_theta(), lr, true, 0)?;
            for _ in 0..n {
                st.step()?;
            }
            println!(
                "eps {eps:.0e}  {scheme:11} steps {n:4}  rank {:2}  rel err {:.3e}",
                st.micro().rank(),
                diagnostics::relative_l2(st.rho(), &reference)?
            );
        }
    }
    Ok(())
}
