//! Spatial order on the manufactured solution, kinetic and diffusive regimes.

use aplr::diagnostics;
use aplr::runner::fitted_slope;
use aplr::scenarios::{Scenario, ScenarioOptions};
use aplr::Scheme;

fn main() -> aplr::Result<()> {
    let sizes = [16usize, 32, 64];
    for eps in [1.0, 1e-6] {
        let mut errs = Vec::new();
        for n in sizes {
            let sc = Scenario::build(&format!("mms2d-{n}"), ScenarioOptions::default().with_epsilon(eps))?;
            let scheme = Scheme::ImexSAbug;
            let (steps, dt) = sc.step_count(sc.dt_for(scheme));
            let lr = sc.lowrank_config(scheme, None, None, None);
            let mut st = sc.stepper(scheme, dt, scheme.default_theta(), lr, true, 0)?;
            for _ in 0..steps {
                st.step()?;
            }
            let exact = sc.reference_density()?.expect("closed-form density");
            let e = diagnostics::l2_error(sc.grid(), st.rho(), &exact)?;
            println!("eps {eps:.0e}  N {n:3}  steps {steps:4}  rank {:2}  L2 error {e:.4e}", st.micro().rank());
            errs.push(e);
        }
        let ns: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
        println!("  fitted order {:.2}", -fitted_slope(&ns, &errs));
    }
    Ok(())
}
