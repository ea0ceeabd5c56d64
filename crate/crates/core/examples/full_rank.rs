//! Full-rank IMEX and IMEX-S on a Gaussian pulse in the intermediate regime.

use aplr::diagnostics;
use aplr::scenarios::{Scenario, ScenarioOptions};
use aplr::Scheme;

fn main() -> aplr::Result<()> {
    let sc = Scenario::build("gaussian1d-mid", ScenarioOptions::default().with_mesh_div(2))?;
    let reference = sc.reference_density()?;
    for scheme in [Scheme::Imex, Scheme::ImexS] {
        let (n, dt) = sc.step_count(sc.dt_for(scheme));
        let mut st = sc.stepper(scheme, dt, scheme.default_theta(), None, true, 0)?;
        let e0 = st.energy();
        let mut cg = 0;
        for _ in 0..n {
            let rep = st.step()?;
            cg += rep.cg_iterations.unwrap_or(0);
        }
        let rec = st.record();
        print!(
            "{scheme:7} steps {n:5}  dt {dt:.3e}  E/E0 {:.6}  mass {:.6}",
            rec.energy / e0,
            rec.mass
        );
        if let Some(r) = &reference {
            print!("  rel err vs refined {:.3e}", diagnostics::relative_l2(st.rho(), r)?);
        }
        if cg > 0 {
            print!("  cg iterations {cg}");
        }
        println!();
    }
    Ok(())
}
