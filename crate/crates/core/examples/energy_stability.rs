//! Step-by-step energy of the weighted and unweighted low-rank schemes on
//! the two-stream problem.

use aplr::scenarios::{Scenario, ScenarioOptions};
use aplr::Scheme;

fn main() -> aplr::Result<()> {
    let sc = Scenario::build("bimodal1d", ScenarioOptions::default().with_mesh_div(2))?;
    for scheme in [Scheme::ImexBug, Scheme::ImexSBug, Scheme::ImexAbug] {
        for weighted in [true, false] {
            let (n, dt) = sc.step_count(sc.dt_for(scheme));
            let cap = aplr::lowrank::rank_cap_for(&sc.ps, weighted);
            let lr = sc.lowrank_config(scheme, None, None, None).map(|c| match scheme {
                Scheme::ImexAbug => c.with_max_rank(cap),
                _ => c,
            });
            let mut st = sc.stepper(scheme, dt, scheme.default_theta(), lr, weighted, 0)?;
            let e0 = st.energy();
            let mut worst = f64::NEG_INFINITY;
            let mut growth = 0;
            for _ in 0..n {
                let rep = st.step()?;
                let rel = (rep.energy_after - rep.energy_before) / e0;
                worst = worst.max(rel);
                if rel > 1e-12 {
                    growth += 1;
                }
            }
            println!(
                "{:11} {:10} steps {n:4}  E_end/E0 {:.6}  largest dE/E0 {worst:+.2e}  growth steps {growth}",
                scheme.tag(),
                if weighted { "weighted" } else { "unweighted" },
                st.energy() / e0
            );
        }
    }
    Ok(())
}
