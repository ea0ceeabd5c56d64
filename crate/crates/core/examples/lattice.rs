//! The 2D lattice problem with absorbing blocks and a central source, run
//! with the rank-adaptive Schur scheme. Prints a coarse density map.

use aplr::scenarios::{self, Scenario, ScenarioOptions};
use aplr::Scheme;

fn main() -> aplr::Result<()> {
    let div = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let sc = Scenario::build("lattice2d", ScenarioOptions::default().with_mesh_div(div))?;
    let scheme = Scheme::ImexSAbug;
    let (n, dt) = sc.step_count(sc.dt_for(scheme));
    let lr = sc.lowrank_config(scheme, None, None, None);
    let mut st = sc.stepper(scheme, dt, scheme.default_theta(), lr, true, 0)?;
    println!("{} cells per axis, {} directions, {n} steps of {dt:.3e}", sc.grid().cells(0), sc.ps.n_omega());
    for k in 1..=n {
        let rep = st.step()?;
        if k % (n / 5).max(1) == 0 {
            println!("  t = {:.3}  rank {:2}  energy {:.4e}", rep.time, rep.rank, rep.energy_after);
        }
    }
    for slice in &sc.slices {
        let line = scenarios::extract_slice(sc.grid(), st.rho(), slice);
        let peak = line.iter().map(|p| p.1).fold(f64::MIN, f64::max);
        println!("slice {}: {} samples, peak {peak:.4e}", slice.name, line.len());
    }

    // log-scaled density on a character grid
    let g = sc.grid();
    let cells = g.cells(0);
    let stride = (cells / 28).max(1);
    let max = st.rho().amax();
    let shades = [' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];
    for j in (0..g.cells(1)).rev().step_by(stride) {
        let row: String = (0..cells)
            .step_by(stride)
            .map(|i| {
                let v = st.rho()[g.index_of(0, i, j)].max(1e-12) / max;
                let level = ((v.log10() + 4.0) / 4.0).clamp(0.0, 0.999);
                shades[(level * shades.len() as f64) as usize]
            })
            .collect();
        println!("  {row}");
    }
    Ok(())
}
