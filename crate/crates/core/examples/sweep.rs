//! A parameter sweep through the runner, writing per-run artifacts and a
//! summary table.

use aplr::runner::{self, RunManifest, SweepAxis};
use aplr::Scheme;

fn main() -> aplr::Result<()> {
    let out = std::env::temp_dir().join("aplr-sweep-example");
    let mut m = RunManifest::new("gaussian1d-mid", Scheme::ImexBug);
    m.mesh_div = 4;
    m.out = Some(out.clone());
    // the refined full-rank reference is off by default for this scenario
    m.reference = Some(true);
    let axes = [SweepAxis::parse("rank=1,2,4,8")?, SweepAxis::parse("scheme=IMEX-BUG,IMEX-S-BUG")?];
    for member in runner::sweep(&m, &axes)? {
        match &member.outcome {
            Ok(o) => println!(
                "{:28} steps {:4}  final energy {:.6e}  rel err {}",
                member.label,
                o.records.len() - 1,
                o.final_record().energy,
                o.relative_l2_error.map_or("-".into(), |e| format!("{e:.3e}"))
            ),
            Err(e) => println!("{:28} failed: {e}", member.label),
        }
    }
    println!("table written to {}", out.join("sweep.csv").display());
    Ok(())
}
