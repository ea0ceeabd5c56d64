use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use aplr::runner::{self, RunManifest, SweepAxis};
use aplr::scenarios::{Scenario, ScenarioOptions, SCENARIO_NAMES};
use aplr::Scheme;

#[derive(Parser)]
#[command(name = "aplr", version, about = "AP IMEX / low-rank kinetic transport runs")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Run one scenario.
    Run(RunArgs),
    /// Run the cartesian product of `--axis key=v1,v2` overrides.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long = "axis", value_name = "KEY=V1,V2")]
        axes: Vec<String>,
    },
    /// Print the built-in scenarios.
    ListScenarios,
}

#[derive(Args)]
struct RunArgs {
    /// Manifest file of `key = value` lines; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    max_rank: Option<usize>,
    #[arg(long)]
    dt_mult: Option<f64>,
    #[arg(long)]
    mesh_div: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    unweighted: bool,
    /// Force the diffusion-limit enrichment on or off.
    #[arg(long)]
    ap: Option<bool>,
    /// Force the reference computation on or off.
    #[arg(long)]
    reference: Option<bool>,
    #[arg(long)]
    disable_source: bool,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Repeat the run five times and report the mean step time.
    #[arg(long)]
    bench: bool,
}

impl RunArgs {
    fn manifest(&self) -> aplr::Result<RunManifest> {
        let mut m = match &self.config {
            Some(p) => RunManifest::from_file(p)?,
            None => {
                let name = self.scenario.as_deref().ok_or_else(|| {
                    aplr::Error::InvalidConfig("either --config or --scenario is required".into())
                })?;
                RunManifest::new(name, Scheme::ImexSBug)
            }
        };
        if let Some(s) = &self.scenario {
            m.scenario = s.clone();
        }
        if let Some(s) = self.scheme {
            m.scheme = s;
        }
        m.rank = self.rank.or(m.rank);
        m.tau = self.tau.or(m.tau);
        m.max_rank = self.max_rank.or(m.max_rank);
        m.dt_mult = self.dt_mult.unwrap_or(m.dt_mult);
        m.mesh_div = self.mesh_div.unwrap_or(m.mesh_div);
        m.theta = self.theta.or(m.theta);
        m.epsilon = self.epsilon.or(m.epsilon);
        m.unweighted |= self.unweighted;
        m.ap = self.ap.or(m.ap);
        m.reference = self.reference.or(m.reference);
        m.disable_source |= self.disable_source;
        m.max_steps = self.max_steps.or(m.max_steps);
        m.out = self.out.clone().or(m.out);
        m.seed = self.seed.unwrap_or(m.seed);
        m.bench |= self.bench;
        m.validate()?;
        Ok(m)
    }
}

fn list() {
    println!("{:<20} {:>6} {:>10} {:>8} {:>10}", "name", "dim", "epsilon", "t_final", "points");
    for name in SCENARIO_NAMES {
        match Scenario::build(name, ScenarioOptions::default()) {
            Ok(sc) => println!(
                "{:<20} {:>6} {:>10.1e} {:>8} {:>10}",
                name,
                sc.grid().dim(),
                sc.epsilon,
                sc.t_final,
                sc.grid().points()
            ),
            Err(e) => println!("{name:<20} error: {e}"),
        }
    }
}

fn run(args: &RunArgs) -> aplr::Result<bool> {
    let m = args.manifest()?;
    let o = runner::run(&m)?;
    print!("{}", runner::summary_text(&o));
    Ok(o.succeeded())
}

fn sweep(args: &RunArgs, axes: &[String]) -> aplr::Result<bool> {
    let m = args.manifest()?;
    let axes = axes.iter().map(|a| SweepAxis::parse(a)).collect::<aplr::Result<Vec<_>>>()?;
    let members = runner::sweep(&m, &axes)?;
    print!("{}", runner::sweep_csv(&axes, &members));
    let mut ok = true;
    for mem in &members {
        match &mem.outcome {
            Ok(o) if o.succeeded() => {}
            Ok(o) => {
                ok = false;
                if let Some((step, msg)) = &o.failure {
                    eprintln!("{}: failed at step {step}: {msg}", mem.label);
                }
            }
            Err(e) => {
                ok = false;
                eprintln!("{}: {e}", mem.label);
            }
        }
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.verb {
        Verb::Run(a) => run(a),
        Verb::Sweep { run: a, axes } => sweep(a, axes),
        Verb::ListScenarios => {
            list();
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
