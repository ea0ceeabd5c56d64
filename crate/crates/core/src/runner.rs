//! Run manifests, scenario runs, parameter sweeps and their on-disk
//! artifacts.
//!
//! A manifest is a list of `key = value` lines; `#` starts a comment.
//! `scenario` is the only required key.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;

use crate::diagnostics::{self, EnergyRecord};
use crate::error::{Error, Result};
use crate::grid::{Lattice, StaggeredGrid};
use crate::scenarios::{extract_slice, Reference, Scenario, ScenarioOptions};
use crate::stepper::Scheme;

/// Keys understood by [`RunManifest::set`].
pub const MANIFEST_KEYS: [&str; 17] = [
    "scenario",
    "scheme",
    "rank",
    "tau",
    "max_rank",
    "dt_mult",
    "mesh_div",
    "theta",
    "unweighted",
    "epsilon",
    "ap",
    "reference",
    "disable_source",
    "max_steps",
    "out",
    "seed",
    "bench",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub scenario: String,
    pub scheme: Scheme,
    pub rank: Option<usize>,
    pub tau: Option<f64>,
    pub max_rank: Option<usize>,
    pub dt_mult: f64,
    pub mesh_div: usize,
    /// Defaults to the scheme's own energy parameter.
    pub theta: Option<f64>,
    pub unweighted: bool,
    pub epsilon: Option<f64>,
    /// Diffusion-limit enrichment for augmented schemes; `None` lets the
    /// scenario decide.
    pub ap: Option<bool>,
    /// `None` computes only cheap references (closed form, diffusion limit).
    pub reference: Option<bool>,
    pub disable_source: bool,
    pub max_steps: Option<usize>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub bench: bool,
}

impl RunManifest {
    pub fn new(scenario: &str, scheme: Scheme) -> Self {
        RunManifest {
            scenario: scenario.to_string(),
            scheme,
            rank: None,
            tau: None,
            max_rank: None,
            dt_mult: 1.0,
            mesh_div: 1,
            theta: None,
            unweighted: false,
            epsilon: None,
            ap: None,
            reference: None,
            disable_source: false,
            max_steps: None,
            out: None,
            seed: 0,
            bench: false,
        }
    }

    /// Parses `key = value` lines. Later lines override earlier ones.
    pub fn parse(text: &str) -> Result<Self> {
        let mut m = RunManifest::new("", Scheme::ImexSBug);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            m.set(k.trim(), v.trim()).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        if m.scenario.is_empty() {
            return Err(Error::Parse {
                line: 0,
                message: "missing required key `scenario`".into(),
            });
        }
        Ok(m)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Applies one override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::InvalidConfig(format!("bad value `{v}` for `{key}`")))
        }
        fn flag(key: &str, v: &str) -> Result<bool> {
            match v.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" | "on" => Ok(true),
                "false" | "no" | "0" | "off" => Ok(false),
                _ => Err(Error::InvalidConfig(format!("bad flag `{v}` for `{key}`"))),
            }
        }
        match key.replace('-', "_").as_str() {
            "scenario" => self.scenario = value.to_string(),
            "scheme" => self.scheme = value.parse()?,
            "rank" => self.rank = Some(num(key, value)?),
            "tau" => self.tau = Some(num(key, value)?),
            "max_rank" => self.max_rank = Some(num(key, value)?),
            "dt_mult" => self.dt_mult = num(key, value)?,
            "mesh_div" => self.mesh_div = num(key, value)?,
            "theta" => self.theta = Some(num(key, value)?),
            "unweighted" => self.unweighted = flag(key, value)?,
            "epsilon" => self.epsilon = Some(num(key, value)?),
            "ap" => self.ap = Some(flag(key, value)?),
            "reference" => self.reference = Some(flag(key, value)?),
            "disable_source" => self.disable_source = flag(key, value)?,
            "max_steps" => self.max_steps = Some(num(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "seed" => self.seed = num(key, value)?,
            "bench" => self.bench = flag(key, value)?,
            _ => return Err(Error::InvalidConfig(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_mult > 0.0 && self.dt_mult.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt_mult must be positive, got {}", self.dt_mult)));
        }
        if self.mesh_div == 0 {
            return Err(Error::InvalidConfig("mesh_div must be at least 1".into()));
        }
        if let Some(t) = self.theta {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidConfig(format!("theta must lie in [0, 1], got {t}")));
            }
        }
        if self.rank == Some(0) {
            return Err(Error::InvalidConfig("rank must be at least 1".into()));
        }
        if let Some(t) = self.tau {
            if !(t > 0.0) {
                return Err(Error::InvalidConfig(format!("tau must be positive, got {t}")));
            }
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::InvalidConfig(format!("epsilon must be positive, got {e}")));
            }
        }
        if self.unweighted && !self.scheme.is_low_rank() {
            return Err(Error::InvalidConfig(format!(
                "unweighted mode needs a low-rank scheme, got {}",
                self.scheme
            )));
        }
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        self.theta.unwrap_or_else(|| self.scheme.default_theta())
    }

    pub fn scenario_options(&self) -> ScenarioOptions {
        ScenarioOptions {
            mesh_div: self.mesh_div,
            epsilon: self.epsilon,
            disable_source: self.disable_source,
        }
    }

    /// The manifest as `key = value` text that [`parse`](Self::parse) reads
    /// back.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario = {}", self.scenario);
        let _ = writeln!(s, "scheme = {}", self.scheme);
        if let Some(r) = self.rank {
            let _ = writeln!(s, "rank = {r}");
        }
        if let Some(t) = self.tau {
            let _ = writeln!(s, "tau = {t:e}");
        }
        if let Some(r) = self.max_rank {
            let _ = writeln!(s, "max_rank = {r}");
        }
        let _ = writeln!(s, "dt_mult = {}", self.dt_mult);
        let _ = writeln!(s, "mesh_div = {}", self.mesh_div);
        if let Some(t) = self.theta {
            let _ = writeln!(s, "theta = {t}");
        }
        let _ = writeln!(s, "unweighted = {}", self.unweighted);
        if let Some(e) = self.epsilon {
            let _ = writeln!(s, "epsilon = {e:e}");
        }
        if let Some(a) = self.ap {
            let _ = writeln!(s, "ap = {a}");
        }
        if let Some(r) = self.reference {
            let _ = writeln!(s, "reference = {r}");
        }
        let _ = writeln!(s, "disable_source = {}", self.disable_source);
        if let Some(n) = self.max_steps {
            let _ = writeln!(s, "max_steps = {n}");
        }
        if let Some(o) = &self.out {
            let _ = writeln!(s, "out = {}", o.display());
        }
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "bench = {}", self.bench);
        s
    }
}

/// Everything a run produced.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub grid: StaggeredGrid,
    pub dt: f64,
    pub planned_steps: usize,
    pub records: Vec<EnergyRecord>,
    pub rho: DVector<f64>,
    pub slices: Vec<(String, Vec<(f64, f64)>)>,
    pub total_seconds: f64,
    pub mean_step_seconds: f64,
    /// Mean per-step time over five repetitions when benchmarking.
    pub bench_mean_step_seconds: Option<f64>,
    pub l2_error: Option<f64>,
    pub relative_l2_error: Option<f64>,
    /// Step index and message of a failed step.
    pub failure: Option<(usize, String)>,
}

impl RunOutcome {
    pub fn final_record(&self) -> &EnergyRecord {
        self.records.last().expect("initial record is always present")
    }

    /// `E^{n+1} <= E^n (1 + rel_tol)` for every recorded step.
    pub fn energy_monotone(&self, rel_tol: f64) -> bool {
        let e0 = self.records[0].energy.abs();
        self.records
            .windows(2)
            .all(|w| w[1].energy <= w[0].energy + rel_tol * e0)
    }

    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

struct Timed {
    records: Vec<EnergyRecord>,
    rho: DVector<f64>,
    seconds: f64,
    steps_done: usize,
    failure: Option<(usize, String)>,
}

fn time_run(sc: &Scenario, m: &RunManifest, dt: f64, steps: usize) -> Result<Timed> {
    let lowrank = sc
        .lowrank_config(m.scheme, m.rank, m.tau, m.ap)
        .map(|c| match m.max_rank {
            Some(r) => c.with_max_rank(r),
            None if m.unweighted && c.max_rank != usize::MAX => {
                c.with_max_rank(crate::lowrank::rank_cap_for(&sc.ps, false))
            }
            None => c,
        });
    let mut st = sc.stepper(m.scheme, dt, m.theta(), lowrank, !m.unweighted, m.seed)?;
    let mut records = Vec::with_capacity(steps + 1);
    records.push(st.record());
    let mut failure = None;
    let start = Instant::now();
    let mut done = 0;
    for _ in 0..steps {
        match st.step() {
            Ok(_) => {
                records.push(st.record());
                done += 1;
            }
            Err(e) => {
                failure = Some((st.steps_taken() + 1, e.to_string()));
                break;
            }
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    Ok(Timed {
        records,
        rho: st.rho().clone(),
        seconds,
        steps_done: done,
        failure,
    })
}

/// Runs a manifest in memory. Configuration errors are returned; a failed
/// step is recorded in the outcome.
pub fn execute(m: &RunManifest) -> Result<RunOutcome> {
    m.validate()?;
    let sc = Scenario::build(&m.scenario, m.scenario_options())?;
    let (full_steps, dt) = sc.step_count(sc.dt_for(m.scheme) * m.dt_mult);
    let steps = m.max_steps.map_or(full_steps, |cap| full_steps.min(cap));
    let timed = time_run(&sc, m, dt, steps)?;
    let mean = if timed.steps_done > 0 {
        timed.seconds / timed.steps_done as f64
    } else {
        0.0
    };
    let bench_mean_step_seconds = if m.bench && timed.failure.is_none() && steps > 0 {
        let mut total = timed.seconds;
        for _ in 1..5 {
            total += time_run(&sc, m, dt, steps)?.seconds;
        }
        Some(total / (5 * steps) as f64)
    } else {
        None
    };
    let want_reference = match (m.reference, sc.reference) {
        (Some(flag), _) => flag,
        (None, Reference::SelfRefined { .. }) => false,
        (None, _) => true,
    };
    let reached_end = timed.failure.is_none() && timed.steps_done == full_steps;
    let (l2_error, relative_l2_error) = if want_reference && reached_end {
        match sc.reference_density()? {
            Some(r) => (
                Some(diagnostics::l2_error(sc.grid(), &timed.rho, &r)?),
                Some(diagnostics::relative_l2(&timed.rho, &r)?),
            ),
            None => (None, None),
        }
    } else {
        (None, None)
    };
    let slices = sc
        .slices
        .iter()
        .map(|s| (s.name.clone(), extract_slice(sc.grid(), &timed.rho, s)))
        .collect();
    Ok(RunOutcome {
        manifest: m.clone(),
        grid: sc.ps.grid.clone(),
        dt,
        planned_steps: steps,
        records: timed.records,
        rho: timed.rho,
        slices,
        total_seconds: timed.seconds,
        mean_step_seconds: mean,
        bench_mean_step_seconds,
        l2_error,
        relative_l2_error,
        failure: timed.failure,
    })
}

/// Runs a manifest and writes its artifacts when `out` is set.
pub fn run(m: &RunManifest) -> Result<RunOutcome> {
    let outcome = execute(m)?;
    if let Some(dir) = &m.out {
        write_artifacts(&outcome, dir)?;
    }
    Ok(outcome)
}

fn g17(v: f64) -> String {
    format!("{v:.16e}")
}

pub const TRACE_HEADER: &str = "step,time,dt,energy,rho_norm,micro_norm_w,rank,zero_density_residual,mass";

/// The energy trace as CSV.
pub fn trace_csv(records: &[EnergyRecord]) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.step,
            g17(r.time),
            g17(r.dt),
            g17(r.energy),
            g17(r.rho_norm),
            g17(r.micro_norm_w),
            r.rank,
            g17(r.zero_density_residual),
            g17(r.mass)
        );
    }
    s
}

/// Density rows `x[,y],rho` over the density lattice.
pub fn density_csv(grid: &StaggeredGrid, rho: &DVector<f64>) -> String {
    let mut s = String::from(if grid.dim() == 2 { "x,y,rho\n" } else { "x,rho\n" });
    for (k, p) in grid.positions(Lattice::Rho).iter().enumerate() {
        if grid.dim() == 2 {
            let _ = writeln!(s, "{},{},{}", g17(p[0]), g17(p[1]), g17(rho[k]));
        } else {
            let _ = writeln!(s, "{},{}", g17(p[0]), g17(rho[k]));
        }
    }
    s
}

/// Plain-text `key = value` summary.
pub fn summary_text(o: &RunOutcome) -> String {
    let last = o.final_record();
    let mut s = String::new();
    let _ = writeln!(s, "scenario = {}", o.manifest.scenario);
    let _ = writeln!(s, "scheme = {}", o.manifest.scheme);
    let _ = writeln!(s, "status = {}", if o.succeeded() { "ok" } else { "failed" });
    if let Some((step, msg)) = &o.failure {
        let _ = writeln!(s, "failed_step = {step}");
        let _ = writeln!(s, "failure = {msg}");
    }
    let _ = writeln!(s, "dt = {}", g17(o.dt));
    let _ = writeln!(s, "theta = {}", o.manifest.theta());
    let _ = writeln!(s, "steps = {}", o.records.len() - 1);
    let _ = writeln!(s, "planned_steps = {}", o.planned_steps);
    let _ = writeln!(s, "final_time = {}", g17(last.time));
    let _ = writeln!(s, "total_wall_seconds = {}", g17(o.total_seconds));
    let _ = writeln!(s, "mean_step_seconds = {}", g17(o.mean_step_seconds));
    if let Some(b) = o.bench_mean_step_seconds {
        let _ = writeln!(s, "bench_runs = 5");
        let _ = writeln!(s, "bench_mean_step_seconds = {}", g17(b));
    }
    let _ = writeln!(s, "final_energy = {}", g17(last.energy));
    let _ = writeln!(s, "final_rank = {}", last.rank);
    let _ = writeln!(s, "energy_monotone = {}", o.energy_monotone(1e-12));
    let _ = writeln!(
        s,
        "max_zero_density_residual = {}",
        g17(o.records.iter().map(|r| r.zero_density_residual).fold(0.0, f64::max))
    );
    if let Some(e) = o.l2_error {
        let _ = writeln!(s, "l2_error = {}", g17(e));
    }
    if let Some(e) = o.relative_l2_error {
        let _ = writeln!(s, "relative_l2_error = {}", g17(e));
    }
    s
}

/// Writes `trace.csv`, `rho_final.csv`, one `slice_<name>.csv` per slice,
/// `summary.txt` and `manifest.txt` into `dir`.
pub fn write_artifacts(o: &RunOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("trace.csv"), trace_csv(&o.records))?;
    fs::write(dir.join("rho_final.csv"), density_csv(&o.grid, &o.rho))?;
    for (name, pts) in &o.slices {
        let mut s = String::from("s,rho\n");
        for (c, v) in pts {
            let _ = writeln!(s, "{},{}", g17(*c), g17(*v));
        }
        fs::write(dir.join(format!("slice_{name}.csv")), s)?;
    }
    fs::write(dir.join("summary.txt"), summary_text(o))?;
    fs::write(dir.join("manifest.txt"), o.manifest.to_text())?;
    Ok(())
}

/// One swept parameter and its values.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
}

impl SweepAxis {
    /// Parses `key=v1,v2,...`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (k, vs) = spec
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("sweep axis `{spec}` is not key=v1,v2")))?;
        let values: Vec<String> = vs.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(Error::InvalidConfig(format!("sweep axis `{spec}` has no values")));
        }
        Ok(SweepAxis {
            key: k.trim().to_string(),
            values,
        })
    }
}

/// One member of a sweep.
#[derive(Clone, Debug)]
pub struct SweepMember {
    pub label: String,
    pub overrides: Vec<(String, String)>,
    pub outcome: std::result::Result<RunOutcome, String>,
}

/// All combinations of the axes' values, in row-major order.
pub fn cartesian(axes: &[SweepAxis]) -> Vec<Vec<(String, String)>> {
    let mut out: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push((axis.key.clone(), v.clone()));
                    p
                })
            })
            .collect();
    }
    out
}

fn label_of(overrides: &[(String, String)]) -> String {
    if overrides.is_empty() {
        return "run".into();
    }
    overrides
        .iter()
        .map(|(k, v)| format!("{k}-{v}"))
        .collect::<Vec<_>>()
        .join("_")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
        .collect()
}

/// Runs the cartesian product of `axes` over `template` sequentially.
/// Member failures are recorded and the sweep continues. With `out` set,
/// each member writes into its own subdirectory and `sweep.csv` collects
/// one row per member.
pub fn sweep(template: &RunManifest, axes: &[SweepAxis]) -> Result<Vec<SweepMember>> {
    let mut members = Vec::new();
    for overrides in cartesian(axes) {
        let label = label_of(&overrides);
        let mut m = template.clone();
        let mut setup = Ok(());
        for (k, v) in &overrides {
            if let Err(e) = m.set(k, v) {
                setup = Err(e.to_string());
                break;
            }
        }
        m.out = template.out.as_ref().map(|o| o.join(&label));
        let outcome = match setup {
            Ok(()) => run(&m).map_err(|e| e.to_string()),
            Err(e) => Err(e),
        };
        members.push(SweepMember {
            label,
            overrides,
            outcome,
        });
    }
    if let Some(dir) = &template.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("sweep.csv"), sweep_csv(axes, &members))?;
    }
    Ok(members)
}

/// Combined sweep table.
pub fn sweep_csv(axes: &[SweepAxis], members: &[SweepMember]) -> String {
    let mut s = String::from("label");
    for a in axes {
        s.push(',');
        s.push_str(&a.key);
    }
    s.push_str(",status,steps,dt,final_energy,final_rank,l2_error,mean_step_seconds,total_seconds\n");
    for m in members {
        s.push_str(&m.label);
        for (_, v) in &m.overrides {
            s.push(',');
            s.push_str(v);
        }
        match &m.outcome {
            Ok(o) => {
                let last = o.final_record();
                let _ = writeln!(
                    s,
                    ",{},{},{},{},{},{},{},{}",
                    if o.succeeded() { "ok" } else { "failed" },
                    o.records.len() - 1,
                    g17(o.dt),
                    g17(last.energy),
                    last.rank,
                    o.l2_error.map(g17).unwrap_or_default(),
                    g17(o.mean_step_seconds),
                    g17(o.total_seconds)
                );
            }
            Err(_) => {
                let _ = writeln!(s, ",error,,,,,,,");
            }
        }
    }
    s
}

/// Least-squares slope of `log(err)` against `log(n)`.
pub fn fitted_slope(ns: &[f64], errs: &[f64]) -> f64 {
    let k = ns.len() as f64;
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip() {
        let mut m = RunManifest::new("gaussian1d-diff", Scheme::ImexSBug);
        m.rank = Some(3);
        m.tau = Some(1e-6);
        m.mesh_div = 4;
        m.unweighted = true;
        m.epsilon = Some(1e-3);
        m.out = Some(PathBuf::from("/tmp/x"));
        let back = RunManifest::parse(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn manifest_errors() {
        assert!(RunManifest::parse("scheme = IMEX").is_err());
        assert!(RunManifest::parse("scenario = a\nbogus = 1").is_err());
        assert!(RunManifest::parse("scenario = a\nrank = x").is_err());
        match RunManifest::parse("scenario = a\n\nnot a pair") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let m = RunManifest::parse("# comment\nscenario = bimodal1d  # trailing\ndt-mult = 0.5").unwrap();
        assert_eq!(m.dt_mult, 0.5);
        let mut bad = RunManifest::new("bimodal1d", Scheme::Imex);
        bad.unweighted = true;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn cartesian_product() {
        assert_eq!(cartesian(&[]), vec![Vec::<(String, String)>::new()]);
        let axes = [
            SweepAxis::parse("mesh_div=2,4").unwrap(),
            SweepAxis::parse("scheme=IMEX,IMEX-S,IMEX-BUG").unwrap(),
        ];
        let c = cartesian(&axes);
        assert_eq!(c.len(), 6);
        assert_eq!(label_of(&c[0]), "mesh_div-2_scheme-IMEX");
        assert!(SweepAxis::parse("rank").is_err());
        assert!(SweepAxis::parse("rank=").is_err());
    }

    #[test]
    fn slope_fit() {
        let ns = [16.0, 32.0, 64.0];
        let errs: Vec<f64> = ns.iter().map(|n: &f64| 3.0 * n.powf(-2.0)).collect();
        assert!((fitted_slope(&ns, &errs) + 2.0).abs() < 1e-12);
    }

    #[test]
    fn short_run_has_expected_rows() {
        let mut m = RunManifest::new("bimodal1d", Scheme::ImexBug);
        m.mesh_div = 2;
        let o = execute(&m).unwrap();
        assert!(o.succeeded());
        assert_eq!(o.records.len(), o.planned_steps + 1);
        assert!((o.final_record().time - 2.5).abs() < 1e-12);
        let csv = trace_csv(&o.records);
        assert_eq!(csv.lines().count(), o.planned_steps + 2);
        assert!(csv.starts_with(TRACE_HEADER));
    }
}
