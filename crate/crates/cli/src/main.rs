//! `dooc` command-line driver: run, validate, oracle, reproduce-paper and sweep.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use dooc::graph::{is_strongly_connected, laplacian, left_eigenvector};
use dooc::regulator::eigenvalues;
use dooc::reproduce::reproduce;
use dooc::sim::output::write_run;
use dooc::{metrics, run, Error, Scenario};

const EXIT_VALIDATION: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;

#[derive(Parser)]
#[command(name = "dooc", version, about = "Distributed optimal output consensus simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario JSON; the built-in five-agent example when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Dotted-key override, e.g. `controller.K=10` or `agents.0.b=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Replaces the scenario's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the resolved scenario(s) and stop.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one scenario and write trajectory.csv and metadata.json.
    Run(Common),
    /// Check a scenario without integrating anything.
    Validate(Common),
    /// Print oracle quantities: s*, r, Sylvester residuals and internal-model spectra.
    Oracle(Common),
    /// Run the five-agent example and check every acceptance criterion.
    ReproducePaper(Common),
    /// Run the Cartesian product of `--vary` values, one output directory per run.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `key=v1,v2,..`. Repeatable.
        #[arg(long = "vary", value_name = "KEY=V1,V2,..", required = true)]
        vary: Vec<String>,
    },
}

/// Outcome that maps to a process exit code.
enum Failure {
    Validation(String),
    Divergence(String),
    Acceptance,
    Other(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite { .. } | Error::DegenerateCoordinator { .. } => Failure::Divergence(e.to_string()),
            Error::Io(_) => Failure::Other(e.into()),
            other => Failure::Validation(other.to_string()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

fn load(common: &Common) -> Result<Scenario, Failure> {
    let base = match &common.scenario {
        Some(p) => Scenario::load(p)?,
        None => Scenario::paper_example(),
    };
    let mut scn = base.with_overrides(&common.overrides)?;
    if let Some(seed) = common.seed {
        scn.seed = seed;
    }
    Ok(scn)
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<(), Failure> {
    println!("{}", serde_json::to_string_pretty(v).context("serializing")?);
    Ok(())
}

fn cmd_run(common: &Common) -> Result<(), Failure> {
    let scn = load(common)?;
    let (model, explicit) = scn.resolve()?;
    if common.dry_run {
        return print_json(&explicit);
    }
    let report = model.validate();
    if !report.passed() {
        return Err(Failure::Validation(report.to_string()));
    }
    let traj = run(&model)?;
    let m = metrics(&traj, model.s_star()?);
    let (csv, meta) = write_run(&common.out, &traj, &explicit.to_value(), explicit.seed, &m)?;
    log::info!("wrote {} and {}", csv.display(), meta.display());
    print_json(&m)
}

fn cmd_validate(common: &Common) -> Result<(), Failure> {
    let scn = load(common)?;
    let (model, _) = scn.resolve()?;
    let report = model.validate();
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Validation("scenario failed validation".into()))
    }
}

fn cmd_oracle(common: &Common) -> Result<(), Failure> {
    let scn = load(common)?;
    let graph = scn.build_graph()?;
    if !is_strongly_connected(&graph) {
        return Err(Failure::Validation("graph is not strongly connected".into()));
    }
    let r = left_eigenvector(&laplacian(&graph))?;
    let (model, _) = scn.resolve()?;
    let s_star = model.s_star()?;
    let agents: Vec<serde_json::Value> = model
        .agents
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let phi: Vec<[f64; 2]> = eigenvalues(&a.regulator.phi).iter().map(|c| [c.re, c.im]).collect();
            serde_json::json!({
                "agent": i + 1,
                "sylvester_residual": a.regulator.sylvester.residual,
                "t_condition_number": a.regulator.sylvester.condition_number,
                "t_min_singular_value": a.regulator.sylvester.min_singular_value,
                "phi_spectrum": phi,
            })
        })
        .collect();
    print_json(&serde_json::json!({
        "s_star": s_star,
        "left_eigenvector": r.as_slice(),
        "agents": agents,
    }))
}

fn cmd_reproduce(common: &Common) -> Result<(), Failure> {
    let scn = load(common)?;
    if common.dry_run {
        let (_, closed) = scn.resolve()?;
        let (_, coord) = scn.coordinator_only().resolve()?;
        return print_json(&serde_json::json!({ "closed_loop": closed, "coordinator_only": coord }));
    }
    let report = reproduce(&scn)?;
    print!("{}", report.table());
    for (name, art) in [("closed_loop", &report.closed_loop), ("coordinator_only", &report.coordinator)] {
        if let Some(a) = art {
            let seed = a.scenario.get("seed").and_then(|s| s.as_u64()).unwrap_or(0);
            write_run(&common.out.join(name), &a.trajectory, &a.scenario, seed, &a.metrics)?;
        }
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Acceptance)
    }
}

fn sweep_points(vary: &[String]) -> anyhow::Result<Vec<Vec<String>>> {
    let mut points = vec![Vec::new()];
    for v in vary {
        let (key, values) = v.split_once('=').with_context(|| format!("`{v}` is not key=v1,v2,.."))?;
        let mut next = Vec::new();
        for p in &points {
            for value in values.split(',') {
                let mut q: Vec<String> = p.clone();
                q.push(format!("{key}={value}"));
                next.push(q);
            }
        }
        points = next;
    }
    Ok(points)
}

fn dir_name(index: usize, point: &[String]) -> String {
    let label: String = point
        .join("_")
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '=' || c == '-' { c } else { '_' })
        .collect();
    format!("{index:03}_{label}")
}

fn cmd_sweep(common: &Common, vary: &[String]) -> Result<(), Failure> {
    let base = load(common)?;
    let points = sweep_points(vary)?;
    let mut models = Vec::new();
    let mut explicit = Vec::new();
    for p in &points {
        let (m, e) = base.with_overrides(p)?.resolve()?;
        let report = m.validate();
        if !report.passed() {
            return Err(Failure::Validation(format!("{}:\n{report}", p.join(" "))));
        }
        models.push(m);
        explicit.push(e);
    }
    if common.dry_run {
        return print_json(&explicit);
    }
    let results = dooc::batch::run_batch(&models);
    let mut diverged = Vec::new();
    let mut summary = Vec::new();
    for (k, ((res, model), e)) in results.into_iter().zip(&models).zip(&explicit).enumerate() {
        let dir = common.out.join(dir_name(k, &points[k]));
        match res {
            Ok(traj) => {
                let m = metrics(&traj, model.s_star()?);
                write_run(&dir, &traj, &e.to_value(), e.seed, &m)?;
                summary.push(serde_json::json!({
                    "overrides": points[k],
                    "dir": dir,
                    "final_error": m.final_error,
                    "final_tracking_error": m.final_tracking_error,
                }));
            }
            Err(err) => {
                diverged.push(format!("{}: {err}", points[k].join(" ")));
                summary.push(serde_json::json!({ "overrides": points[k], "error": err.to_string() }));
            }
        }
    }
    print_json(&summary)?;
    if diverged.is_empty() {
        Ok(())
    } else {
        Err(Failure::Divergence(diverged.join("\n")))
    }
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(c) => ensure_parent(&c.out).map_err(Failure::from).and_then(|_| cmd_run(c)),
        Command::Validate(c) => cmd_validate(c),
        Command::Oracle(c) => cmd_oracle(c),
        Command::ReproducePaper(c) => cmd_reproduce(c),
        Command::Sweep { common, vary } => cmd_sweep(common, vary),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("validation failed:\n{msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Divergence(msg)) => {
            eprintln!("run diverged: {msg}");
            ExitCode::from(EXIT_DIVERGENCE)
        }
        Err(Failure::Acceptance) => {
            eprintln!("acceptance criteria failed");
            ExitCode::from(EXIT_ACCEPTANCE)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
