//! `reorient`: solve minimum-time reorientation maneuvers from the command
//! line.
//!
//! Exit codes: 0 success, 1 configuration or output error, 2 solver
//! failure, 3 verification failure.

mod config;
mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use reorient::builtin_maneuver;
use reorient::dynamics::BUILTIN_MANEUVERS;
use reorient::oracle::verify;
use reorient::structure::bbsoc_solve;

use config::RunConfig;
use output::ManeuverEntry;

const EXIT_CONFIG: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_VERIFY: u8 = 3;

#[derive(Parser)]
#[command(name = "reorient", version, about = "Minimum-time spacecraft reorientation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one or more maneuvers and write trajectories and reports.
    Run(Box<RunArgs>),
    /// List the built-in maneuvers.
    List(ListArgs),
}

#[derive(Args)]
struct ListArgs {
    /// Emit JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Built-in maneuver, comma-separated list, or `all`.
    #[arg(long)]
    maneuver: Option<String>,
    /// TOML config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the maneuver's actuator set.
    #[arg(long, value_parser = ["two", "three"])]
    torque_mode: Option<String>,
    /// Upper torque bound for every control.
    #[arg(long, allow_negative_numbers = true)]
    umax: Option<f64>,
    /// Lower torque bound for every control.
    #[arg(long, allow_negative_numbers = true)]
    umin: Option<f64>,
    /// Intervals in the initial mesh.
    #[arg(long)]
    mesh_intervals: Option<usize>,
    /// Collocation points per initial interval (3 to 12).
    #[arg(long)]
    mesh_points: Option<usize>,
    /// Mesh error tolerance.
    #[arg(long, allow_negative_numbers = true)]
    eps_mesh: Option<f64>,
    /// NLP optimality tolerance.
    #[arg(long, allow_negative_numbers = true)]
    eps_nlp: Option<f64>,
    /// Check the result by re-integration and indirect shooting.
    #[arg(long)]
    verify: bool,
    /// Output directory; one subdirectory per maneuver when several run.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maneuvers solved concurrently.
    #[arg(long)]
    jobs: Option<usize>,
    /// Uniform samples in trajectory.csv, before switch times are added.
    #[arg(long)]
    samples: Option<usize>,
    /// List the built-in maneuvers and exit.
    #[arg(long)]
    list: bool,
    /// With --list, emit JSON.
    #[arg(long)]
    json: bool,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.maneuver {
            c.maneuver = v.clone();
        }
        if let Some(v) = &self.torque_mode {
            c.torque_mode = Some(v.clone());
        }
        c.u_max = self.umax.or(c.u_max);
        c.u_min = self.umin.or(c.u_min);
        c.mesh_intervals = self.mesh_intervals.unwrap_or(c.mesh_intervals);
        c.mesh_points = self.mesh_points.unwrap_or(c.mesh_points);
        c.eps_mesh = self.eps_mesh.unwrap_or(c.eps_mesh);
        c.eps_nlp = self.eps_nlp.unwrap_or(c.eps_nlp);
        c.verify |= self.verify;
        c.out = self.out.clone().unwrap_or(c.out);
        c.jobs = self.jobs.unwrap_or(c.jobs);
        c.samples = self.samples.unwrap_or(c.samples);
        c.validate()?;
        Ok(c)
    }
}

/// Prints a line, ignoring a closed stdout.
fn say(line: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn list(json: bool) -> ExitCode {
    let entries: Vec<ManeuverEntry> =
        BUILTIN_MANEUVERS.iter().map(|n| ManeuverEntry::new(&builtin_maneuver(n).expect("built-in maneuver"))).collect();
    if json {
        say(&serde_json::to_string_pretty(&entries).expect("listing serializes"));
    } else {
        for e in &entries {
            say(&e.text());
        }
    }
    ExitCode::SUCCESS
}

struct Outcome {
    code: u8,
    summary: String,
}

fn run_one(config: &RunConfig, dir: &Path) -> Outcome {
    match solve_and_write(config, dir) {
        Ok(o) => o,
        Err(e) => Outcome { code: EXIT_CONFIG, summary: format!("{}: error: {e:#}", config.maneuver) },
    }
}

fn solve_and_write(config: &RunConfig, dir: &Path) -> Result<Outcome> {
    let maneuver = config.build_maneuver()?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("config.toml"), config.to_toml()).context("writing config echo")?;
    let (trajectory, report, verification, error, mut code) = match bbsoc_solve(&maneuver, &config.solver_options()) {
        Ok(sol) => {
            let v = if config.verify { Some(verify(&maneuver, &sol, &config.verification_options())) } else { None };
            let (v, err, code) = match v {
                None => (None, None, 0),
                Some(Ok(v)) => {
                    let code = if v.passed() { 0 } else { EXIT_VERIFY };
                    (Some(v), None, code)
                }
                Some(Err(e)) => (None, Some(format!("verification: {e}")), EXIT_VERIFY),
            };
            (Some(sol.trajectory), sol.report, v, err, code)
        }
        Err(f) => (f.partial.clone(), f.report.clone(), None, Some(f.to_string()), EXIT_SOLVER),
    };
    if let Some(tr) = &trajectory {
        output::write_trajectory(tr, &maneuver.model, &dir.join("trajectory.csv"))?;
        output::write_plots(tr, &dir.join("plot"))?;
    }
    let text = output::report_text(&maneuver, &report, verification.as_ref(), error.as_deref());
    std::fs::write(dir.join("report.txt"), &text).context("writing report")?;
    output::write_report_json(&dir.join("report.json"), config, &maneuver, &report, verification.as_ref(), error.as_deref())?;
    if trajectory.is_none() && code == 0 {
        code = EXIT_SOLVER;
    }
    let status = match code {
        0 => "ok".to_string(),
        EXIT_VERIFY => "verification failed".to_string(),
        _ => format!("solver failed: {}", error.unwrap_or_default()),
    };
    let summary = format!(
        "{}: t_f = {:.6}  switches = [{}]  {}  ({})",
        maneuver.name,
        report.t_final,
        report.switch_times.iter().map(|t| format!("{t:.4}")).collect::<Vec<_>>().join(", "),
        status,
        dir.display()
    );
    Ok(Outcome { code, summary })
}

fn run(args: &RunArgs) -> ExitCode {
    if args.list {
        return list(args.json);
    }
    let config = match args.config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let names = config.maneuver_names().expect("validated");
    let jobs: Vec<(RunConfig, PathBuf)> = names
        .iter()
        .map(|n| {
            let dir = if names.len() == 1 { config.out.clone() } else { config.out.join(n) };
            // the echo of each run re-creates exactly that run
            let single = RunConfig { out: dir.clone(), jobs: 1, ..config.single(n) };
            (single, dir)
        })
        .collect();
    let results: Mutex<Vec<Option<Outcome>>> = Mutex::new(jobs.iter().map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..config.jobs.min(jobs.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((c, dir)) = jobs.get(i) else { break };
                let o = run_one(c, dir);
                results.lock().expect("results lock")[i] = Some(o);
            });
        }
    });
    let outcomes: Vec<Outcome> = results.into_inner().expect("results lock").into_iter().map(|o| o.expect("every job ran")).collect();
    for o in &outcomes {
        say(&o.summary);
    }
    // solver and configuration failures outrank verification failures
    let codes: Vec<u8> = outcomes.iter().map(|o| o.code).collect();
    let code = [EXIT_SOLVER, EXIT_CONFIG, EXIT_VERIFY].into_iter().find(|c| codes.contains(c)).unwrap_or(0);
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match &cli.command {
        Command::Run(args) => run(args),
        Command::List(args) => list(args.json),
    }
}
