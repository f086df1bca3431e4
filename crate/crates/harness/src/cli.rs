//! Command-line entry points.
//!
//! Exit codes: 0 on success, 1 on runtime errors, 2 on usage errors.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use mrpe_core::envs::EnvSpec;
use mrpe_core::mdp::validate_mdp;
use mrpe_core::nonconvex::nonconvexity_curve;

use crate::config::ExperimentConfig;
use crate::experiment::run_experiment;
use crate::output::{format_float, write_csv};
use crate::pac::stopping_check;
use crate::stats::{bootstrap_ci, median, seed_errors};
use crate::sweep::complexity_sweep;

#[derive(Debug, Parser)]
#[command(name = "mrpe", about = "Multi-reward multi-policy evaluation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every (seed, agent) pair of a config and write the error CSV.
    Run { config: PathBuf },
    /// Print U* and the optimal allocation across environment sizes.
    Complexity { config: PathBuf },
    /// Emit the value gap of the two-state example as CSV `p2,gap`.
    DemoNonconvexity {
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check that an environment is a valid communicating MDP.
    Validate {
        #[arg(required = true, num_args = 1..)]
        env: Vec<String>,
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
    },
    /// Monte-Carlo check of the MR-NaS stopping rule.
    StoppingCheck { config: PathBuf },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Parses `argv` (program name first) and runs the command.
pub fn cli_main<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let sink: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(Failure::Usage(message)) => {
            let _ = writeln!(err, "error: {message}");
            2
        }
        Err(Failure::Runtime(message)) => {
            let _ = writeln!(err, "error: {message}");
            1
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<(), Failure> {
    match command {
        Command::Run { config } => run(&config, out),
        Command::Complexity { config } => complexity(&config, out),
        Command::DemoNonconvexity { output } => demo(output.as_deref(), out),
        Command::Validate { env, gamma } => validate(&env.join(" "), gamma, out),
        Command::StoppingCheck { config } => stopping(&config, out),
    }
}

fn run(path: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(path).map_err(runtime)?;
    let records = run_experiment(&cfg).map_err(runtime)?;
    let csv_path = cfg.output.join("errors.csv");
    write_csv(&records, &csv_path).map_err(runtime)?;
    writeln!(out, "wrote {} records to {}", records.len(), csv_path.display()).map_err(runtime)?;
    let mut rng = crate::experiment::seed_rng(0, 0);
    let per_seed = seed_errors(&records);
    for spec in &cfg.agents {
        let key = (spec.name().to_string(), cfg.horizon - cfg.horizon % cfg.eval_period);
        if let Some(errors) = per_seed.get(&key) {
            let (lo, mean, hi) = bootstrap_ci(errors, 0.95, 1000, &mut rng).map_err(runtime)?;
            let med = median(errors).unwrap_or(f64::NAN);
            writeln!(
                out,
                "{}: final median {med:.4e}, mean {mean:.4e} [{lo:.4e}, {hi:.4e}]",
                spec.name()
            )
            .map_err(runtime)?;
        }
    }
    Ok(())
}

fn complexity(path: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(path).map_err(runtime)?;
    let points = complexity_sweep(&cfg).map_err(runtime)?;
    let csv_path = cfg.output.join("complexity.csv");
    if let Some(dir) = csv_path.parent() {
        std::fs::create_dir_all(dir).map_err(runtime)?;
    }
    let mut table = csv::Writer::from_path(&csv_path).map_err(runtime)?;
    table.write_record(["param", "u_star", "set_label"]).map_err(runtime)?;
    for p in &points {
        table
            .write_record([p.param.to_string(), format_float(p.u_star), p.set_label.clone()])
            .map_err(runtime)?;
        let omega: Vec<String> = p.omega.values().iter().map(|x| format!("{x:.4}")).collect();
        writeln!(
            out,
            "n={} U*={} omega=[{}]",
            p.param,
            format_float(p.u_star),
            omega.join(" ")
        )
        .map_err(runtime)?;
    }
    table.flush().map_err(runtime)?;
    writeln!(out, "wrote {}", csv_path.display()).map_err(runtime)
}

/// The demo grid: `p2 = i/200` for `i = 60..=140`, which contains 0.5 exactly.
pub fn demo_grid() -> Vec<f64> {
    (60..=140).map(|i| i as f64 / 200.0).collect()
}

fn demo(output: Option<&Path>, out: &mut dyn Write) -> Result<(), Failure> {
    let curve = nonconvexity_curve(&demo_grid()).map_err(runtime)?;
    let mut buffer = Vec::new();
    {
        let mut table = csv::Writer::from_writer(&mut buffer);
        table.write_record(["p2", "gap"]).map_err(runtime)?;
        for (p2, gap) in curve {
            table
                .write_record([format_float(p2), format_float(gap)])
                .map_err(runtime)?;
        }
        table.flush().map_err(runtime)?;
    }
    match output {
        Some(path) => std::fs::write(path, buffer).map_err(runtime),
        None => out.write_all(&buffer).map_err(runtime),
    }
}

fn validate(env: &str, gamma: f64, out: &mut dyn Write) -> Result<(), Failure> {
    let spec: EnvSpec = env.parse().map_err(|e| Failure::Usage(format!("{e}")))?;
    let m = spec.build(gamma).map_err(runtime)?;
    let report = validate_mdp(&m).map_err(runtime)?;
    if !report.communicating {
        return Err(Failure::Runtime(format!("{spec} is not communicating")));
    }
    writeln!(
        out,
        "ok: {spec} with {} states and {} actions, communicating, {}",
        m.n_states(),
        m.n_actions(),
        if report.aperiodic { "aperiodic" } else { "periodic" }
    )
    .map_err(runtime)
}

fn stopping(path: &Path, out: &mut dyn Write) -> Result<(), Failure> {
    let cfg = ExperimentConfig::load(path).map_err(runtime)?;
    let report = stopping_check(&cfg).map_err(runtime)?;
    let csv_path = cfg.output.join("stopping.csv");
    if let Some(dir) = csv_path.parent() {
        std::fs::create_dir_all(dir).map_err(runtime)?;
    }
    let mut table = csv::Writer::from_path(&csv_path).map_err(runtime)?;
    table
        .write_record(["seed", "stopped", "steps", "max_error"])
        .map_err(runtime)?;
    for r in &report.runs {
        table
            .write_record([
                r.seed.to_string(),
                r.stopped.to_string(),
                r.steps.to_string(),
                format_float(r.max_error),
            ])
            .map_err(runtime)?;
    }
    table.flush().map_err(runtime)?;
    writeln!(
        out,
        "runs {}, all stopped {}, longest {} steps, error rate {:.3} (delta {})",
        report.runs.len(),
        report.all_stopped(),
        report.max_steps(),
        report.failure_rate(),
        report.delta
    )
    .map_err(runtime)
}
