//! `gmech`: batch front end for graded-mechanics.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 numerical
//! failure (partial outputs are still written), 3 a structure check failed.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use graded_mechanics::config::{ColumnGroup, ConfigError, System};
use graded_mechanics::csvio::{write_trajectory, SampledCurve, Table};
use graded_mechanics::graded::Convention;
use graded_mechanics::run;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    /// Almost-Lie, Jacobi and weight-equivariance checks.
    Check,
    /// Integrate the system and write the trajectory CSV.
    Simulate,
    /// Euler–Lagrange residual along a sampled curve CSV.
    Residual,
    /// Jacobi–Ostrogradski momenta along a sampled curve CSV.
    Momenta,
    /// Legendre map and Hamiltonian samples with the consistency check.
    Legendre,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Simulate => "simulate",
            Command::Residual => "residual",
            Command::Momenta => "momenta",
            Command::Legendre => "legendre",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "gmech", version, about = "Higher-order mechanics on weighted Lie algebroids")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// System description (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Seed for sampled checks and Legendre samples.
    #[arg(long)]
    seed: Option<u64>,
    /// Work in this convention instead of the file's; the system is
    /// converted, not reinterpreted.
    #[arg(long)]
    convention: Option<Convention>,
    /// Tolerance for structure and consistency checks.
    #[arg(long)]
    tol: Option<f64>,
    /// Sampled curve for `residual` and `momenta`; defaults to the
    /// trajectory file in the output directory.
    #[arg(long)]
    curve: Option<PathBuf>,
}

enum Failure {
    Config(ConfigError),
    Io(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

struct Context<'a> {
    cli: &'a Cli,
    sys: System,
}

impl Context<'_> {
    fn seed(&self) -> u64 {
        self.cli.seed.unwrap_or(self.sys.config.sampling.seed)
    }

    fn tol(&self) -> f64 {
        self.cli.tol.unwrap_or(self.sys.config.sampling.tol)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cli.out.join(name)
    }

    fn write_table(&self, name: &str, table: &Table) -> Result<(), Failure> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| io_failure(&path, e))?;
        table.write(BufWriter::new(file)).map_err(|e| io_failure(&path, e))
    }

    fn write_report(&self, report: Value) -> Result<(), Failure> {
        let path = self.path(&self.sys.config.output.report);
        let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        std::fs::write(&path, text).map_err(|e| io_failure(&path, e))
    }

    fn header(&self, status: &str, error: Option<String>) -> Value {
        json!({
            "command": self.cli.command.name(),
            "system": self.sys.config.name,
            "order": self.sys.order,
            "convention": self.sys.convention.name(),
            "status": status,
            "error": error,
        })
    }

    fn curve(&self) -> Result<SampledCurve, Failure> {
        let path = self
            .cli
            .curve
            .clone()
            .unwrap_or_else(|| self.path(&self.sys.config.output.trajectory));
        let file = File::open(&path).map_err(|e| io_failure(&path, e))?;
        let table = Table::read(file).map_err(|e| io_failure(&path, e))?;
        let spec = self.sys.dynamics()?;
        SampledCurve::from_table(&table, spec.n_base(), spec.m_fiber()).map_err(|e| io_failure(&path, e))
    }
}

/// Runs a command and returns its exit code.
fn execute(cli: &Cli) -> Result<u8, Failure> {
    let sys = System::load(&cli.config, cli.convention)?;
    std::fs::create_dir_all(&cli.out).map_err(|e| io_failure(&cli.out, e))?;
    let ctx = Context { cli, sys };
    match cli.command {
        Command::Check => check(&ctx),
        Command::Simulate => simulate(&ctx),
        Command::Residual => {
            let out = run::residual(&ctx.sys, &ctx.curve()?)?;
            let name = ctx.sys.config.output.residual.clone();
            ctx.write_table(&name, &out.value)?;
            let max = column_max(&out.value, "el_residual");
            println!("residual: {} nodes, max el_residual {}", out.value.rows.len(), fmt_opt(max));
            finish(&ctx, out.error, json!({ "nodes": out.value.rows.len(), "max_el_residual": max, "file": name }))
        }
        Command::Momenta => {
            let out = run::momenta(&ctx.sys, &ctx.curve()?)?;
            let name = ctx.sys.config.output.momenta.clone();
            ctx.write_table(&name, &out.value)?;
            println!("momenta: {} nodes", out.value.rows.len());
            finish(&ctx, out.error, json!({ "nodes": out.value.rows.len(), "file": name }))
        }
        Command::Legendre => {
            let count = ctx.sys.config.sampling.count;
            let out = run::legendre_samples(&ctx.sys, count, ctx.seed(), ctx.tol())?;
            let (table, summary) = &out.value;
            let name = ctx.sys.config.output.legendre.clone();
            ctx.write_table(&name, table)?;
            println!("legendre: {} samples, max round-trip error {:e}", summary.samples, summary.max_roundtrip_error);
            let mut failed_check = false;
            if let Some(c) = &summary.consistency {
                println!(
                    "consistency: max difference {:e} (tol {:e}) {}",
                    c.max_difference,
                    c.tol,
                    if c.pass { "pass" } else { "FAIL" }
                );
                if let Some(f) = &c.failure {
                    println!("consistency: {f}");
                }
                failed_check = !c.pass && c.failure.is_none();
            }
            let code = finish(&ctx, out.error, json!({ "summary": summary, "file": name }))?;
            Ok(if code == 0 && failed_check { 3 } else { code })
        }
    }
}

fn column_max(table: &Table, name: &str) -> Option<f64> {
    table.column(name).ok()?.into_iter().flatten().reduce(f64::max)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:e}"))
}

/// Writes the report and maps a numerical failure to exit code 2.
fn finish(ctx: &Context, error: Option<graded_mechanics::Error>, body: Value) -> Result<u8, Failure> {
    let (status, message) = match &error {
        None => ("ok", None),
        Some(e) => ("numerical_failure", Some(e.to_string())),
    };
    let mut report = ctx.header(status, message);
    if let (Value::Object(r), Value::Object(b)) = (&mut report, body) {
        r.extend(b);
    }
    ctx.write_report(report)?;
    match error {
        None => Ok(0),
        Some(e) => {
            eprintln!("numerical failure: {e}");
            Ok(2)
        }
    }
}

fn check(ctx: &Context) -> Result<u8, Failure> {
    let count = ctx.sys.config.sampling.count;
    match run::check(&ctx.sys, count, ctx.seed(), ctx.tol()) {
        Ok(summary) => {
            for c in &summary.checks {
                println!(
                    "{:<34} max residual {:e}  tol {:e}  {}",
                    c.name,
                    c.max_residual,
                    c.tol,
                    if c.pass { "pass" } else { "FAIL" }
                );
            }
            let pass = summary.pass;
            finish(ctx, None, json!({ "checks": summary.checks, "pass": pass }))?;
            Ok(if pass { 0 } else { 3 })
        }
        Err(e) => finish(ctx, Some(e), json!({})),
    }
}

fn simulate(ctx: &Context) -> Result<u8, Failure> {
    let out = run::simulate(&ctx.sys)?;
    let sim = &out.value;
    let traj = &sim.trajectory;
    let groups = ctx.sys.config.output.columns.clone().unwrap_or_else(|| ColumnGroup::ALL.to_vec());
    let name = ctx.sys.config.output.trajectory.clone();
    let path = ctx.path(&name);
    let file = File::create(&path).map_err(|e| io_failure(&path, e))?;
    write_trajectory(BufWriter::new(file), traj, &sim.monitors, &groups).map_err(|e| io_failure(&path, e))?;
    let t_end = traj.times.last().copied().unwrap_or(0.0);
    println!("simulate: {} nodes to t = {t_end}", traj.len());
    println!("energy drift {:e}", traj.energy_drift());
    println!("max el_residual {}", fmt_opt(traj.max_el_residual()));
    let monitors: Vec<Value> = sim
        .monitors
        .iter()
        .map(|q| {
            println!("{} drift {:e}", q.name, q.drift);
            json!({ "name": q.name, "drift": q.drift, "final": q.values.last() })
        })
        .collect();
    finish(
        ctx,
        out.error,
        json!({
            "nodes": traj.len(),
            "t_final": t_end,
            "step": traj.step,
            "integrator": traj.integrator,
            "energy_drift": traj.energy_drift(),
            "max_el_residual": traj.max_el_residual(),
            "monitors": monitors,
            "file": name,
        }),
    )
}
