//! `nhmech` command-line front end: simulation runs, verification suites and listings.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nhmech::integrator::{integrate, Monitor, Trajectory};
use nhmech::numerics::{FdConfig, FdScheme};
use nhmech::systems::{self, SystemDescriptor, SYSTEM_NAMES};
use nhmech::verify::{self, CheckResult, VerifyOptions};
use serde::Serialize;

mod config;

use config::RunConfig;

/// Overrides the finite-difference step of every built-in system.
const FD_STEP_VAR: &str = "NHMECH_FD_STEP";

#[derive(Debug, Parser)]
#[command(name = "nhmech", version, about = "Nonholonomic mechanics on Lie algebroids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a configured system, run its checks and write the outputs.
    Run { config: PathBuf },
    /// List the built-in systems with their parameters and checks.
    ListSystems {
        #[arg(long)]
        json: bool,
    },
    /// Run verification suites on a built-in system.
    Verify {
        system: String,
        #[arg(long = "check")]
        checks: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Parameter override, `name=value`.
        #[arg(long = "set", value_parser = parse_assignment)]
        params: Vec<(String, f64)>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Runtime(m) => write!(f, "runtime failure: {m}"),
        }
    }
}

fn runtime(e: nhmech::Error) -> Failure {
    Failure::Runtime(e.to_string())
}

fn parse_assignment(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("`{v}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

fn fd_override() -> Result<Option<FdConfig>, Failure> {
    let Ok(raw) = std::env::var(FD_STEP_VAR) else {
        return Ok(None);
    };
    let step: f64 = raw
        .trim()
        .parse()
        .map_err(|e| Failure::Config(format!("{FD_STEP_VAR}: `{raw}`: {e}")))?;
    FdConfig::uniform(step, FdScheme::Central2)
        .map(Some)
        .map_err(|e| Failure::Config(format!("{FD_STEP_VAR}: {e}")))
}

fn with_fd_override(desc: SystemDescriptor) -> Result<SystemDescriptor, Failure> {
    match fd_override()? {
        Some(fd) => desc.with_fd(fd).map_err(runtime),
        None => Ok(desc),
    }
}

#[derive(Serialize)]
struct ReportEntry<'a> {
    name: &'a str,
    measured: f64,
    tolerance: f64,
    pass: bool,
    #[serde(skip_serializing_if = "str::is_empty")]
    detail: &'a str,
}

#[derive(Serialize)]
struct Report<'a> {
    generated_at: String,
    system: &'a str,
    checks: Vec<ReportEntry<'a>>,
}

fn report_json(system: &str, results: &[CheckResult]) -> String {
    let report = Report {
        generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        system,
        checks: results
            .iter()
            .map(|r| ReportEntry {
                name: &r.name,
                measured: r.measured,
                tolerance: r.tolerance,
                pass: r.pass,
                detail: &r.detail,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
    s.push('\n');
    s
}

fn trajectory_csv(desc: &SystemDescriptor, traj: &Trajectory) -> String {
    let chart = desc.system.chart();
    let mut header = vec!["t".to_string()];
    header.extend(chart.base_labels.iter().cloned());
    header.extend(chart.fiber_labels.iter().cloned());
    header.extend(traj.monitors.iter().map(|(l, _)| l.clone()));
    let mut out = header.join(",");
    out.push('\n');
    for k in 0..traj.len() {
        let mut row = vec![traj.times[k]];
        row.extend(traj.xs[k].iter());
        row.extend(traj.ys[k].iter());
        row.extend(traj.monitors.iter().map(|(_, v)| v[k]));
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, contents)
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn run_checks(
    desc: &SystemDescriptor,
    checks: &[String],
    opts: &VerifyOptions,
) -> Result<Vec<CheckResult>, Failure> {
    let mut results = Vec::new();
    for c in checks {
        match verify::run_check(desc, c, opts) {
            Ok(r) => results.extend(r),
            Err(nhmech::Error::PreconditionFailed(m)) | Err(nhmech::Error::InvalidParameters(m)) => {
                return Err(Failure::Config(format!("checks: {m}")))
            }
            Err(e) => return Err(runtime(e)),
        }
    }
    Ok(results)
}

fn summary(results: &[CheckResult]) -> String {
    let mut s = String::new();
    for r in results {
        let status = if r.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(
            s,
            "{status} {}: measured {:.6e}, tolerance {:e}",
            r.name, r.measured, r.tolerance
        );
        if !r.detail.is_empty() {
            let _ = writeln!(s, "     {}", r.detail);
        }
    }
    s
}

fn run(path: &Path) -> Result<bool, Failure> {
    let cfg = RunConfig::load(path)?;
    let desc = with_fd_override(cfg.descriptor()?)?;
    if let Some(out) = &cfg.output.trajectory {
        let sys = desc.system.clone();
        let monitors = [Monitor::new("E", move |x, y| sys.energy(x, y))];
        let traj =
            integrate(&desc.system, &desc.x0, &desc.y0, &desc.integrator, &monitors).map_err(runtime)?;
        write_file(out, &trajectory_csv(&desc, &traj))?;
    }
    let opts = VerifyOptions {
        seed: cfg.seed,
        samples: cfg.samples.unwrap_or(VerifyOptions::default().samples),
        horizon: Some(desc.integrator.horizon),
        fd: fd_override()?.unwrap_or_default(),
    };
    let results = run_checks(&desc, &cfg.checks, &opts)?;
    print!("{}", summary(&results));
    if let Some(out) = &cfg.output.report {
        write_file(out, &report_json(desc.name, &results))?;
    }
    Ok(results.iter().all(|r| r.pass))
}

#[derive(Serialize)]
struct Parameter {
    name: String,
    default: f64,
}

#[derive(Serialize)]
struct Listing {
    name: &'static str,
    parameters: Vec<Parameter>,
    checks: Vec<&'static str>,
}

fn list_systems(json: bool) -> Result<bool, Failure> {
    let mut rows = Vec::new();
    for name in SYSTEM_NAMES {
        let desc = systems::build(name, &[]).map_err(runtime)?;
        rows.push(Listing {
            name: desc.name,
            parameters: desc
                .params
                .entries()
                .iter()
                .map(|(k, v)| Parameter {
                    name: k.clone(),
                    default: *v,
                })
                .collect(),
            checks: desc.checks(),
        });
    }
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&rows).expect("listing serializes")
        );
    } else {
        for r in rows {
            let params: Vec<String> = r
                .parameters
                .iter()
                .map(|p| format!("{}={}", p.name, p.default))
                .collect();
            println!("{}", r.name);
            println!("    parameters: {}", params.join(" "));
            println!("    checks:     {}", r.checks.join(" "));
        }
    }
    Ok(true)
}

fn verify_system(
    name: &str,
    checks: &[String],
    seed: u64,
    params: &[(String, f64)],
    json: bool,
) -> Result<bool, Failure> {
    let desc = systems::build(name, params).map_err(|e| Failure::Config(e.to_string()))?;
    let desc = with_fd_override(desc)?;
    let checks: Vec<String> = if checks.is_empty() {
        desc.checks().into_iter().map(String::from).collect()
    } else {
        checks.to_vec()
    };
    let opts = VerifyOptions {
        seed,
        fd: fd_override()?.unwrap_or_default(),
        ..VerifyOptions::default()
    };
    let results = run_checks(&desc, &checks, &opts)?;
    if json {
        print!("{}", report_json(desc.name, &results));
    } else {
        print!("{}", summary(&results));
    }
    Ok(results.iter().all(|r| r.pass))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { config } => run(config),
        Command::ListSystems { json } => list_systems(*json),
        Command::Verify {
            system,
            checks,
            seed,
            params,
            json,
        } => verify_system(system, checks, *seed, params, *json),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("nhmech: {e}");
            ExitCode::from(e.code())
        }
    }
}
