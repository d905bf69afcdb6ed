//! Command-line interface: scenario verification with JSON reports,
//! profile certification, and trajectory export.
//!
//! Exit codes: 0 all checks passed, 1 at least one check failed, 2 bad
//! configuration or usage, 3 internal numeric failure (singular systems,
//! integrator breakdown).

mod config;
mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use foldform_core::dynamics::integrate;
use foldform_core::folding::{certify_candidate, default_profile_pair};
use foldform_core::scenario::{
    flow_field, run_scenario_with, scenario_names, ScenarioId, ScenarioParams,
};

use config::{resolve, ResolvedConfig, ScenarioConfig};
use report::{build_report, checks_csv, to_json, JsonReport};

#[derive(Parser)]
#[command(
    name = "foldform",
    about = "Verification toolkit for contact forms on mapping tori and folded sums",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a built-in scenario's check suite and emit a JSON report.
    Verify {
        /// Scenario id (see `list`), or `all` for the full default suite.
        #[arg(long)]
        scenario: String,
        /// JSON configuration file (strict keys).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the per-axis product-grid resolution.
        #[arg(long)]
        grid: Option<usize>,
        /// Report output path (defaults to stdout summary only).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for CSV exports of the check table.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Zero the per-check wall-clock fields for byte-identical reports.
        #[arg(long)]
        no_timestamp: bool,
    },
    /// Gluing-profile operations.
    Profile {
        #[command(subcommand)]
        cmd: ProfileCmd,
    },
    /// Integrate the scenario's flagship field and export the trajectory.
    Flow {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated initial point in chart coordinates.
        #[arg(long)]
        x0: String,
        /// Integration time.
        #[arg(long, short = 'T')]
        t: f64,
        /// Integrator tolerance.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// CSV output path (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the built-in scenario ids.
    List,
}

#[derive(Subcommand)]
enum ProfileCmd {
    /// Certify the gluing profile from a configuration file.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = Cli::parse();
    init_thread_pool();
    match cli.cmd {
        Cmd::List => {
            for name in scenario_names() {
                println!("{name}");
            }
            0
        }
        Cmd::Verify {
            scenario,
            config,
            grid,
            out,
            csv,
            no_timestamp,
        } => match cmd_verify(&scenario, config.as_deref(), grid, out, csv, no_timestamp) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("error: {e:#}");
                2
            }
        },
        Cmd::Profile {
            cmd: ProfileCmd::Check { config },
        } => match cmd_profile_check(&config) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("error: {e:#}");
                2
            }
        },
        Cmd::Flow {
            scenario,
            config,
            x0,
            t,
            tol,
            out,
        } => match cmd_flow(&scenario, config.as_deref(), &x0, t, tol, out) {
            Ok(code) => code,
            Err(FlowError::Usage(e)) => {
                eprintln!("error: {e:#}");
                2
            }
            Err(FlowError::Numeric(e)) => {
                eprintln!("numeric failure: {e}");
                3
            }
        },
    }
}

/// Cap the worker pool from FOLDFORM_THREADS (default: machine parallelism).
fn init_thread_pool() {
    if let Ok(v) = std::env::var("FOLDFORM_THREADS") {
        if let Ok(threads) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build_global();
        }
    }
}

fn load_config(scenario: &str, config: Option<&Path>) -> anyhow::Result<ScenarioConfig> {
    let mut cfg = match config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::bare(scenario),
    };
    if scenario != cfg.scenario && config.is_some() && scenario != "all" {
        anyhow::bail!(
            "--scenario {scenario} does not match config scenario `{}`",
            cfg.scenario
        );
    }
    if scenario != "all" {
        cfg.scenario = scenario.to_string();
    }
    Ok(cfg)
}

fn run_one(
    id: ScenarioId,
    params: &ScenarioParams,
    resolved: ResolvedConfig,
    no_timestamp: bool,
) -> JsonReport {
    let mut timed = Vec::new();
    let mut last = Instant::now();
    run_scenario_with(id, params, &mut |check| {
        let now = Instant::now();
        let ms = now.duration_since(last).as_millis() as u64;
        last = now;
        timed.push((check, ms));
    });
    build_report(id.name(), resolved, timed, no_timestamp)
}

fn print_summary(report: &JsonReport) {
    for c in &report.checks {
        println!(
            "[{}] {}::{:<40} metric={:>12.4e} threshold={:>9.2e} samples={}",
            if c.passed { "pass" } else { "FAIL" },
            report.scenario,
            c.name,
            c.metric,
            c.threshold,
            c.samples
        );
    }
    println!(
        "{}: {}",
        report.scenario,
        if report.overall { "PASS" } else { "FAIL" }
    );
}

fn exit_code_for(reports: &[JsonReport]) -> i32 {
    let mut numeric_failure = false;
    let mut check_failure = false;
    for r in reports {
        for c in &r.checks {
            if !c.passed {
                check_failure = true;
                if c.samples == 0 && c.metric >= 1e300 {
                    numeric_failure = true;
                }
            }
        }
    }
    if numeric_failure {
        3
    } else if check_failure {
        1
    } else {
        0
    }
}

fn cmd_verify(
    scenario: &str,
    config: Option<&Path>,
    grid: Option<usize>,
    out: Option<PathBuf>,
    csv: Option<PathBuf>,
    no_timestamp: bool,
) -> anyhow::Result<i32> {
    let suite: Vec<(String, Option<usize>)> = if scenario == "all" {
        vec![
            ("trivial_torus".into(), Some(1)),
            ("trivial_torus".into(), Some(2)),
            ("folded_spheres".into(), Some(1)),
            ("folded_spheres".into(), Some(2)),
            ("folded_spheres".into(), Some(3)),
            ("cotangent_t3".into(), None),
            ("folded_t3".into(), None),
        ]
    } else {
        vec![(scenario.to_string(), None)]
    };
    let mut jobs = Vec::new();
    for (name, n_override) in &suite {
        let mut cfg = load_config(name, config)?;
        if let Some(n) = n_override {
            cfg.n = Some(*n);
        }
        let (id, mut params, mut resolved) = resolve(&cfg)?;
        if let Some(g) = grid {
            params.grid_override = Some(g);
            resolved.grid.per_axis = Some(g);
        }
        jobs.push((id, params, resolved));
    }
    // Scenarios are independent; run them on the worker pool.
    use rayon::prelude::*;
    let reports: Vec<JsonReport> = jobs
        .into_par_iter()
        .map(|(id, params, resolved)| run_one(id, &params, resolved, no_timestamp))
        .collect();
    for r in &reports {
        print_summary(r);
    }
    let json = if reports.len() == 1 {
        to_json(&reports[0])
    } else {
        serde_json::to_string_pretty(
            &reports
                .iter()
                .map(|r| serde_json::to_value(r).expect("report serializes"))
                .collect::<Vec<_>>(),
        )?
    };
    let out_path = out.or_else(|| {
        config.and_then(|p| {
            ScenarioConfig::load(p)
                .ok()
                .and_then(|c| c.output.and_then(|o| o.report))
        })
    });
    if let Some(path) = out_path {
        std::fs::write(&path, &json)
            .map_err(|e| anyhow::anyhow!("writing report {}: {e}", path.display()))?;
        println!("report written to {}", path.display());
    }
    if let Some(dir) = csv {
        std::fs::create_dir_all(&dir)
            .map_err(|e| anyhow::anyhow!("creating {}: {e}", dir.display()))?;
        for r in &reports {
            let mut path = dir.clone();
            path.push(format!("{}_checks.csv", r.scenario));
            std::fs::write(&path, checks_csv(r))
                .map_err(|e| anyhow::anyhow!("writing {}: {e}", path.display()))?;
        }
    }
    Ok(exit_code_for(&reports))
}

fn cmd_profile_check(config: &Path) -> anyhow::Result<i32> {
    let cfg = ScenarioConfig::load(config)?;
    let (_, params, resolved) = resolve(&cfg)?;
    let (f, g) = default_profile_pair(resolved.k, &params.shape);
    let cert = certify_candidate(&f, &g, resolved.k, resolved.epsilon, params.sweep_points);
    for c in &cert.conditions {
        println!(
            "[{}] {:<28} mode: {}{}",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            c.mode,
            c.witness
                .map(|w| format!(", witness t = {w}"))
                .unwrap_or_default()
        );
    }
    println!(
        "sweep: {} points, min(f'g - fg') = {:.6e}, interval bound on |(f'g - fg')'| = {:.3e}, gap margin = {:.6e}",
        cert.sweep_points, cert.min_positivity, cert.lipschitz_bound, cert.gap_margin
    );
    Ok(if cert.all_passed() { 0 } else { 1 })
}

enum FlowError {
    Usage(anyhow::Error),
    Numeric(foldform_core::Error),
}

fn cmd_flow(
    scenario: &str,
    config: Option<&Path>,
    x0: &str,
    t: f64,
    tol: f64,
    out: Option<PathBuf>,
) -> Result<i32, FlowError> {
    let cfg = load_config(scenario, config).map_err(FlowError::Usage)?;
    let (id, params, _) = resolve(&cfg).map_err(FlowError::Usage)?;
    let point: Vec<f64> = x0
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| FlowError::Usage(anyhow::anyhow!("parsing --x0: {e}")))?;
    let (chart, field) = flow_field(id, &params).map_err(FlowError::Numeric)?;
    if point.len() != chart.dim() {
        return Err(FlowError::Usage(anyhow::anyhow!(
            "--x0 needs {} coordinates for {}, got {}",
            chart.dim(),
            chart.name,
            point.len()
        )));
    }
    let traj = integrate(&field, &point, t, tol).map_err(FlowError::Numeric)?;
    let mut csv = String::from("time");
    for c in chart.coords() {
        csv.push_str(&format!(",{}", c.name));
    }
    for (i, c) in chart.coords().iter().enumerate() {
        if chart.is_angle(i) {
            csv.push_str(&format!(",lift_{}", c.name));
        }
    }
    csv.push('\n');
    for s in &traj.samples {
        let wrapped = s.wrapped(&chart);
        csv.push_str(&format!("{:.12e}", s.time));
        for v in &wrapped {
            csv.push_str(&format!(",{v:.12e}"));
        }
        for (i, v) in s.lift.iter().enumerate() {
            if chart.is_angle(i) {
                csv.push_str(&format!(",{v:.12e}"));
            }
        }
        csv.push('\n');
    }
    match out {
        Some(path) => {
            std::fs::write(&path, csv)
                .map_err(|e| FlowError::Usage(anyhow::anyhow!("writing {}: {e}", path.display())))?;
            println!(
                "trajectory with {} samples written to {}",
                traj.samples.len(),
                path.display()
            );
        }
        None => {
            std::io::stdout()
                .write_all(csv.as_bytes())
                .map_err(|e| FlowError::Usage(anyhow::anyhow!("stdout: {e}")))?;
        }
    }
    Ok(0)
}
