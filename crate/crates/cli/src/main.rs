//! `gridcert`: certify, simulate, and probe inverter-based power networks
//! from TOML configuration files.
//!
//! Exit codes: 0 positive verdict (certified / stable / decaying), 2
//! negative verdict, 3 invalid input, 4 numerical failure, 5 inconclusive.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gridcert_cli::config::{self, LoadedNetwork};
use gridcert_cli::report::Report;
use gridcert_cli::{exit, exit_code_for};
use gridcert_core::{
    admit, certify_bus, detect_stability, first_order_protocol, frequency_metrics, min_gamma,
    min_gamma_first_order, nyquist_global_check, protocol_certify_network, simulate, Certificate,
    Complex64, Error as CoreError, FirstOrderDesign, FrequencyGrid, GlobalVerdict, SimVerdict,
    Trajectory, DEFAULT_GAMMA_TOL,
};
use serde_json::{json, Value};

/// Relative bisection tolerance for the closed-form budget search.
const FIRST_ORDER_TOL: f64 = 1e-6;

#[derive(Parser, Debug)]
#[command(
    name = "gridcert",
    version,
    about = "Decentralized stability certification for inverter-based power networks"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Frequency-grid options shared by the sweeping subcommands. The default
/// density can also be set with the `GRIDCERT_GRID_POINTS` environment
/// variable; an explicit `--points` wins.
#[derive(Args, Debug)]
struct GridArgs {
    /// Lowest swept frequency, rad/s.
    #[arg(long, value_name = "RAD_S")]
    grid_min: Option<f64>,
    /// Highest swept frequency, rad/s.
    #[arg(long, value_name = "RAD_S")]
    grid_max: Option<f64>,
    /// Number of log-spaced grid points.
    #[arg(long, value_name = "N")]
    points: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run the decentralized admission protocol on every bus.
    Certify {
        /// Network configuration file.
        config: PathBuf,
        /// Check a fixed coupling budget instead of searching for the
        /// smallest one.
        #[arg(long)]
        gamma: Option<f64>,
        #[command(flatten)]
        grid: GridArgs,
        /// Write a JSON report here.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
    },
    /// Integrate the configured disturbance scenario and classify it.
    Simulate {
        /// Network configuration file (must contain a [sim] section).
        config: PathBuf,
        /// Write the trajectory as CSV here.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Fraction of the horizon where the leading window ends.
        #[arg(long, default_value_t = 0.5)]
        split: f64,
        /// Write a JSON report here.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
    },
    /// Emit one bus's frequency response as CSV.
    Freqresp {
        /// Network configuration file.
        config: PathBuf,
        /// Bus id to evaluate.
        #[arg(long)]
        bus: String,
        /// Write the CSV here instead of stdout.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Count closed-loop right-half-plane poles via the loop determinant.
    GlobalCheck {
        /// Network configuration file.
        config: PathBuf,
        #[command(flatten)]
        grid: GridArgs,
        /// Write a JSON report here.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
    },
    /// Smallest certified coupling budget of one bus.
    MinGamma {
        /// Network configuration file.
        config: PathBuf,
        /// Bus id to certify.
        #[arg(long)]
        bus: String,
        #[command(flatten)]
        grid: GridArgs,
        /// Write a JSON report here.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
    },
    /// Closed-form budget test for a first-order design a/(s+b) with
    /// envelope radius eps under the canonical filter.
    FirstOrder {
        /// Surrogate gain a.
        #[arg(long)]
        a: f64,
        /// Surrogate pole b.
        #[arg(long)]
        b: f64,
        /// Envelope radius.
        #[arg(long)]
        eps: f64,
        /// Filter corner frequency, rad/s.
        #[arg(long)]
        omega0: f64,
        /// Also test this fixed budget and set the exit code from it.
        #[arg(long)]
        gamma: Option<f64>,
        /// Write a JSON report here.
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
    },
}

/// A command failure: what to tell the user and how to exit.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: exit::INVALID_INPUT,
            message: message.into(),
        }
    }

    fn core(e: &CoreError) -> Self {
        Failure {
            code: exit_code_for(e),
            message: e.to_string(),
        }
    }
}

impl From<config::ConfigError> for Failure {
    fn from(e: config::ConfigError) -> Self {
        Failure::input(e.to_string())
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                exit::SUCCESS
            } else {
                exit::INVALID_INPUT
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = match run(cli.cmd) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    };
    std::process::exit(code);
}

fn run(cmd: Cmd) -> Result<i32, Failure> {
    match cmd {
        Cmd::Certify {
            config,
            gamma,
            grid,
            report,
        } => cmd_certify(&config, gamma, &grid, report.as_deref()),
        Cmd::Simulate {
            config,
            out,
            split,
            report,
        } => cmd_simulate(&config, out.as_deref(), split, report.as_deref()),
        Cmd::Freqresp {
            config,
            bus,
            out,
            grid,
        } => cmd_freqresp(&config, &bus, out.as_deref(), &grid),
        Cmd::GlobalCheck {
            config,
            grid,
            report,
        } => cmd_global_check(&config, &grid, report.as_deref()),
        Cmd::MinGamma {
            config,
            bus,
            grid,
            report,
        } => cmd_min_gamma(&config, &bus, &grid, report.as_deref()),
        Cmd::FirstOrder {
            a,
            b,
            eps,
            omega0,
            gamma,
            report,
        } => cmd_first_order(a, b, eps, omega0, gamma, report.as_deref()),
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

fn build_grid(args: &GridArgs) -> Result<FrequencyGrid, Failure> {
    let min = args.grid_min.unwrap_or(FrequencyGrid::DEFAULT_MIN);
    let max = args.grid_max.unwrap_or(FrequencyGrid::DEFAULT_MAX);
    let points = match args.points {
        Some(p) => p,
        None => match std::env::var("GRIDCERT_GRID_POINTS") {
            Ok(raw) => raw.trim().parse().map_err(|_| {
                Failure::input(format!(
                    "GRIDCERT_GRID_POINTS = '{raw}' is not a positive integer"
                ))
            })?,
            Err(_) => FrequencyGrid::DEFAULT_POINTS,
        },
    };
    FrequencyGrid::log_spaced(min, max, points).map_err(|e| Failure::core(&e))
}

fn load(path: &Path) -> Result<LoadedNetwork, Failure> {
    Ok(config::parse_config(path)?)
}

fn write_file(path: &Path, contents: &str, what: &str) -> Result<(), Failure> {
    std::fs::write(path, contents)
        .map_err(|e| Failure::input(format!("cannot write {what} {}: {e}", path.display())))
}

fn write_report(path: Option<&Path>, report: &Report) -> Result<(), Failure> {
    match path {
        Some(path) => write_file(path, &report.render(), "report"),
        None => Ok(()),
    }
}

/// Fold per-bus outcomes into a process exit code: numerical failures
/// dominate, then inconclusive scans, then the negative verdict.
fn fold_outcomes(outcomes: &[Result<Certificate, CoreError>], certified: bool) -> i32 {
    let codes: Vec<i32> = outcomes
        .iter()
        .filter_map(|o| o.as_ref().err().map(exit_code_for))
        .collect();
    if codes.contains(&exit::NUMERICAL) {
        exit::NUMERICAL
    } else if codes.contains(&exit::INCONCLUSIVE) {
        exit::INCONCLUSIVE
    } else if certified {
        exit::SUCCESS
    } else {
        exit::NEGATIVE
    }
}

// ---------------------------------------------------------------------------
// certify
// ---------------------------------------------------------------------------

fn cmd_certify(
    path: &Path,
    gamma: Option<f64>,
    grid_args: &GridArgs,
    report_path: Option<&Path>,
) -> Result<i32, Failure> {
    let loaded = load(path)?;
    let grid = build_grid(grid_args)?;
    let mut report = Report::new("certify");
    report.grid(&grid).tolerances(json!({
        "gamma_tol": DEFAULT_GAMMA_TOL,
        "margin": "per-bus decision tolerance reported in each entry",
    }));

    let (outcomes, certified) = match gamma {
        None => {
            let p = protocol_certify_network(&loaded.network, &loaded.h, &grid)
                .map_err(|e| Failure::core(&e))?;
            (p.outcomes, p.certified)
        }
        Some(gamma) => {
            // Fixed-budget mode: the protocol at a caller-chosen gamma.
            let mut outcomes = Vec::with_capacity(loaded.network.len());
            let mut certified = true;
            for idx in 0..loaded.network.len() {
                let incident = gridcert_core::diag_susceptance(&loaded.network, idx)
                    .map_err(|e| Failure::core(&e))?;
                let outcome = certify_bus(&loaded.h, &loaded.network.buses()[idx], gamma, &grid)
                    .and_then(|margin| {
                        if !margin.passes() {
                            return Err(CoreError::NoCertificate { gamma_cap: gamma });
                        }
                        Ok(Certificate {
                            gamma_min: gamma,
                            margin,
                            susceptance_budget: 1.0 / gamma,
                            diag_susceptance: incident,
                            admitted: admit(gamma, incident),
                            grid: grid.clone(),
                        })
                    });
                match &outcome {
                    Ok(c) if c.admitted => {}
                    _ => certified = false,
                }
                outcomes.push(outcome);
            }
            (outcomes, certified)
        }
    };

    let mut entries = Vec::with_capacity(outcomes.len());
    for (idx, outcome) in outcomes.iter().enumerate() {
        let id = &loaded.ids[idx];
        match outcome {
            Ok(c) => {
                println!(
                    "bus {id}: gamma_min = {:.6}, budget = {:.4}, incident = {:.4}, {}",
                    c.gamma_min,
                    c.susceptance_budget,
                    c.diag_susceptance,
                    if c.admitted { "admitted" } else { "over budget" },
                );
                entries.push(json!({
                    "id": id,
                    "gamma_min": c.gamma_min,
                    "susceptance_budget": c.susceptance_budget,
                    "incident_susceptance": c.diag_susceptance,
                    "admitted": c.admitted,
                    "margin": {
                        "value": c.margin.margin,
                        "frequency": c.margin.frequency,
                        "tolerance": c.margin.tolerance,
                        "checked_to": c.margin.checked_to,
                    },
                }));
            }
            Err(e) => {
                println!("bus {id}: {e}");
                entries.push(json!({ "id": id, "error": e.to_string() }));
            }
        }
    }
    let verdict = if certified { "certified" } else { "not certified" };
    println!("verdict: {verdict}");

    let code = fold_outcomes(&outcomes, certified);
    report
        .field("buses", Value::Array(entries))
        .field("certified", Value::Bool(certified))
        .finish(verdict, code);
    write_report(report_path, &report)?;
    Ok(code)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn trajectory_csv(traj: &Trajectory, ids: &[String]) -> String {
    let mut csv = String::from("t");
    for id in ids {
        let _ = write!(csv, ",theta_{id},omega_{id},x_{id}");
    }
    csv.push('\n');
    for k in 0..traj.len() {
        let _ = write!(csv, "{}", traj.times()[k]);
        for bus in 0..traj.n_buses() {
            let _ = write!(
                csv,
                ",{},{},{}",
                traj.theta(bus)[k],
                traj.omega(bus)[k],
                traj.x(bus)[k]
            );
        }
        csv.push('\n');
    }
    csv
}

fn cmd_simulate(
    path: &Path,
    out: Option<&Path>,
    split: f64,
    report_path: Option<&Path>,
) -> Result<i32, Failure> {
    let loaded = load(path)?;
    let cfg = loaded
        .sim
        .as_ref()
        .ok_or_else(|| Failure::input("config has no [sim] section"))?;

    let traj = simulate(&loaded.network, cfg).map_err(|e| Failure::core(&e))?;
    if let Some(out) = out {
        write_file(out, &trajectory_csv(&traj, &loaded.ids), "trajectory CSV")?;
    }

    let verdict = detect_stability(&traj, split).map_err(|e| Failure::core(&e))?;
    let (verdict_name, code, ratio) = match verdict {
        SimVerdict::Decaying => ("decaying", exit::SUCCESS, None),
        SimVerdict::Growing => ("growing", exit::NEGATIVE, None),
        SimVerdict::Inconclusive { ratio } => ("inconclusive", exit::INCONCLUSIVE, Some(ratio)),
    };
    match ratio {
        Some(r) => println!("verdict: {verdict_name} (trailing/leading ratio {r:.3})"),
        None => println!("verdict: {verdict_name}"),
    }
    if let Some(reason) = traj.truncated() {
        println!("truncated: {reason}");
    }

    let mut report = Report::new("simulate");
    report
        .tolerances(json!({
            "growth_ratio": 2.0,
            "decay_ratio": 0.5,
            "split": split,
        }))
        .field(
            "scenario",
            json!({
                "dt": cfg.dt(),
                "t_end": cfg.t_end(),
                "samples": traj.len(),
                "truncated": traj.truncated(),
            }),
        );
    if let Some(r) = ratio {
        report.field("ratio", json!(r));
    }

    // Steady-state metrics only mean something for settled runs; their
    // absence is reported, not fatal.
    if verdict.is_decaying() {
        match frequency_metrics(&traj) {
            Ok(m) => {
                let mut entries = Vec::new();
                for (idx, id) in loaded.ids.iter().enumerate() {
                    println!(
                        "bus {id}: nadir = {:.6}, offset = {:.6}, max_rocof = {:.6}",
                        m.nadir[idx], m.offset[idx], m.max_rocof[idx],
                    );
                    entries.push(json!({
                        "id": id,
                        "nadir": m.nadir[idx],
                        "offset": m.offset[idx],
                        "max_rocof": m.max_rocof[idx],
                    }));
                }
                report.field("metrics", Value::Array(entries));
            }
            Err(e) => {
                println!("steady-state metrics unavailable: {e}");
                report.field("metrics_error", json!(e.to_string()));
            }
        }
    }

    report.finish(verdict_name, code);
    write_report(report_path, &report)?;
    Ok(code)
}

// ---------------------------------------------------------------------------
// freqresp
// ---------------------------------------------------------------------------

fn cmd_freqresp(
    path: &Path,
    bus: &str,
    out: Option<&Path>,
    grid_args: &GridArgs,
) -> Result<i32, Failure> {
    let loaded = load(path)?;
    let idx = loaded.index_of(bus)?;
    let grid = build_grid(grid_args)?;
    let model = &loaded.network.buses()[idx];

    let mut csv = String::from("omega,re,im,mag,phase\n");
    for &w in grid.points() {
        let v = model
            .eval(Complex64::new(0.0, w))
            .map_err(|e| Failure::core(&e))?;
        let _ = writeln!(csv, "{w},{},{},{},{}", v.re, v.im, v.norm(), v.arg());
    }
    match out {
        Some(out) => write_file(out, &csv, "frequency-response CSV")?,
        None => print!("{csv}"),
    }
    Ok(exit::SUCCESS)
}

// ---------------------------------------------------------------------------
// global-check
// ---------------------------------------------------------------------------

fn cmd_global_check(
    path: &Path,
    grid_args: &GridArgs,
    report_path: Option<&Path>,
) -> Result<i32, Failure> {
    let loaded = load(path)?;
    let grid = build_grid(grid_args)?;
    let mut report = Report::new("global-check");
    report.grid(&grid);

    let (verdict, code, poles) = match nyquist_global_check(&loaded.network, &grid) {
        Ok(GlobalVerdict::Stable) => {
            println!("verdict: stable (no closed-loop right-half-plane poles)");
            ("stable", exit::SUCCESS, 0)
        }
        Ok(GlobalVerdict::Unstable { rhp_poles }) => {
            println!("verdict: unstable ({rhp_poles} closed-loop right-half-plane poles)");
            ("unstable", exit::NEGATIVE, rhp_poles)
        }
        Err(e) => {
            report.field("error", json!(e.to_string()));
            report.finish("error", exit_code_for(&e));
            write_report(report_path, &report)?;
            return Err(Failure::core(&e));
        }
    };
    report
        .field("rhp_poles", json!(poles))
        .finish(verdict, code);
    write_report(report_path, &report)?;
    Ok(code)
}

// ---------------------------------------------------------------------------
// min-gamma
// ---------------------------------------------------------------------------

fn cmd_min_gamma(
    path: &Path,
    bus: &str,
    grid_args: &GridArgs,
    report_path: Option<&Path>,
) -> Result<i32, Failure> {
    let loaded = load(path)?;
    let idx = loaded.index_of(bus)?;
    let grid = build_grid(grid_args)?;
    let model = &loaded.network.buses()[idx];

    let gamma_min =
        min_gamma(&loaded.h, model, &grid, DEFAULT_GAMMA_TOL).map_err(|e| Failure::core(&e))?;
    println!("bus {bus}: gamma_min = {gamma_min:.6}, budget = {:.4}", 1.0 / gamma_min);

    let mut report = Report::new("min-gamma");
    report
        .grid(&grid)
        .tolerances(json!({ "gamma_tol": DEFAULT_GAMMA_TOL }))
        .field(
            "bus",
            json!({
                "id": bus,
                "gamma_min": gamma_min,
                "susceptance_budget": 1.0 / gamma_min,
            }),
        )
        .finish("certified", exit::SUCCESS);
    write_report(report_path, &report)?;
    Ok(exit::SUCCESS)
}

// ---------------------------------------------------------------------------
// first-order
// ---------------------------------------------------------------------------

fn cmd_first_order(
    a: f64,
    b: f64,
    eps: f64,
    omega0: f64,
    gamma: Option<f64>,
    report_path: Option<&Path>,
) -> Result<i32, Failure> {
    let design = FirstOrderDesign::new(a, b, eps, omega0).map_err(|e| Failure::core(&e))?;
    let gamma_min =
        min_gamma_first_order(&design, FIRST_ORDER_TOL).map_err(|e| Failure::core(&e))?;
    println!("gamma_min = {gamma_min:.6}");

    let mut report = Report::new("first-order");
    report
        .tolerances(json!({ "gamma_tol": FIRST_ORDER_TOL }))
        .field(
            "design",
            json!({ "a": a, "b": b, "eps": eps, "omega0": omega0 }),
        )
        .field("gamma_min", json!(gamma_min));

    let code = match gamma {
        None => {
            report.finish("certified", exit::SUCCESS);
            exit::SUCCESS
        }
        Some(g) => {
            let pass = first_order_protocol(&design, g);
            println!(
                "gamma = {g}: {}",
                if pass { "pass" } else { "fail" }
            );
            let code = if pass { exit::SUCCESS } else { exit::NEGATIVE };
            report.field("gamma", json!(g)).field("pass", json!(pass));
            report.finish(if pass { "pass" } else { "fail" }, code);
            code
        }
    };
    write_report(report_path, &report)?;
    Ok(code)
}
