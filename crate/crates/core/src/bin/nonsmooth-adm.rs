use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use nonsmooth_adm::plot::trace_panels;
use nonsmooth_adm::sim::{
    apply_assignment, compute_metrics, presets, run_scenario, sweep, ControllerKind, Metrics, Scenario, Trace,
};
use nonsmooth_adm::verify::{run_group, GROUPS};
use nonsmooth_adm::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_SIM: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(name = "nonsmooth-adm", version, about = "Set-valued admittance control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Preset name or path to a scenario JSON file.
    #[arg(long, default_value = "fig3_one_dof")]
    scenario: String,
    /// Dotted-path override, e.g. `env.ks_N_per_m=10000` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario; writes trace.csv and metrics.json.
    Run {
        #[command(flatten)]
        sc: ScenarioArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write position/force/torque SVG panels.
        #[arg(long)]
        plot: bool,
    },
    /// Run the set-valued controller against a second controller on one scenario.
    Compare {
        #[command(flatten)]
        sc: ScenarioArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        plot: bool,
        /// Controller to compare against: naive_baseline or proposed.
        #[arg(long, default_value = "naive_baseline")]
        against: String,
    },
    /// Run a scenario once per value of a numeric field.
    Sweep {
        #[command(flatten)]
        sc: ScenarioArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Dotted path of the swept field.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Run the self-check suites; exit 4 if any group fails.
    Verify {
        /// Restrict to these groups (repeatable).
        #[arg(long)]
        group: Vec<String>,
        /// Multiplies every tolerance; 0 makes any deviation fail.
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
    },
    /// Render SVG panels from an existing trace.csv.
    Plot {
        #[command(flatten)]
        sc: ScenarioArgs,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List the presets.
    Presets,
    /// Print a scenario (after overrides) as JSON.
    Show {
        #[command(flatten)]
        sc: ScenarioArgs,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::SimulationBlowUp { .. }
            | Error::StepFailure { .. }
            | Error::SolverNonConvergence { .. }
            | Error::SingularMatrix(_) => EXIT_SIM,
            _ => EXIT_CONFIG,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config_err(message: String) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        message,
    }
}

type CliResult<T = ()> = std::result::Result<T, Failure>;

fn load(args: &ScenarioArgs) -> CliResult<Scenario> {
    let mut sc = Scenario::load(&args.scenario)?;
    for a in &args.overrides {
        sc = apply_assignment(&sc, a)?;
    }
    Ok(sc)
}

fn prepare_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| config_err(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult {
    std::fs::write(path, contents).map_err(|e| config_err(format!("cannot write {}: {e}", path.display())))
}

fn write_panels(dir: &Path, runs: &[(&str, &Trace)], sc: &Scenario) -> CliResult {
    for (name, svg) in trace_panels(runs, sc) {
        write_file(&dir.join(name), &svg)?;
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}

fn summary(label: &str, m: &Metrics) -> String {
    format!(
        "{label:<16} force_err={} mean_fy={} rebounds={} torque_violations={} settle={} max_pen={:.3e} chatter={:.3e}",
        fmt_opt(m.steady_force_err),
        fmt_opt(m.steady_mean_force_N),
        m.rebound_count,
        m.torque_violations,
        fmt_opt(m.settle_time_s),
        m.max_penetration_m,
        m.chattering_index
    )
}

fn cmd_run(args: &ScenarioArgs, out: &Path, plot: bool) -> CliResult {
    let sc = load(args)?;
    prepare_dir(out)?;
    let trace = run_scenario(&sc)?;
    let metrics = compute_metrics(&trace, &sc);
    trace
        .save_csv(&out.join("trace.csv"))
        .map_err(|e| config_err(format!("cannot write trace: {e}")))?;
    write_file(&out.join("metrics.json"), &serde_json::to_string_pretty(&metrics).map_err(Error::from)?)?;
    if plot {
        write_panels(out, &[(sc.name.as_str(), &trace)], &sc)?;
    }
    println!("{}", summary(&sc.name, &metrics));
    println!("wrote {} rows to {}", trace.rows.len(), out.join("trace.csv").display());
    Ok(())
}

fn cmd_compare(args: &ScenarioArgs, out: &Path, plot: bool, against: &str) -> CliResult {
    let base = load(args)?;
    let other = serde_json::from_value::<ControllerKind>(json!(against))
        .map_err(|_| config_err(format!("unknown controller `{against}`; use naive_baseline or proposed")))?;
    prepare_dir(out)?;
    let kinds = [("proposed", ControllerKind::Proposed), (against, other)];
    let mut traces = Vec::new();
    let mut rows = Vec::new();
    for (i, (label, kind)) in kinds.iter().enumerate() {
        let mut sc = base.clone();
        sc.controller.kind = *kind;
        let trace = run_scenario(&sc)?;
        let metrics = compute_metrics(&trace, &sc);
        let file = format!("trace_{i}_{label}.csv");
        trace
            .save_csv(&out.join(&file))
            .map_err(|e| config_err(format!("cannot write trace: {e}")))?;
        println!("{}", summary(label, &metrics));
        rows.push(json!({ "controller": label, "trace": file, "metrics": metrics }));
        traces.push((label.to_string(), trace));
    }
    let doc = json!({ "scenario": base.name, "rows": rows });
    write_file(&out.join("metrics_compare.json"), &serde_json::to_string_pretty(&doc).map_err(Error::from)?)?;
    if plot {
        let runs: Vec<(&str, &Trace)> = traces.iter().map(|(l, t)| (l.as_str(), t)).collect();
        write_panels(out, &runs, &base)?;
    }
    Ok(())
}

fn cmd_sweep(args: &ScenarioArgs, out: &Path, param: &str, values: &[f64]) -> CliResult {
    let sc = load(args)?;
    prepare_dir(out)?;
    let rows = sweep(&sc, param, values)?;
    for r in &rows {
        println!("{}", summary(&format!("{param}={}", r.value), &r.metrics));
    }
    let doc = json!({ "scenario": sc.name, "param": param, "rows": rows });
    write_file(&out.join("sweep.json"), &serde_json::to_string_pretty(&doc).map_err(Error::from)?)
}

fn cmd_verify(groups: &[String], tolerance_scale: f64) -> CliResult {
    let selected: Vec<&str> = if groups.is_empty() {
        GROUPS.to_vec()
    } else {
        groups.iter().map(String::as_str).collect()
    };
    let mut failed = Vec::new();
    for g in selected {
        let r = run_group(g, tolerance_scale)
            .ok_or_else(|| config_err(format!("unknown group `{g}`; available: {}", GROUPS.join(", "))))?;
        println!(
            "[{}] {:<12} worst={:.3e} tol={:.1e} cases={} ({})",
            if r.passed { "PASS" } else { "FAIL" },
            r.group,
            r.worst,
            r.tolerance,
            r.cases,
            r.note
        );
        if !r.passed {
            failed.push(r.group);
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_VERIFY,
            message: format!("failed groups: {}", failed.join(", ")),
        })
    }
}

fn cmd_plot(args: &ScenarioArgs, trace: &Path, out: &Path) -> CliResult {
    let sc = load(args)?;
    let tr = Trace::load_csv(trace)?;
    prepare_dir(out)?;
    write_panels(out, &[(sc.name.as_str(), &tr)], &sc)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { sc, out, plot } => cmd_run(sc, out, *plot),
        Command::Compare { sc, out, plot, against } => cmd_compare(sc, out, *plot, against),
        Command::Sweep { sc, out, param, values } => cmd_sweep(sc, out, param, values),
        Command::Verify { group, tolerance_scale } => cmd_verify(group, *tolerance_scale),
        Command::Plot { sc, trace, out } => cmd_plot(sc, trace, out),
        Command::Presets => {
            for p in presets() {
                println!("{:<16} dof={} h={} s duration={} s", p.name, p.plant.dof(), p.h_s, p.duration_s);
            }
            Ok(())
        }
        Command::Show { sc } => load(sc).and_then(|s| {
            println!("{}", serde_json::to_string_pretty(&s).map_err(Error::from)?);
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
