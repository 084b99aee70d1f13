use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nipah_core::analysis::analyze;
use nipah_core::chart::{emit_chart_svg, Series};
use nipah_core::control::objective;
use nipah_core::io::write_trajectory_csv;
use nipah_core::sweep::{cell_file_name, load_sweep_spec_with_overrides, run_sweep};
use nipah_core::{
    load_scenario_with_overrides, simulate, Dynamics, Error, ErrorKind, Mode, ModelVariant,
    Scenario, State, Trajectory,
};
use serde_json::json;

const EXIT_IO: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_DOMAIN: u8 = 3;
const EXIT_NON_FINITE: u8 = 4;
const EXIT_CELL_FAILED: u8 = 5;

/// Nipah virus transmission model: analysis, simulation and optimal control.
#[derive(Parser, Debug)]
#[command(name = "nipah", version, after_help = EXIT_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

const EXIT_HELP: &str = "Exit codes: 0 success, 1 I/O error, 2 invalid input, \
3 analysis undefined for the inputs, 4 non-finite values during integration, \
5 at least one sweep cell failed.";

#[derive(clap::Args, Debug)]
struct Common {
    /// Scenario file (sweep spec for `sweep`).
    file: PathBuf,
    /// Output directory, created if missing [default: out; for `sweep`, the spec's `outputs`].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a parameter or solver setting before validation, e.g. `beta=2.0`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Also write SVG charts.
    #[arg(long)]
    svg: bool,
    /// Include costate columns in the optimal trajectory CSV.
    #[arg(long)]
    adjoints: bool,
}

impl Common {
    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Reproduction numbers, equilibria and stability for both model variants.
    Analyze(Common),
    /// Integrate the scenario's dynamics and write trajectory.csv.
    Simulate(Common),
    /// Solve the optimal control problem and write optimal.csv and fbs.json.
    Optimize(Common),
    /// Run a parameter sweep and write one CSV per cell plus summary.csv.
    Sweep(Common),
}

fn exit_code(err: &Error) -> u8 {
    match err.kind() {
        ErrorKind::Io => EXIT_IO,
        ErrorKind::Validation => EXIT_VALIDATION,
        ErrorKind::Domain => EXIT_DOMAIN,
        ErrorKind::NonFinite => EXIT_NON_FINITE,
    }
}

fn load(args: &Common) -> Result<Scenario, Error> {
    let text = fs::read_to_string(&args.file).map_err(|source| Error::Io {
        path: args.file.clone(),
        source,
    })?;
    let scenario = load_scenario_with_overrides(&text, &args.overrides)?;
    for w in scenario.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(scenario)
}

fn prepare_out(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn run_analyze(args: &Common) -> Result<u8, Error> {
    let scenario = load(args)?;
    let p = &scenario.params;
    let free = analyze(p, ModelVariant::TreatmentFree)?;
    let treat = analyze(p, ModelVariant::Treatment)?;
    let report = json!({
        "label": scenario.label,
        "r0_treatment_free": free.r0,
        "r0_treatment": treat.r0,
        "treatment_free": free,
        "treatment": treat,
    });
    let out = args.out_dir();
    prepare_out(&out)?;
    write_json(&out.join("analysis.json"), &report)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    for r in [&free, &treat] {
        eprintln!(
            "{:>14}: R0 = {:.6} (spectral {:.6}), DFE {:?}, endemic {}",
            r.variant.name(),
            r.r0,
            r.r0_spectral,
            r.verdicts.dfe_stability,
            match r.verdicts.endemic_stability {
                Some(s) => format!("present ({s:?})"),
                None => "absent".to_string(),
            }
        );
    }
    Ok(0)
}

fn compartment_series(traj: &Trajectory, which: &[usize]) -> Vec<Series> {
    let t = traj.times();
    which
        .iter()
        .map(|&k| Series::from_columns(State::LABELS[k], &t, &traj.component(k)))
        .collect()
}

fn run_simulate(args: &Common) -> Result<u8, Error> {
    let scenario = load(args)?;
    if let Mode::Controlled { .. } = scenario.mode {
        eprintln!("note: controlled scenario simulated with zero controls; use `optimize` for the optimum");
    }
    let traj = scenario.simulate()?;
    let out = args.out_dir();
    prepare_out(&out)?;
    write_trajectory_csv(&traj, &out.join("trajectory.csv"))?;
    let inv = traj.invariant_report(&scenario.params);
    eprintln!(
        "positivity: {} (min component / (pi/mu) = {:e})",
        if inv.positivity_ok { "ok" } else { "VIOLATED" },
        inv.min_component_ratio
    );
    if inv.starts_in_region {
        eprintln!(
            "invariant region: {} (max N / (pi/mu) = {:.12})",
            if inv.region_ok { "ok" } else { "VIOLATED" },
            inv.max_total_ratio
        );
    } else {
        eprintln!("invariant region: not checked, N(0) > pi/mu");
    }
    eprintln!(
        "peak I = {:.6e}, cumulative I = {:.6e}, final R = {:.6e}",
        traj.peak_infected(),
        traj.cumulative_infected(),
        traj.final_state().r
    );
    if args.svg {
        emit_chart_svg(
            &compartment_series(&traj, &[1, 2, 3]),
            &out.join("infected.svg"),
            &format!("{}: exposed, infected, treated", scenario.label),
        )?;
        emit_chart_svg(
            &compartment_series(&traj, &[0, 4]),
            &out.join("susceptible_recovered.svg"),
            &format!("{}: susceptible and recovered", scenario.label),
        )?;
    }
    Ok(0)
}

fn run_optimize(args: &Common) -> Result<u8, Error> {
    let scenario = load(args)?;
    let Some(cfg) = scenario.fbs_config() else {
        return Err(Error::InvalidConfig(
            "optimize requires a scenario with mode.kind = \"controlled\"".into(),
        ));
    };
    let result = scenario.optimize().expect("controlled mode")?;
    let lower = vec![cfg.bounds.lower_controls(); cfg.grid.len()];
    let baseline = simulate(
        &scenario.params,
        &scenario.x0,
        &cfg.grid,
        Dynamics::Controlled(&lower),
    )?
    .with_controls(lower)?;
    let j_baseline = objective(&baseline, &cfg.weights)?;

    let mut traj = result.trajectory.clone();
    if !args.adjoints {
        traj.adjoints = None;
    }
    let out = args.out_dir();
    prepare_out(&out)?;
    write_trajectory_csv(&traj, &out.join("optimal.csv"))?;
    let report = json!({
        "label": scenario.label,
        "converged": result.converged,
        "iterations": result.iterations,
        "J": result.objective(),
        "J_baseline": j_baseline,
        "objective_history": result.objective_history,
        "metrics": {
            "cumulative_i": traj.cumulative_infected(),
            "cumulative_i_baseline": baseline.cumulative_infected(),
            "peak_i": traj.peak_infected(),
            "peak_i_baseline": baseline.peak_infected(),
            "final_r": traj.final_state().r,
            "final_r_baseline": baseline.final_state().r,
        },
    });
    write_json(&out.join("fbs.json"), &report)?;
    eprintln!(
        "{} after {} iterations: J = {:.6e} (lower-bound controls: {:.6e})",
        if result.converged {
            "converged"
        } else {
            "NOT converged"
        },
        result.iterations,
        result.objective(),
        j_baseline
    );
    if args.svg {
        let t = traj.times();
        let controls = traj.controls.as_deref().unwrap_or_default();
        let series: Vec<Series> = (0..3)
            .map(|k| {
                let u: Vec<f64> = controls.iter().map(|c| c.to_array()[k]).collect();
                Series::from_columns(format!("u{}", k + 1), &t, &u)
            })
            .collect();
        emit_chart_svg(
            &series,
            &out.join("controls.svg"),
            &format!("{}: optimal controls", scenario.label),
        )?;
        emit_chart_svg(
            &[
                Series::from_columns("I (optimal)", &t, &traj.infected()),
                Series::from_columns("I (lower-bound controls)", &t, &baseline.infected()),
            ],
            &out.join("infected.svg"),
            &format!("{}: infected with and without control", scenario.label),
        )?;
    }
    Ok(0)
}

fn run_sweep_cmd(args: &Common) -> Result<u8, Error> {
    let text = fs::read_to_string(&args.file).map_err(|source| Error::Io {
        path: args.file.clone(),
        source,
    })?;
    let dir = args.file.parent().unwrap_or(Path::new("."));
    let mut spec = load_sweep_spec_with_overrides(&text, dir, &args.overrides)?;
    if let Some(out) = &args.out {
        spec.outputs = out.clone();
    }
    let summary = run_sweep(&spec)?;
    for cell in &summary.cells {
        let values: Vec<String> = summary
            .params
            .iter()
            .zip(&cell.values)
            .map(|(p, v)| format!("{p}={v}"))
            .collect();
        match &cell.error {
            None => eprintln!(
                "{}  {}  R0t={}  peak I={:.6e}",
                cell_file_name(cell.cell),
                values.join(" "),
                cell.r0_treatment.map_or("-".into(), |r| format!("{r:.6}")),
                cell.peak_i.unwrap_or(f64::NAN)
            ),
            Some(e) => eprintln!("cell {:03}  {}  FAILED: {e}", cell.cell, values.join(" ")),
        }
    }
    Ok(if summary.failed() > 0 {
        EXIT_CELL_FAILED
    } else {
        0
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Analyze(a) => run_analyze(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Optimize(a) => run_optimize(a),
        Command::Sweep(a) => run_sweep_cmd(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
