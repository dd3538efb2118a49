//! The four subcommands. Each writes its artifacts and returns its summary.

use std::fmt::Write as _;
use std::path::Path;

use mosquito_release::dynamics::{control_csv, trajectory_csv, BoundsReport, TimeGrid};
use mosquito_release::equilibria::{
    check_assumptions, sit_equilibria, wol_equilibria, AssumptionReport, EquilibriumFlag,
    ScenarioBounds,
};
use mosquito_release::optimizer::{
    bang_bang_fraction, solve, tail_zero_time, PmpReport, Problem, StartLog,
};
use mosquito_release::params::ParamWarning;
use mosquito_release::stability::classify_all;
use mosquito_release::{simulate as integrate, verify_bounds, ControlGrid, Model};
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::plot;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Versions {
    pub mosqrel: &'static str,
    #[serde(rename = "mosquito-release")]
    pub solver: &'static str,
}

const VERSIONS: Versions = Versions {
    mosqrel: env!("CARGO_PKG_VERSION"),
    solver: mosquito_release::VERSION,
};

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub version: Versions,
    pub command: &'static str,
    pub config: ScenarioConfig,
    pub seed: u64,
    pub cost: f64,
    pub budget_used: f64,
    pub budget_ratio: f64,
    pub within_budget: bool,
    pub tail_zero_time: f64,
    pub bang_bang_fraction: f64,
    pub release_centroid: Option<f64>,
    pub bounds: BoundsReport,
    pub assumption_report: AssumptionReport,
    pub param_warnings: Vec<ParamWarning>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizationSummary {
    pub version: Versions,
    pub command: &'static str,
    pub config: ScenarioConfig,
    pub seed: u64,
    pub cost: f64,
    pub budget_used: f64,
    pub budget_ratio: f64,
    pub tail_zero_time: f64,
    pub bang_bang_fraction: f64,
    pub iterations: usize,
    pub per_start_costs: Vec<f64>,
    pub assumption_report: AssumptionReport,
    pub converged: bool,
    pub stationarity: f64,
    pub best_start: usize,
    pub starts: Vec<StartLog>,
    pub release_centroid: Option<f64>,
    pub pmp: PmpReport,
    pub bounds: BoundsReport,
    pub param_warnings: Vec<ParamWarning>,
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| CliError::Io { path, source })
}

fn prepare(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summary types serialize");
    s.push('\n');
    s
}

fn warnings(model: &Model) -> Result<Vec<ParamWarning>, CliError> {
    let w = match model {
        Model::Sit(p) => p.validate()?,
        Model::Wolbachia(p) => p.validate()?,
    };
    for x in &w {
        log::warn!(
            "{} = {} outside the field interval [{}, {}]",
            x.name,
            x.value,
            x.low,
            x.high
        );
    }
    Ok(w)
}

fn scenario(config: &ScenarioConfig) -> ScenarioBounds {
    ScenarioBounds {
        horizon: config.horizon,
        budget: config.budget,
        ubar: config.ubar,
    }
}

/// Archived form of the config; the output location is not part of a scenario.
fn archived(config: &ScenarioConfig) -> Result<ScenarioConfig, CliError> {
    let mut c = config.resolved()?;
    c.output_dir = None;
    Ok(c)
}

/// Reads the `u` column of a `t,u` file.
pub fn read_control_csv(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == "t,u" => {}
        other => {
            return Err(CliError::Config(format!(
                "{}: expected header `t,u`, found {:?}",
                path.display(),
                other
            )))
        }
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let field = line.split(',').nth(1).map(str::trim);
            field.and_then(|f| f.parse::<f64>().ok()).ok_or_else(|| {
                CliError::Config(format!("{}: bad row {}: `{line}`", path.display(), i + 2))
            })
        })
        .collect()
}

fn control_values(config: &ScenarioConfig, grid: &TimeGrid) -> Result<Vec<f64>, CliError> {
    let n = grid.intervals();
    let values = match &config.control {
        None => vec![0.0; n],
        Some(c) => {
            if let Some(u) = c.constant {
                vec![u; n]
            } else if let Some(s) = &c.schedule {
                s.clone()
            } else if let Some(path) = &c.csv {
                read_control_csv(path)?
            } else {
                unreachable!("config check enforces one control source")
            }
        }
    };
    if values.len() != n {
        return Err(CliError::Config(format!(
            "control has {} values but the mesh has {n} intervals",
            values.len()
        )));
    }
    if let Some((k, u)) = values
        .iter()
        .enumerate()
        .find(|(_, u)| !(u.is_finite() && **u >= 0.0 && **u <= config.ubar))
    {
        return Err(CliError::Config(format!(
            "control value u[{k}] = {u} outside [0, {}]",
            config.ubar
        )));
    }
    Ok(values)
}

/// Integrates the configured schedule and writes trajectory, bounds and plot.
///
/// The rate cap is enforced; the budget is only reported (`within_budget`).
pub fn simulate(
    config: &ScenarioConfig,
    out: &Path,
    strict: bool,
) -> Result<SimulationSummary, CliError> {
    let model = config.model()?;
    let param_warnings = warnings(&model)?;
    let grid = TimeGrid::new(config.horizon, config.intervals())?;
    let values = control_values(config, &grid)?;
    let problem = Problem::new(model, grid, config.ubar, config.budget)?;
    let total: f64 = values.iter().sum::<f64>() * grid.dt();
    let control = ControlGrid::new(grid, values, config.ubar, config.budget.max(total))?;
    let traj = integrate(&model, &problem.init, &control)?;
    let bounds = verify_bounds(&traj, &model);
    let names = model.state_names();

    prepare(out)?;
    write(out, "trajectory.csv", &trajectory_csv(&traj, names))?;
    write(out, "trajectory.dat", &plot::gnuplot_data(&traj, names))?;
    write(out, "control.csv", &control_csv(&control))?;
    write(out, "bounds.json", &to_json(&bounds))?;
    write(
        out,
        "trajectory.svg",
        &plot::svg(&plot::trajectory_panels(&traj, names)),
    )?;

    let summary = SimulationSummary {
        version: VERSIONS,
        command: "simulate",
        config: archived(config)?,
        seed: config.solve_options().seed,
        cost: problem.cost.value(traj.terminal()),
        budget_used: total,
        budget_ratio: if config.budget > 0.0 {
            total / config.budget
        } else {
            0.0
        },
        within_budget: total <= config.budget * (1.0 + mosquito_release::control::BUDGET_SLACK),
        tail_zero_time: tail_zero_time(&control),
        bang_bang_fraction: bang_bang_fraction(&control),
        release_centroid: control.release_centroid(),
        bounds,
        assumption_report: check_assumptions(&model, Some(&scenario(config))),
        param_warnings,
    };
    write(out, "summary.json", &to_json(&summary))?;
    if strict && !summary.bounds.ok() {
        return Err(CliError::BoundViolations(summary.bounds.violations.len()));
    }
    Ok(summary)
}

/// Solves the release problem and writes control, trajectory, summary and plot.
pub fn optimize(config: &ScenarioConfig, out: &Path) -> Result<OptimizationSummary, CliError> {
    let model = config.model()?;
    let param_warnings = warnings(&model)?;
    let grid = TimeGrid::new(config.horizon, config.intervals())?;
    let problem = Problem::new(model, grid, config.ubar, config.budget)?;
    let assumption_report = check_assumptions(&model, Some(&scenario(config)));
    for f in assumption_report.failures() {
        log::warn!("assumption `{}` fails: {}", f.name, f.statement);
    }
    let opts = config.solve_options();
    let sol = solve(&problem, &opts)?;
    let bounds = verify_bounds(&sol.trajectory, &model);
    let names = model.state_names();

    prepare(out)?;
    write(out, "control.csv", &control_csv(&sol.control))?;
    write(
        out,
        "trajectory.csv",
        &trajectory_csv(&sol.trajectory, names),
    )?;
    write(
        out,
        "trajectory.dat",
        &plot::gnuplot_data(&sol.trajectory, names),
    )?;
    write(out, "bounds.json", &to_json(&bounds))?;
    write(
        out,
        "optimum.svg",
        &plot::svg(&plot::optimum_panels(&sol.trajectory, names)),
    )?;

    let d = &sol.diagnostics;
    let summary = OptimizationSummary {
        version: VERSIONS,
        command: "optimize",
        config: archived(config)?,
        seed: opts.seed,
        cost: sol.cost,
        budget_used: d.budget_used,
        budget_ratio: d.budget_ratio,
        tail_zero_time: d.tail_zero_time,
        bang_bang_fraction: d.bang_bang_fraction,
        iterations: sol.iterations,
        per_start_costs: sol.per_start_costs(),
        assumption_report,
        converged: sol.converged(),
        stationarity: sol.stationarity,
        best_start: sol.best_start,
        starts: sol.starts.clone(),
        release_centroid: d.release_centroid,
        pmp: d.clone(),
        bounds,
        param_warnings,
    };
    write(out, "summary.json", &to_json(&summary))?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumView {
    pub label: String,
    pub state: Vec<(String, f64)>,
    pub residual: f64,
    pub residual_ok: bool,
    /// (re, im) pairs, descending real part.
    pub eigenvalues: Vec<(f64, f64)>,
    pub stability: String,
    pub flags: Vec<EquilibriumFlag>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumReport {
    pub model: String,
    #[serde(rename = "K")]
    pub k: f64,
    pub equilibria: Vec<EquilibriumView>,
    pub assumption_report: AssumptionReport,
}

pub fn equilibrium_report(config: &ScenarioConfig) -> Result<EquilibriumReport, CliError> {
    let model = config.model()?;
    warnings(&model)?;
    let raw = match &model {
        Model::Sit(p) => sit_equilibria(p),
        Model::Wolbachia(p) => wol_equilibria(p),
    };
    let names = model.state_names();
    let equilibria = classify_all(&raw, &model)?
        .into_iter()
        .map(|e| EquilibriumView {
            label: e.label.to_string(),
            state: names
                .iter()
                .map(|n| n.to_string())
                .zip(e.state.iter().copied())
                .collect(),
            residual: e.residual,
            residual_ok: e.residual_ok(),
            eigenvalues: e.eigenvalues.iter().map(|z| (z.re, z.im)).collect(),
            stability: format!("{:?}", e.stability).to_lowercase(),
            flags: e.flags.clone(),
            notes: e.notes.clone(),
        })
        .collect();
    Ok(EquilibriumReport {
        model: model.kind().to_string(),
        k: model.capacity(),
        equilibria,
        assumption_report: check_assumptions(&model, Some(&scenario(config))),
    })
}

fn assumption_text(out: &mut String, report: &AssumptionReport) {
    let _ = writeln!(out, "assumptions:");
    for c in &report.checks {
        let _ = writeln!(
            out,
            "  [{}] {:<18} {}  ({:.6e} vs {:.6e})",
            if c.holds { "ok" } else { "FAIL" },
            c.name,
            c.statement,
            c.lhs,
            c.rhs
        );
    }
}

/// Equilibria with residuals, eigenvalues and stability, as text or JSON.
pub fn equilibria(config: &ScenarioConfig, json: bool) -> Result<String, CliError> {
    let report = equilibrium_report(config)?;
    if json {
        return Ok(to_json(&report));
    }
    let mut out = String::new();
    let _ = writeln!(out, "model {}  K = {:.6}", report.model, report.k);
    for e in &report.equilibria {
        let state: Vec<String> = e.state.iter().map(|(n, v)| format!("{n}={v:.6}")).collect();
        let _ = writeln!(out, "{}: {}", e.label, state.join(" "));
        let _ = writeln!(
            out,
            "  residual {:.3e} ({})  stability {}",
            e.residual,
            if e.residual_ok { "ok" } else { "mismatch" },
            e.stability
        );
        if !e.eigenvalues.is_empty() {
            let eigs: Vec<String> = e
                .eigenvalues
                .iter()
                .map(|(re, im)| {
                    if *im == 0.0 {
                        format!("{re:.6}")
                    } else {
                        format!("{re:.6}{im:+.6}i")
                    }
                })
                .collect();
            let _ = writeln!(out, "  eigenvalues {}", eigs.join(", "));
        }
        if !e.flags.is_empty() {
            let _ = writeln!(out, "  flags {:?}", e.flags);
        }
        for n in &e.notes {
            let _ = writeln!(out, "  note: {n}");
        }
    }
    assumption_text(&mut out, &report.assumption_report);
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub assumption_report: AssumptionReport,
    pub param_warnings: Vec<ParamWarning>,
}

/// Assumption report and parameter-interval warnings only.
pub fn check(config: &ScenarioConfig, json: bool) -> Result<String, CliError> {
    let model = config.model()?;
    let report = CheckReport {
        param_warnings: warnings(&model)?,
        assumption_report: check_assumptions(&model, Some(&scenario(config))),
    };
    if json {
        return Ok(to_json(&report));
    }
    let mut out = String::new();
    assumption_text(&mut out, &report.assumption_report);
    for w in &report.param_warnings {
        let _ = writeln!(
            out,
            "warning: {} = {} outside [{}, {}]",
            w.name, w.value, w.low, w.high
        );
    }
    Ok(out)
}
