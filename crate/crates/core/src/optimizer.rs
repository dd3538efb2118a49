//! Projected-gradient solution of the release problems and first-order
//! optimality diagnostics.
//!
//! Each start runs u ← P(u − α∇J) with Armijo backtracking along the
//! projection arc, where P is [`project_admissible`]. Starts are independent
//! and run in parallel; the best cost wins, lowest start index on ties.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adjoint::{continuous_costate, discrete_gradient, Evaluation};
use crate::control::{
    project_admissible, sit_terminal_cost, total_release, wol_targets, wol_terminal_cost,
    ControlGrid,
};
use crate::dynamics::{simulate, TimeGrid, Trajectory};
use crate::equilibria::{sit_equilibria, wol_free_state};
use crate::error::{Error, Result};
use crate::linalg::StateVec;
use crate::model::Model;
use crate::params::{SitParams, WolParams};

/// Armijo sufficient-decrease constant.
pub const ARMIJO_C1: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Terminal penalty Φ(x(T)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TerminalCost {
    /// ½(E² + F²)
    Sit,
    /// ½(Eu² + Fu² + (Ei* − Ei)₊² + (Fi* − Fi)₊²)
    Wolbachia {
        target_eggs: f64,
        target_females: f64,
    },
}

impl TerminalCost {
    pub fn value(&self, x: &StateVec) -> f64 {
        match *self {
            TerminalCost::Sit => sit_terminal_cost(x),
            TerminalCost::Wolbachia {
                target_eggs,
                target_females,
            } => wol_terminal_cost(x, (target_eggs, target_females)),
        }
    }

    /// ∇Φ(x)
    pub fn gradient(&self, x: &StateVec) -> StateVec {
        match *self {
            TerminalCost::Sit => StateVec::from_slice(&[x[0], x[1], 0.0]),
            TerminalCost::Wolbachia {
                target_eggs,
                target_females,
            } => StateVec::from_slice(&[
                x[0],
                x[1],
                -(target_eggs - x[2]).max(0.0),
                -(target_females - x[3]).max(0.0),
            ]),
        }
    }
}

/// A release problem: model, initial equilibrium, mesh and constraint levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Problem {
    pub model: Model,
    pub init: StateVec,
    pub grid: TimeGrid,
    pub ubar: f64,
    pub budget: f64,
    pub cost: TerminalCost,
}

fn check_levels(ubar: f64, budget: f64) -> Result<()> {
    if !(ubar.is_finite() && ubar >= 0.0 && budget.is_finite() && budget >= 0.0) {
        return Err(Error::InvalidConstraint(format!(
            "need finite Ubar >= 0 and C >= 0, got Ubar = {ubar}, C = {budget}"
        )));
    }
    Ok(())
}

impl Problem {
    /// SIT problem started at the non-extinction equilibrium.
    pub fn sit(p: SitParams, grid: TimeGrid, ubar: f64, budget: f64) -> Result<Self> {
        p.validate()?;
        check_levels(ubar, budget)?;
        let init = sit_equilibria(&p)[1].state;
        Ok(Problem {
            model: Model::Sit(p),
            init,
            grid,
            ubar,
            budget,
            cost: TerminalCost::Sit,
        })
    }

    /// Wolbachia problem started at the Wolbachia-free equilibrium.
    pub fn wolbachia(p: WolParams, grid: TimeGrid, ubar: f64, budget: f64) -> Result<Self> {
        p.validate()?;
        check_levels(ubar, budget)?;
        let (target_eggs, target_females) = wol_targets(&p);
        Ok(Problem {
            model: Model::Wolbachia(p),
            init: wol_free_state(&p),
            grid,
            ubar,
            budget,
            cost: TerminalCost::Wolbachia {
                target_eggs,
                target_females,
            },
        })
    }

    pub fn new(model: Model, grid: TimeGrid, ubar: f64, budget: f64) -> Result<Self> {
        match model {
            Model::Sit(p) => Problem::sit(p, grid, ubar, budget),
            Model::Wolbachia(p) => Problem::wolbachia(p, grid, ubar, budget),
        }
    }

    pub fn project(&self, raw: &[f64]) -> Result<Vec<f64>> {
        Ok(project_admissible(raw, self.ubar, self.budget, self.grid.dt())?.values)
    }

    /// Discretized cost of a control.
    pub fn cost_of(&self, values: &[f64]) -> Result<f64> {
        let model = self.model;
        let states = crate::dynamics::integrate_states(
            &|x: &StateVec, u: f64| model.rhs(x, u),
            &self.init,
            values,
            &self.grid,
        )?;
        Ok(self.cost.value(states.last().expect("non-empty")))
    }

    pub fn evaluate(&self, values: &[f64]) -> Result<Evaluation> {
        discrete_gradient(self, values)
    }

    pub fn control(&self, values: Vec<f64>) -> Result<ControlGrid> {
        ControlGrid::new(self.grid, values, self.ubar, self.budget)
    }

    pub fn simulate(&self, control: &ControlGrid) -> Result<Trajectory> {
        simulate(&self.model, &self.init, control)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Stationarity tolerance relative to Ū.
    pub tol: f64,
    pub starts: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iter: 2000,
            tol: 1e-6,
            starts: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    Zero,
    FrontLoaded,
    BackLoaded,
    Random,
}

impl StartKind {
    pub fn for_index(i: usize) -> Self {
        match i {
            0 => StartKind::Zero,
            1 => StartKind::FrontLoaded,
            2 => StartKind::BackLoaded,
            _ => StartKind::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Stationary,
    MaxIterations,
    LineSearchStalled,
}

/// Outcome of one start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartLog {
    pub index: usize,
    pub kind: StartKind,
    pub initial_cost: f64,
    pub cost: f64,
    pub iterations: usize,
    pub stationarity: f64,
    pub stop: StopReason,
    /// Cost after every accepted step, starting with the initial cost.
    #[serde(skip)]
    pub cost_history: Vec<f64>,
}

/// Initial admissible control for start `index`.
pub fn initial_control(problem: &Problem, index: usize, seed: u64) -> Result<Vec<f64>> {
    let n = problem.grid.intervals();
    let dt = problem.grid.dt();
    let fill = |order: &mut dyn Iterator<Item = usize>| {
        let mut v = vec![0.0; n];
        let mut left = problem.budget;
        for k in order {
            if left <= 0.0 {
                break;
            }
            let amount = problem.ubar.min(left / dt);
            v[k] = amount;
            left -= amount * dt;
        }
        v
    };
    let raw = match StartKind::for_index(index) {
        StartKind::Zero => vec![0.0; n],
        StartKind::FrontLoaded => fill(&mut (0..n)),
        StartKind::BackLoaded => fill(&mut (0..n).rev()),
        StartKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64));
            (0..n).map(|_| rng.gen::<f64>() * problem.ubar).collect()
        }
    };
    problem.project(&raw)
}

/// ‖u − P(u − g)‖∞
pub fn stationarity(problem: &Problem, values: &[f64], gradient: &[f64]) -> Result<f64> {
    let trial: Vec<f64> = values.iter().zip(gradient).map(|(u, g)| u - g).collect();
    let proj = problem.project(&trial)?;
    Ok(values
        .iter()
        .zip(&proj)
        .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Final iterate of one start.
#[derive(Debug, Clone)]
pub struct Descent {
    pub values: Vec<f64>,
    pub evaluation: Evaluation,
    pub iterations: usize,
    pub stop: StopReason,
    pub cost_history: Vec<f64>,
}

/// Projected gradient descent from one start.
pub fn descend(problem: &Problem, start: Vec<f64>, opts: &SolveOptions) -> Result<Descent> {
    let mut u = start;
    let mut ev = problem.evaluate(&u)?;
    let mut history = vec![ev.cost];
    let threshold = opts.tol * problem.ubar;
    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;
    for _ in 0..opts.max_iter {
        if stationarity(problem, &u, &ev.gradient)? < threshold || problem.ubar == 0.0 {
            stop = StopReason::Stationary;
            break;
        }
        let mut alpha = problem.ubar / inf_norm(&ev.gradient).max(1.0);
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = u
                .iter()
                .zip(&ev.gradient)
                .map(|(x, g)| x - alpha * g)
                .collect();
            let candidate = problem.project(&trial)?;
            let decrease: f64 = ev
                .gradient
                .iter()
                .zip(candidate.iter().zip(&u))
                .map(|(g, (c, x))| g * (c - x))
                .sum();
            if let Ok(cost) = problem.cost_of(&candidate) {
                if cost <= ev.cost + ARMIJO_C1 * decrease {
                    accepted = Some(candidate);
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some(candidate) => {
                u = candidate;
                ev = problem.evaluate(&u)?;
                history.push(ev.cost);
                iterations += 1;
            }
            None => {
                stop = StopReason::LineSearchStalled;
                break;
            }
        }
    }
    Ok(Descent {
        values: u,
        evaluation: ev,
        iterations,
        stop,
        cost_history: history,
    })
}

/// First-order optimality and structure diagnostics of a computed schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmpReport {
    pub budget_used: f64,
    pub budget_ratio: f64,
    /// Time after which the release stays below 1e-6·Ū.
    pub tail_zero_time: f64,
    /// Share of intervals with u within 1e-3·Ū of 0 or Ū.
    pub bang_bang_fraction: f64,
    /// Budget multiplier estimated as the projection shift of u − ∇J/dt.
    pub lambda_estimate: f64,
    /// Sign violations of p_u + λ (λ ≥ 0 convention).
    pub violations_lambda_nonneg: SignViolations,
    /// Sign violations of p_u − λ (λ ≤ 0 convention).
    pub violations_lambda_nonpos: SignViolations,
    /// |p(T) − ∇Φ(x(T))| per component.
    pub transversality_residuals: Vec<f64>,
    /// Control-channel costate at T.
    pub control_costate_terminal: f64,
    /// |λ (y(T) − C)|
    pub complementarity_residual: f64,
    /// max_k |∇J_k/dt − mean of p_u on interval k|, relative to max |p_u|.
    pub adjoint_gap: f64,
    pub release_centroid: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SignViolations {
    /// Intervals with u = 0 where the switching function is negative.
    pub at_zero: usize,
    /// Intervals with u = Ū where the switching function is positive.
    pub at_cap: usize,
}

impl SignViolations {
    pub fn total(&self) -> usize {
        self.at_zero + self.at_cap
    }
}

pub fn tail_zero_time(control: &ControlGrid) -> f64 {
    let cut = 1e-6 * control.ubar();
    match control.values().iter().rposition(|&u| u >= cut && u > 0.0) {
        Some(k) => control.grid().node(k + 1),
        None => 0.0,
    }
}

pub fn bang_bang_fraction(control: &ControlGrid) -> f64 {
    let ubar = control.ubar();
    let band = 1e-3 * ubar;
    let n = control.values().len();
    let hits = control
        .values()
        .iter()
        .filter(|&&u| u <= band || u >= ubar - band)
        .count();
    hits as f64 / n as f64
}

/// Computed optimum together with its provenance and diagnostics.
#[derive(Debug, Clone)]
pub struct OptimalSolution {
    pub problem: Problem,
    pub control: ControlGrid,
    pub trajectory: Trajectory,
    pub cost: f64,
    pub gradient: Vec<f64>,
    /// ‖u − P(u − ∇J)‖∞
    pub stationarity: f64,
    pub iterations: usize,
    pub best_start: usize,
    pub starts: Vec<StartLog>,
    pub seed: u64,
    pub diagnostics: PmpReport,
}

impl OptimalSolution {
    pub fn per_start_costs(&self) -> Vec<f64> {
        self.starts.iter().map(|s| s.cost).collect()
    }

    pub fn converged(&self) -> bool {
        self.starts[self.best_start].stop == StopReason::Stationary
    }
}

/// Backward costate sweep along the solution and the resulting diagnostics.
pub fn pmp_diagnostics(sol: &OptimalSolution) -> PmpReport {
    let problem = &sol.problem;
    let control = &sol.control;
    let values = control.values();
    let grid = problem.grid;
    let dt = grid.dt();
    let n = values.len();
    let c = problem.model.control_channel();
    let ubar = problem.ubar;

    let costate = continuous_costate(problem, values, &sol.trajectory.states);
    let switching: Vec<f64> = (0..n)
        .map(|k| 0.5 * (costate[k][c] + costate[k + 1][c]))
        .collect();
    let scale = inf_norm(&switching).max(f64::MIN_POSITIVE);

    let scaled_grad: Vec<f64> = sol.gradient.iter().map(|g| g / dt).collect();
    let shifted: Vec<f64> = values
        .iter()
        .zip(&scaled_grad)
        .map(|(u, g)| u - g)
        .collect();
    let lambda = project_admissible(&shifted, ubar, problem.budget, dt)
        .map(|p| p.shift)
        .unwrap_or(0.0);

    let tol = 1e-6 * scale;
    let band = 1e-3 * ubar;
    let count = |sign: f64| {
        let mut v = SignViolations::default();
        for (k, &u) in values.iter().enumerate() {
            let sigma = switching[k] + sign * lambda;
            if u <= band && sigma < -tol {
                v.at_zero += 1;
            } else if u >= ubar - band && sigma > tol {
                v.at_cap += 1;
            }
        }
        v
    };
    let violations_lambda_nonneg = count(1.0);
    let violations_lambda_nonpos = count(-1.0);

    let terminal = sol.trajectory.terminal();
    let expected = problem.cost.gradient(terminal);
    let transversality_residuals: Vec<f64> = costate[n]
        .iter()
        .zip(expected.iter())
        .map(|(a, b)| (a - b).abs())
        .collect();

    let used = total_release(control);
    let budget_ratio = if problem.budget > 0.0 {
        used / problem.budget
    } else {
        0.0
    };
    let adjoint_gap = scaled_grad
        .iter()
        .zip(&switching)
        .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()))
        / scale;

    PmpReport {
        budget_used: used,
        budget_ratio,
        tail_zero_time: tail_zero_time(control),
        bang_bang_fraction: bang_bang_fraction(control),
        lambda_estimate: lambda,
        violations_lambda_nonneg,
        violations_lambda_nonpos,
        transversality_residuals,
        control_costate_terminal: costate[n][c],
        complementarity_residual: (lambda * (used - problem.budget)).abs(),
        adjoint_gap,
        release_centroid: control.release_centroid(),
    }
}

/// Multi-start projected-gradient solve. Deterministic for a given seed.
pub fn solve(problem: &Problem, opts: &SolveOptions) -> Result<OptimalSolution> {
    let starts = opts.starts.max(1);
    type Run = std::result::Result<(StartLog, Vec<f64>, Evaluation), String>;
    let runs: Vec<Run> = (0..starts)
        .into_par_iter()
        .map(|i| {
            let kind = StartKind::for_index(i);
            let run = || -> Result<(StartLog, Vec<f64>, Evaluation)> {
                let u0 = initial_control(problem, i, opts.seed)?;
                let d = descend(problem, u0, opts)?;
                let stat = stationarity(problem, &d.values, &d.evaluation.gradient)?;
                let log = StartLog {
                    index: i,
                    kind,
                    initial_cost: d.cost_history[0],
                    cost: d.evaluation.cost,
                    iterations: d.iterations,
                    stationarity: stat,
                    stop: d.stop,
                    cost_history: d.cost_history,
                };
                Ok((log, d.values, d.evaluation))
            };
            run().map_err(|e| format!("start {i} ({kind:?}): {e}"))
        })
        .collect();

    let mut failures = Vec::new();
    let mut logs = Vec::new();
    let mut best: Option<(usize, Vec<f64>, Evaluation)> = None;
    for run in runs {
        match run {
            Ok((log, u, ev)) => {
                log::debug!(
                    "start {} ({:?}): cost {:e} after {} iterations, {:?}",
                    log.index,
                    log.kind,
                    log.cost,
                    log.iterations,
                    log.stop
                );
                let better = match &best {
                    None => true,
                    Some((_, _, b)) => ev.cost < b.cost,
                };
                if better {
                    best = Some((log.index, u, ev));
                }
                logs.push(log);
            }
            Err(msg) => {
                log::warn!("{msg}");
                failures.push(msg);
            }
        }
    }
    let (best_index, values, ev) = best.ok_or(Error::OptimizationFailure(failures))?;
    let best_start = logs.iter().position(|l| l.index == best_index).unwrap_or(0);
    let control = problem.control(values)?;
    let trajectory = problem.simulate(&control)?;
    let stationarity = logs[best_start].stationarity;
    let iterations = logs[best_start].iterations;
    let mut sol = OptimalSolution {
        problem: *problem,
        control,
        trajectory,
        cost: ev.cost,
        gradient: ev.gradient,
        stationarity,
        iterations,
        best_start,
        starts: logs,
        seed: opts.seed,
        diagnostics: PmpReport {
            budget_used: 0.0,
            budget_ratio: 0.0,
            tail_zero_time: 0.0,
            bang_bang_fraction: 0.0,
            lambda_estimate: 0.0,
            violations_lambda_nonneg: SignViolations::default(),
            violations_lambda_nonpos: SignViolations::default(),
            transversality_residuals: Vec::new(),
            control_costate_terminal: 0.0,
            complementarity_residual: 0.0,
            adjoint_gap: 0.0,
            release_centroid: None,
        },
    };
    sol.diagnostics = pmp_diagnostics(&sol);
    Ok(sol)
}
