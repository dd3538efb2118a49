//! Piecewise-constant release schedules, projection onto the admissible set
//! {0 ≤ u ≤ Ū, ∫u ≤ C}, and the terminal cost functionals.

use serde::{Deserialize, Serialize};

use crate::dynamics::{TimeGrid, Trajectory};
use crate::equilibria::wol_invasion_state;
use crate::error::{Error, Result};
use crate::linalg::StateVec;
use crate::params::WolParams;

/// Relative slack allowed on the budget constraint.
pub const BUDGET_SLACK: f64 = 1e-9;

/// A release rate held constant on each interval `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlGrid {
    grid: TimeGrid,
    values: Vec<f64>,
    ubar: f64,
    budget: f64,
}

fn check_constraints(ubar: f64, budget: f64) -> Result<()> {
    if !(ubar.is_finite() && ubar >= 0.0) {
        return Err(Error::InvalidConstraint(format!(
            "rate cap Ubar = {ubar} must be >= 0"
        )));
    }
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(Error::InvalidConstraint(format!(
            "budget C = {budget} must be >= 0"
        )));
    }
    Ok(())
}

impl ControlGrid {
    /// Wraps already admissible values; fails if any invariant is violated.
    pub fn new(grid: TimeGrid, values: Vec<f64>, ubar: f64, budget: f64) -> Result<Self> {
        check_constraints(ubar, budget)?;
        if values.len() != grid.intervals() {
            return Err(Error::InvalidConstraint(format!(
                "{} control values for {} intervals",
                values.len(),
                grid.intervals()
            )));
        }
        if let Some((k, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0 && **v <= ubar))
        {
            return Err(Error::InvalidConstraint(format!(
                "u[{k}] = {v} outside [0, {ubar}]"
            )));
        }
        let total: f64 = values.iter().sum::<f64>() * grid.dt();
        if total > budget + BUDGET_SLACK * budget.max(1.0) {
            return Err(Error::InvalidConstraint(format!(
                "total release {total} exceeds budget {budget}"
            )));
        }
        Ok(ControlGrid {
            grid,
            values,
            ubar,
            budget,
        })
    }

    /// The Euclidean projection of `raw` onto the admissible set.
    pub fn project(grid: TimeGrid, raw: &[f64], ubar: f64, budget: f64) -> Result<Self> {
        if raw.len() != grid.intervals() {
            return Err(Error::InvalidConstraint(format!(
                "{} raw values for {} intervals",
                raw.len(),
                grid.intervals()
            )));
        }
        let proj = project_admissible(raw, ubar, budget, grid.dt())?;
        Ok(ControlGrid {
            grid,
            values: proj.values,
            ubar,
            budget,
        })
    }

    pub fn zeros(grid: TimeGrid, ubar: f64, budget: f64) -> Result<Self> {
        let n = grid.intervals();
        ControlGrid::new(grid, vec![0.0; n], ubar, budget)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn ubar(&self) -> f64 {
        self.ubar
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// Release rate in force at time `t` (right-continuous, last value held at T).
    pub fn rate_at(&self, t: f64) -> f64 {
        let k = ((t / self.grid.dt()).floor().max(0.0) as usize).min(self.values.len() - 1);
        self.values[k]
    }

    /// Time centroid of the released mass, `∫ t u / ∫ u`; `None` when nothing is released.
    pub fn release_centroid(&self) -> Option<f64> {
        let mass: f64 = self.values.iter().sum();
        if mass <= 0.0 {
            return None;
        }
        let moment: f64 = self
            .values
            .iter()
            .enumerate()
            .map(|(k, u)| self.grid.midpoint(k) * u)
            .sum();
        Some(moment / mass)
    }
}

/// Result of [`project_admissible`].
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub values: Vec<f64>,
    /// Uniform downward shift λ ≥ 0 applied before clipping; 0 when the budget is slack.
    pub shift: f64,
}

fn clipped_mass(v: &[f64], shift: f64, ubar: f64) -> f64 {
    v.iter().map(|x| (x - shift).clamp(0.0, ubar)).sum()
}

/// argmin ‖u − v‖₂ subject to 0 ≤ u_k ≤ Ū and Σ u_k dt ≤ C.
///
/// Clips to the box; if that overspends the budget, bisects for the shift λ
/// with Σ clip(v_k − λ, 0, Ū) dt = C, then solves the linear piece that
/// contains λ exactly.
pub fn project_admissible(v: &[f64], ubar: f64, budget: f64, dt: f64) -> Result<Projection> {
    check_constraints(ubar, budget)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidGrid(format!("dt = {dt} must be > 0")));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidConstraint(format!(
            "non-finite control value {x}"
        )));
    }
    // work in units of mass per dt
    let target = budget / dt;
    if clipped_mass(v, 0.0, ubar) <= target {
        return Ok(Projection {
            values: v.iter().map(|x| x.clamp(0.0, ubar)).collect(),
            shift: 0.0,
        });
    }
    if budget == 0.0 {
        let hi = v.iter().cloned().fold(0.0, f64::max);
        return Ok(Projection {
            values: vec![0.0; v.len()],
            shift: hi,
        });
    }
    let mut lo = 0.0;
    let mut hi = v.iter().cloned().fold(0.0, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let m = clipped_mass(v, mid, ubar);
        if (m - target).abs() < 1e-12 * target {
            lo = mid;
            hi = mid;
            break;
        }
        if m > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // exact solve on the linear piece around the bracket
    let mut shift = 0.5 * (lo + hi);
    let (mut capped, mut free_sum, mut free_n) = (0usize, 0.0, 0usize);
    for &x in v {
        let y = x - shift;
        if y >= ubar {
            capped += 1;
        } else if y > 0.0 {
            free_sum += x;
            free_n += 1;
        }
    }
    if free_n > 0 {
        let exact = (free_sum + capped as f64 * ubar - target) / free_n as f64;
        let consistent = v.iter().all(|&x| {
            let before = x - shift;
            let after = x - exact;
            (before >= ubar) == (after >= ubar) && (before > 0.0) == (after > 0.0)
        });
        if consistent && exact >= 0.0 {
            shift = exact;
        }
    }
    let values: Vec<f64> = v.iter().map(|x| (x - shift).clamp(0.0, ubar)).collect();
    Ok(Projection { values, shift })
}

/// Total number of released individuals, Σ u_k dt.
pub fn total_release(u: &ControlGrid) -> f64 {
    u.values.iter().sum::<f64>() * u.grid.dt()
}

/// Terminal cost ½(E(T)² + F(T)²) of the SIT problem.
pub fn sit_terminal_cost(x: &StateVec) -> f64 {
    0.5 * (x[0] * x[0] + x[1] * x[1])
}

pub fn cost_sit(traj: &Trajectory) -> f64 {
    sit_terminal_cost(traj.terminal())
}

/// Infected targets (Ei*, Fi*) used by the Wolbachia cost.
pub fn wol_targets(p: &WolParams) -> (f64, f64) {
    let inv = wol_invasion_state(p);
    (inv[2], inv[3])
}

/// Terminal cost ½(Eu² + Fu² + (Ei* − Ei)₊² + (Fi* − Fi)₊²) of the Wolbachia problem.
pub fn wol_terminal_cost(x: &StateVec, targets: (f64, f64)) -> f64 {
    let de = (targets.0 - x[2]).max(0.0);
    let df = (targets.1 - x[3]).max(0.0);
    0.5 * (x[0] * x[0] + x[1] * x[1] + de * de + df * df)
}

pub fn cost_wol(traj: &Trajectory, p: &WolParams) -> f64 {
    wol_terminal_cost(traj.terminal(), wol_targets(p))
}
