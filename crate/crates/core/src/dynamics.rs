//! Fixed-step RK4 integration aligned with the control mesh, a-priori
//! trajectory bounds, and CSV export.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::control::ControlGrid;
use crate::equilibria::sit_equilibria;
use crate::error::{Error, Result};
use crate::linalg::StateVec;
use crate::model::{Model, ModelKind};

/// Uniform mesh on `[0, T]` with `N` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    intervals: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, intervals: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "horizon T = {horizon} must be > 0"
            )));
        }
        if intervals == 0 {
            return Err(Error::InvalidGrid("need at least one interval".into()));
        }
        Ok(TimeGrid { horizon, intervals })
    }

    /// Default resolution: max(200, 10 per day).
    pub fn with_default_resolution(horizon: f64) -> Result<Self> {
        TimeGrid::new(horizon, default_intervals(horizon))
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.intervals as f64
    }

    /// t_k for k = 0..=N.
    pub fn node(&self, k: usize) -> f64 {
        self.horizon * k as f64 / self.intervals as f64
    }

    pub fn midpoint(&self, k: usize) -> f64 {
        self.horizon * (k as f64 + 0.5) / self.intervals as f64
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.intervals).map(|k| self.node(k))
    }
}

pub fn default_intervals(horizon: f64) -> usize {
    200usize.max((10.0 * horizon).ceil() as usize)
}

/// States at every mesh node together with the control that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<StateVec>,
    pub control: ControlGrid,
    pub model: Option<ModelKind>,
}

impl Trajectory {
    pub fn grid(&self) -> &TimeGrid {
        self.control.grid()
    }

    pub fn terminal(&self) -> &StateVec {
        self.states
            .last()
            .expect("trajectory has at least one node")
    }

    pub fn initial(&self) -> &StateVec {
        &self.states[0]
    }
}

/// One classical RK4 step with the release rate frozen over the step.
#[inline]
pub fn rk4_step<F>(rhs: &F, x: &StateVec, u: f64, h: f64) -> StateVec
where
    F: Fn(&StateVec, f64) -> StateVec,
{
    let k1 = rhs(x, u);
    let k2 = rhs(&x.axpy(0.5 * h, &k1), u);
    let k3 = rhs(&x.axpy(0.5 * h, &k2), u);
    let k4 = rhs(&x.axpy(h, &k3), u);
    let mut out = *x;
    out.add_assign_scaled(h / 6.0, &k1);
    out.add_assign_scaled(h / 3.0, &k2);
    out.add_assign_scaled(h / 3.0, &k3);
    out.add_assign_scaled(h / 6.0, &k4);
    out
}

/// Integrates over `grid`, one RK4 step per control interval.
pub fn integrate_states<F>(
    rhs: &F,
    init: &StateVec,
    values: &[f64],
    grid: &TimeGrid,
) -> Result<Vec<StateVec>>
where
    F: Fn(&StateVec, f64) -> StateVec,
{
    if values.len() != grid.intervals() {
        return Err(Error::InvalidGrid(format!(
            "{} control values for {} intervals",
            values.len(),
            grid.intervals()
        )));
    }
    if !init.is_finite() {
        return Err(Error::InvalidState(format!(
            "non-finite initial state {init}"
        )));
    }
    let h = grid.dt();
    let mut states = Vec::with_capacity(values.len() + 1);
    states.push(*init);
    let mut x = *init;
    for (k, &u) in values.iter().enumerate() {
        x = rk4_step(rhs, &x, u, h);
        if !x.is_finite() {
            return Err(Error::Divergence { node: k + 1 });
        }
        states.push(x);
    }
    Ok(states)
}

/// Integrates an arbitrary right-hand side under a piecewise-constant control.
pub fn integrate<F>(rhs: F, init: &StateVec, control: &ControlGrid) -> Result<Trajectory>
where
    F: Fn(&StateVec, f64) -> StateVec,
{
    let states = integrate_states(&rhs, init, control.values(), control.grid())?;
    Ok(Trajectory {
        states,
        control: control.clone(),
        model: None,
    })
}

/// Integrates one of the two mosquito models.
pub fn simulate(model: &Model, init: &StateVec, control: &ControlGrid) -> Result<Trajectory> {
    if init.dim() != model.dim() {
        return Err(Error::InvalidState(format!(
            "initial state has {} components, model needs {}",
            init.dim(),
            model.dim()
        )));
    }
    let mut traj = integrate(|x, u| model.rhs(x, u), init, control)?;
    traj.model = Some(model.kind());
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundViolation {
    pub node: usize,
    pub t: f64,
    pub bound: String,
    pub value: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub nodes_checked: usize,
    /// Absolute slack used on every inequality.
    pub slack: f64,
    pub violations: Vec<BoundViolation>,
}

impl BoundsReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Relative slack (× K) on the a-priori bounds.
pub const BOUND_SLACK: f64 = 1e-7;
/// Relative slack (× K) on nonnegativity.
pub const POSITIVITY_SLACK: f64 = 1e-9;

/// Checks the a-priori bounds of trajectories started from the persistent equilibrium.
///
/// SIT: E₂* e^{−(τ_E+δ_E)t} ≤ E < K and
/// F₂* e^{−δ_F t} ≤ F ≤ K(νβ_F/δ_F − (τ_E+δ_E)/β_E · e^{−δ_F t}).
/// Wolbachia: every compartment nonnegative and Eu + Ei < K.
pub fn verify_bounds(traj: &Trajectory, model: &Model) -> BoundsReport {
    let k = model.capacity();
    let slack = BOUND_SLACK * k;
    let pos_slack = POSITIVITY_SLACK * k;
    let grid = traj.grid();
    let mut violations = Vec::new();
    let mut push = |node: usize, bound: &str, value: f64, limit: f64| {
        violations.push(BoundViolation {
            node,
            t: grid.node(node),
            bound: bound.to_string(),
            value,
            limit,
        });
    };
    let names = model.state_names();
    for (n, x) in traj.states.iter().enumerate() {
        for (i, &v) in x.iter().enumerate() {
            if v < -pos_slack {
                push(n, &format!("{} >= 0", names[i]), v, 0.0);
            }
        }
    }
    match model {
        Model::Sit(p) => {
            let eq = sit_equilibria(p);
            let (e2, f2) = (eq[1].state[0], eq[1].state[1]);
            let a = p.tau_e + p.delta_e;
            for (n, x) in traj.states.iter().enumerate() {
                let t = grid.node(n);
                let e_low = e2 * (-a * t).exp();
                let f_low = f2 * (-p.delta_f * t).exp();
                let f_high =
                    k * (p.nu * p.beta_f / p.delta_f - a / p.beta_e * (-p.delta_f * t).exp());
                if x[0] < e_low - slack {
                    push(n, "E >= E2* exp(-(tau_E+delta_E) t)", x[0], e_low);
                }
                if x[0] >= k + slack {
                    push(n, "E < K", x[0], k);
                }
                if x[1] < f_low - slack {
                    push(n, "F >= F2* exp(-delta_F t)", x[1], f_low);
                }
                if x[1] > f_high + slack {
                    push(
                        n,
                        "F <= K(nu beta_F/delta_F - (tau_E+delta_E)/beta_E exp(-delta_F t))",
                        x[1],
                        f_high,
                    );
                }
            }
        }
        Model::Wolbachia(_) => {
            for (n, x) in traj.states.iter().enumerate() {
                let eggs = x[0] + x[2];
                if eggs >= k + slack {
                    push(n, "Eu + Ei < K", eggs, k);
                }
            }
        }
    }
    BoundsReport {
        nodes_checked: traj.states.len(),
        slack,
        violations,
    }
}

/// Formats a value with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV with header `t,<state names>,u`, one row per node, LF line endings.
///
/// The `u` column holds the rate on `[t_k, t_{k+1})`; the last node repeats
/// the final interval's rate.
pub fn trajectory_csv(traj: &Trajectory, state_names: &[&str]) -> String {
    let grid = traj.grid();
    let values = traj.control.values();
    let mut out = String::new();
    out.push('t');
    for name in state_names {
        out.push(',');
        out.push_str(name);
    }
    out.push_str(",u\n");
    for (n, x) in traj.states.iter().enumerate() {
        out.push_str(&fmt_f64(grid.node(n)));
        for v in x.iter() {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        let u = values[n.min(values.len() - 1)];
        let _ = writeln!(out, ",{}", fmt_f64(u));
    }
    out
}

/// CSV with header `t,u`, one row per control interval (left node).
pub fn control_csv(control: &ControlGrid) -> String {
    let grid = control.grid();
    let mut out = String::from("t,u\n");
    for (k, &u) in control.values().iter().enumerate() {
        let _ = writeln!(out, "{},{}", fmt_f64(grid.node(k)), fmt_f64(u));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::SitParams;

    #[test]
    fn grid_nodes() {
        let g = TimeGrid::new(7.0, 140).unwrap();
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(140), 7.0);
        assert!((g.dt() - 0.05).abs() < 1e-16);
        assert!(TimeGrid::new(0.0, 3).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert_eq!(default_intervals(7.0), 200);
        assert_eq!(default_intervals(90.0), 900);
    }

    #[test]
    fn exponential_decay_matches_closed_form() {
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let control = ControlGrid::zeros(grid, 0.0, 0.0).unwrap();
        let decay = |x: &StateVec, u: f64| StateVec::from_slice(&[u - 0.12 * x[0]]);
        let traj = integrate(decay, &StateVec::from_slice(&[1.0]), &control).unwrap();
        assert!((traj.terminal()[0] - (-0.12f64).exp()).abs() < 1e-8);
        assert!((traj.terminal()[0] - 0.8869204).abs() < 1e-7);
    }

    #[test]
    fn divergence_reports_node() {
        let grid = TimeGrid::new(10.0, 10).unwrap();
        let control = ControlGrid::zeros(grid, 0.0, 0.0).unwrap();
        let blowup = |x: &StateVec, _u: f64| StateVec::from_slice(&[x[0] * x[0] * 1e200]);
        let err = integrate(blowup, &StateVec::from_slice(&[1e100]), &control).unwrap_err();
        assert!(matches!(err, Error::Divergence { node: 1 }));
    }

    #[test]
    fn equilibrium_is_a_fixed_point_of_the_flow() {
        let p = SitParams::default();
        let model = Model::Sit(p);
        let eq = sit_equilibria(&p)[1].state;
        let grid = TimeGrid::with_default_resolution(7.0).unwrap();
        let control = ControlGrid::zeros(grid, 1000.0, 3000.0).unwrap();
        let traj = simulate(&model, &eq, &control).unwrap();
        for x in &traj.states {
            assert!(x.max_abs_diff(&eq) <= 1e-8 * eq.norm_inf());
        }
        let report = verify_bounds(&traj, &model);
        assert!(report.ok(), "{:?}", report.violations);
    }

    #[test]
    fn csv_layout() {
        let grid = TimeGrid::new(1.0, 2).unwrap();
        let control = ControlGrid::new(grid, vec![1.0, 0.0], 1.0, 1.0).unwrap();
        let traj = integrate(
            |_x: &StateVec, u: f64| StateVec::from_slice(&[u]),
            &StateVec::from_slice(&[0.0]),
            &control,
        )
        .unwrap();
        let csv = trajectory_csv(&traj, &["x"]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x,u");
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[1],
            "0.0000000000000000e0,0.0000000000000000e0,1.0000000000000000e0"
        );
        assert!(!csv.contains('\r'));
        assert_eq!(control_csv(&control).lines().count(), 3);
    }
}
