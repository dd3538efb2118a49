//! Gradients of the terminal cost with respect to the piecewise-constant release.
//!
//! [`discrete_gradient`] transposes the RK4 steps exactly, so it is the true
//! gradient of the discretized cost. [`continuous_costate`] integrates the
//! costate equation −p' = (∂f/∂x)ᵀ p backward from p(T) = ∇Φ(x(T)); its
//! control-channel component is the switching function used in the
//! optimality diagnostics and converges to the discrete gradient as dt → 0.

use crate::dynamics::integrate_states;
use crate::error::Result;
use crate::linalg::StateVec;
use crate::optimizer::Problem;

/// Cost, gradient and forward states for the control `values`.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub cost: f64,
    pub gradient: Vec<f64>,
    pub states: Vec<StateVec>,
}

/// Reverse-mode gradient of the discretized cost, one entry per control interval.
pub fn discrete_gradient(problem: &Problem, values: &[f64]) -> Result<Evaluation> {
    let model = problem.model;
    let rhs = |x: &StateVec, u: f64| model.rhs(x, u);
    let states = integrate_states(&rhs, &problem.init, values, &problem.grid)?;
    let terminal = states.last().expect("non-empty trajectory");
    let cost = problem.cost.value(terminal);
    let h = problem.grid.dt();
    let c = model.control_channel();

    let mut adj = problem.cost.gradient(terminal);
    let mut gradient = vec![0.0; values.len()];
    for k in (0..values.len()).rev() {
        let u = values[k];
        let x = states[k];
        let k1 = model.rhs(&x, u);
        let y2 = x.axpy(0.5 * h, &k1);
        let k2 = model.rhs(&y2, u);
        let y3 = x.axpy(0.5 * h, &k2);
        let k3 = model.rhs(&y3, u);
        let y4 = x.axpy(h, &k3);

        let mut x_bar = adj;
        let mut u_bar = 0.0;

        let g4 = adj.scaled(h / 6.0);
        u_bar += g4[c];
        let y4_bar = model.jacobian(&y4).transpose_mul_vec(&g4);
        x_bar.add_assign_scaled(1.0, &y4_bar);

        let g3 = adj.scaled(h / 3.0).axpy(h, &y4_bar);
        u_bar += g3[c];
        let y3_bar = model.jacobian(&y3).transpose_mul_vec(&g3);
        x_bar.add_assign_scaled(1.0, &y3_bar);

        let g2 = adj.scaled(h / 3.0).axpy(0.5 * h, &y3_bar);
        u_bar += g2[c];
        let y2_bar = model.jacobian(&y2).transpose_mul_vec(&g2);
        x_bar.add_assign_scaled(1.0, &y2_bar);

        let g1 = adj.scaled(h / 6.0).axpy(0.5 * h, &y2_bar);
        u_bar += g1[c];
        let y1_bar = model.jacobian(&x).transpose_mul_vec(&g1);
        x_bar.add_assign_scaled(1.0, &y1_bar);

        gradient[k] = u_bar;
        adj = x_bar;
    }
    Ok(Evaluation {
        cost,
        gradient,
        states,
    })
}

/// Costate at every node from a backward RK4 sweep of −p' = Jᵀ(x(t)) p.
///
/// States between nodes come from cubic Hermite interpolation on each interval.
pub fn continuous_costate(problem: &Problem, values: &[f64], states: &[StateVec]) -> Vec<StateVec> {
    let model = problem.model;
    let h = problem.grid.dt();
    let n = values.len();
    let mut costate = vec![StateVec::zeros(model.dim()); n + 1];
    let mut p = problem.cost.gradient(&states[n]);
    costate[n] = p;
    for k in (0..n).rev() {
        let u = values[k];
        let (x0, x1) = (states[k], states[k + 1]);
        let f0 = model.rhs(&x0, u);
        let f1 = model.rhs(&x1, u);
        let mid = x0
            .axpy(1.0, &x1)
            .scaled(0.5)
            .axpy(h / 8.0, &f0.axpy(-1.0, &f1));
        let rate = |x: &StateVec, p: &StateVec| model.jacobian(x).transpose_mul_vec(p);
        // dp/ds = Jᵀ p in reversed time s = T − t
        let m1 = rate(&x1, &p);
        let m2 = rate(&mid, &p.axpy(0.5 * h, &m1));
        let m3 = rate(&mid, &p.axpy(0.5 * h, &m2));
        let m4 = rate(&x0, &p.axpy(h, &m3));
        p.add_assign_scaled(h / 6.0, &m1);
        p.add_assign_scaled(h / 3.0, &m2);
        p.add_assign_scaled(h / 3.0, &m3);
        p.add_assign_scaled(h / 6.0, &m4);
        costate[k] = p;
    }
    costate
}

/// Per-interval gradient ∫ p_c dt from the continuous costate (trapezoid rule).
pub fn continuous_gradient(problem: &Problem, values: &[f64]) -> Result<Vec<f64>> {
    let model = problem.model;
    let rhs = |x: &StateVec, u: f64| model.rhs(x, u);
    let states = integrate_states(&rhs, &problem.init, values, &problem.grid)?;
    let costate = continuous_costate(problem, values, &states);
    let c = model.control_channel();
    let h = problem.grid.dt();
    Ok((0..values.len())
        .map(|k| 0.5 * h * (costate[k][c] + costate[k + 1][c]))
        .collect())
}
