//! Closed-form equilibria, assumption checks and carrying-capacity calibration.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::StateVec;
use crate::model::{sit_rhs_unchecked, wol_jacobian, wol_rhs_unchecked, Model};
use crate::params::{Reproduction, SitParams, WolParams};

/// Relative residual bound for an accepted equilibrium.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquilibriumLabel {
    Extinction,
    NonExtinction,
    WolbachiaInvasion,
    WolbachiaExtinction,
    Coexistence,
}

impl std::fmt::Display for EquilibriumLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EquilibriumLabel::Extinction => "extinction",
            EquilibriumLabel::NonExtinction => "non-extinction",
            EquilibriumLabel::WolbachiaInvasion => "wolbachia-invasion",
            EquilibriumLabel::WolbachiaExtinction => "wolbachia-extinction",
            EquilibriumLabel::Coexistence => "coexistence",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
    Undetermined,
}

impl std::fmt::Display for Stability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stability::Stable => "stable",
            Stability::Unstable => "unstable",
            Stability::Undetermined => "undetermined",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquilibriumFlag {
    /// The fertility ratio is singular here; the zero-ratio convention was used.
    SingularRhs,
    /// The printed closed form did not pass the residual check.
    ClosedFormMismatch,
    /// Newton's method failed from every seed.
    RootFindingFailed,
    /// An existence assumption does not hold for these parameters.
    AssumptionViolated,
    /// Some component is negative.
    Negative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub state: StateVec,
    pub label: EquilibriumLabel,
    pub stability: Stability,
    /// Filled in by [`crate::stability::classify`], sorted by descending real part.
    pub eigenvalues: Vec<Complex64>,
    /// ‖rhs(state, 0)‖∞
    pub residual: f64,
    pub flags: Vec<EquilibriumFlag>,
    pub notes: Vec<String>,
}

impl Equilibrium {
    fn new(model: &Model, label: EquilibriumLabel, state: StateVec) -> Self {
        let residual = model.rhs(&state, 0.0).norm_inf();
        let mut flags = Vec::new();
        if model.ratio_denominator(&state) == 0.0 {
            flags.push(EquilibriumFlag::SingularRhs);
        }
        if state.iter().any(|&v| v < 0.0) {
            flags.push(EquilibriumFlag::Negative);
        }
        Equilibrium {
            state,
            label,
            stability: Stability::Undetermined,
            eigenvalues: Vec::new(),
            residual,
            flags,
            notes: Vec::new(),
        }
    }

    /// Residual bound scaled by the state magnitude.
    pub fn residual_bound(&self) -> f64 {
        RESIDUAL_TOL * self.state.norm_inf().max(1.0)
    }

    pub fn residual_ok(&self) -> bool {
        self.residual < self.residual_bound()
    }

    pub fn has_flag(&self, flag: &EquilibriumFlag) -> bool {
        self.flags.contains(flag)
    }
}

/// K such that the persistent equilibrium has `female_target` adult females.
pub fn derive_carrying_capacity(female_target: f64, p: &Reproduction) -> Result<f64> {
    if !(female_target.is_finite() && female_target >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "F_target",
            value: female_target,
            reason: "must be finite and >= 0",
        });
    }
    let fill = 1.0 - p.aquatic_exit() * p.delta_f / (p.nu * p.beta_e * p.beta_f);
    if fill <= 0.0 {
        return Err(Error::NoPositiveEquilibrium(format!(
            "nu*beta_E*beta_F = {} does not exceed delta_F*(tau_E+delta_E) = {}",
            p.nu * p.beta_e * p.beta_f,
            p.delta_f * p.aquatic_exit()
        )));
    }
    let eggs = p.delta_f * female_target / (p.nu * p.beta_f);
    Ok(eggs / fill)
}

/// Fraction of the capacity filled by eggs at the persistent SIT equilibrium.
fn sit_fill(p: &SitParams) -> f64 {
    1.0 - (p.tau_e + p.delta_e) * p.delta_f / (p.nu * p.beta_e * p.beta_f)
}

/// Extinction and non-extinction equilibria of the SIT system without releases.
pub fn sit_equilibria(p: &SitParams) -> Vec<Equilibrium> {
    let model = Model::Sit(*p);
    let e2 = p.k * sit_fill(p);
    let f2 = p.nu * p.beta_f / p.delta_f * e2;
    let mut out = vec![
        Equilibrium::new(&model, EquilibriumLabel::Extinction, StateVec::zeros(3)),
        Equilibrium::new(
            &model,
            EquilibriumLabel::NonExtinction,
            StateVec::from_slice(&[e2, f2, 0.0]),
        ),
    ];
    let report = check_assumptions(&model, None);
    if !report.all_hold() {
        for eq in &mut out {
            eq.flags.push(EquilibriumFlag::AssumptionViolated);
            eq.notes.extend(report.failures().map(|c| c.name.clone()));
        }
    }
    debug_assert!(sit_rhs_unchecked(&out[0].state, 0.0, p).norm_inf() == 0.0);
    out
}

/// Invasion equilibrium (0, 0, Ei*, Fi*) of the Wolbachia system.
pub fn wol_invasion_state(p: &WolParams) -> StateVec {
    let b = p.b();
    let dd = p.delta * p.delta_f;
    StateVec::from_slice(&[
        0.0,
        0.0,
        p.k * (1.0 - dd / (b * p.eta)),
        p.k * (p.nu * p.beta_f / dd - p.nu * p.beta_f / (b * p.eta)),
    ])
}

/// Wolbachia-free equilibrium (Eu*, Fu*, 0, 0).
pub fn wol_free_state(p: &WolParams) -> StateVec {
    let b = p.b();
    StateVec::from_slice(&[
        p.k * (1.0 - p.delta_f / b),
        p.k * (p.nu * p.beta_f / p.delta_f - p.nu * p.beta_f / b),
        0.0,
        0.0,
    ])
}

/// Coexistence point as printed in the closed-form characterization.
pub fn wol_coexistence_closed_form(p: &WolParams) -> StateVec {
    let b = p.b();
    let fill = 1.0 - p.delta * p.delta_f / (b * p.eta);
    let denom = p.s_h + p.delta - 1.0;
    let eu = (p.eta / p.delta - (1.0 - p.s_h) * p.k * fill) / denom;
    let ei = (p.delta * p.k * fill - p.eta / p.delta) / denom;
    StateVec::from_slice(&[
        eu,
        p.nu * p.beta_f / p.delta_f * eu,
        ei,
        p.nu * p.beta_f / (p.delta * p.delta_f) * ei,
    ])
}

/// Outcome of a damped Newton solve on the Wolbachia right-hand side.
#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub state: StateVec,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Damped Newton iteration on `wol_rhs(x, 0) = 0`.
pub fn wol_newton(p: &WolParams, seed: &StateVec, max_iter: usize) -> NewtonOutcome {
    let mut x = *seed;
    let mut f = wol_rhs_unchecked(&x, 0.0, p);
    let mut res = f.norm_inf();
    for it in 0..max_iter {
        if res < 1e-3 * RESIDUAL_TOL * x.norm_inf().max(1.0) {
            return NewtonOutcome {
                state: x,
                residual: res,
                iterations: it,
                converged: true,
            };
        }
        let j = wol_jacobian(&x, p);
        let step = match j.solve(&f) {
            Ok(s) if s.is_finite() => s,
            _ => break,
        };
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let trial = x.axpy(-t, &step);
            let ft = wol_rhs_unchecked(&trial, 0.0, p);
            let rt = ft.norm_inf();
            if rt.is_finite() && rt < res {
                x = trial;
                f = ft;
                res = rt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let converged = res < RESIDUAL_TOL * x.norm_inf().max(1.0);
    NewtonOutcome {
        state: x,
        residual: res,
        iterations: max_iter,
        converged,
    }
}

/// The four nonnegative equilibria of the Wolbachia system without releases.
///
/// The coexistence point is taken from its printed closed form when that
/// form passes the residual check. Otherwise it is flagged
/// [`EquilibriumFlag::ClosedFormMismatch`] and located by damped Newton,
/// first from the closed-form seed, then from interior points between the
/// invasion and Wolbachia-free equilibria.
pub fn wol_equilibria(p: &WolParams) -> Vec<Equilibrium> {
    let model = Model::Wolbachia(*p);
    let invasion = Equilibrium::new(
        &model,
        EquilibriumLabel::WolbachiaInvasion,
        wol_invasion_state(p),
    );
    let free = Equilibrium::new(
        &model,
        EquilibriumLabel::WolbachiaExtinction,
        wol_free_state(p),
    );
    let total = Equilibrium::new(&model, EquilibriumLabel::Extinction, StateVec::zeros(4));

    let closed = wol_coexistence_closed_form(p);
    let mut coexistence = Equilibrium::new(&model, EquilibriumLabel::Coexistence, closed);
    if !coexistence.residual_ok() || coexistence.has_flag(&EquilibriumFlag::Negative) {
        coexistence
            .flags
            .retain(|f| *f != EquilibriumFlag::Negative);
        coexistence.flags.push(EquilibriumFlag::ClosedFormMismatch);
        coexistence.notes.push(format!(
            "closed form {} has residual {:.3e}",
            closed, coexistence.residual
        ));
        let others = [invasion.state, free.state, total.state];
        let distinct = |x: &StateVec| {
            others
                .iter()
                .all(|o| x.max_abs_diff(o) > 1e-6 * p.k.max(1.0))
        };
        let mut seeds = vec![("closed-form".to_string(), closed)];
        for theta in (1..20).map(|i| i as f64 / 20.0) {
            let s = invasion.state.scaled(theta).axpy(1.0 - theta, &free.state);
            seeds.push((format!("interior theta={theta}"), s));
        }
        let mut found = false;
        for (name, seed) in seeds {
            let out = wol_newton(p, &seed, 200);
            let interior = out.state.iter().all(|&v| v > 0.0);
            if out.converged && interior && distinct(&out.state) {
                let mut eq = Equilibrium::new(&model, EquilibriumLabel::Coexistence, out.state);
                eq.flags.push(EquilibriumFlag::ClosedFormMismatch);
                eq.notes.extend(coexistence.notes.iter().cloned());
                eq.notes.push(format!(
                    "located by Newton from {name} seed in {} iterations",
                    out.iterations
                ));
                coexistence = eq;
                found = true;
                break;
            }
            coexistence.notes.push(format!(
                "Newton from {name} seed: converged={}, residual={:.3e}, state={}",
                out.converged, out.residual, out.state
            ));
        }
        if !found {
            coexistence.flags.push(EquilibriumFlag::RootFindingFailed);
        }
    }

    let mut out = vec![invasion, free, coexistence, total];
    let report = check_assumptions(&model, None);
    if !report.all_hold() {
        for eq in &mut out {
            eq.flags.push(EquilibriumFlag::AssumptionViolated);
        }
    }
    out
}

/// Horizon and constraint levels of a release scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioBounds {
    pub horizon: f64,
    pub budget: f64,
    pub ubar: f64,
}

/// One inequality `lhs > rhs` evaluated numerically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub statement: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl AssumptionCheck {
    fn greater(name: &str, statement: &str, lhs: f64, rhs: f64) -> Self {
        AssumptionCheck {
            name: name.to_string(),
            statement: statement.to_string(),
            lhs,
            rhs,
            holds: lhs > rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.holds)
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Evaluates every structural inequality for the model and, when given, the scenario.
///
/// Model-only checks (scenario = `None`) are what the equilibrium routines use.
pub fn check_assumptions(model: &Model, scenario: Option<&ScenarioBounds>) -> AssumptionReport {
    let mut checks = Vec::new();
    match model {
        Model::Sit(p) => {
            checks.push(AssumptionCheck::greater(
                "sterile-mortality",
                "delta_s > delta_M (= delta_F)",
                p.delta_s,
                p.delta_f,
            ));
            checks.push(AssumptionCheck::greater(
                "persistence",
                "nu*beta_E*beta_F > delta_F*(tau_E+delta_E)",
                p.nu * p.beta_e * p.beta_f,
                p.delta_f * (p.tau_e + p.delta_e),
            ));
        }
        Model::Wolbachia(p) => {
            let b = p.b();
            checks.push(AssumptionCheck::greater(
                "persistence",
                "b > delta_F",
                b,
                p.delta_f,
            ));
            checks.push(AssumptionCheck::greater(
                "infected-growth",
                "eta*b > delta*delta_F",
                p.eta * b,
                p.delta * p.delta_f,
            ));
            let scaled = p.k * (1.0 - p.delta * p.delta_f / (p.eta * b));
            checks.push(AssumptionCheck::greater(
                "capacity-lower",
                "K*(1 - delta*delta_F/(eta*b)) > eta/delta^2",
                scaled,
                p.eta / (p.delta * p.delta),
            ));
            checks.push(AssumptionCheck::greater(
                "capacity-upper",
                "eta/(delta*(1-s_h)) > K*(1 - delta*delta_F/(eta*b))",
                p.eta / (p.delta * (1.0 - p.s_h)),
                scaled,
            ));
        }
    }
    if let Some(s) = scenario {
        checks.push(AssumptionCheck::greater(
            "budget-binding",
            "Ubar*T > C",
            s.ubar * s.horizon,
            s.budget,
        ));
    }
    AssumptionReport { checks }
}


#[cfg(test)]
mod coexistence_oracle {
    use super::*;

    /// Independent reduction: at a coexistence point Eu + Ei = K(1 − δδ_F/(ηb))
    /// and Fi/(Fu+Fi) = (1 − η/δ)/s_h, which fixes both egg compartments.
    fn reduced_coexistence(p: &WolParams) -> (f64, f64) {
        let total = p.k * (1.0 - p.delta * p.delta_f / (p.eta * p.b()));
        let ei = total * p.delta * (p.delta - p.eta)
            / (p.delta * p.s_h + (p.delta - p.eta) * (p.delta - 1.0));
        (total - ei, ei)
    }

    #[test]
    fn newton_fallback_matches_reduced_oracle() {
        for p in [
            WolParams::default(),
            WolParams {
                s_h: 0.9,
                eta: 0.9,
                delta: 1.5,
                ..WolParams::default()
            },
        ] {
            let co = wol_equilibria(&p)
                .into_iter()
                .find(|e| e.label == EquilibriumLabel::Coexistence)
                .unwrap();
            let (eu, ei) = reduced_coexistence(&p);
            assert!(
                (co.state[0] - eu).abs() < 1e-8 * p.k,
                "{} vs {eu}",
                co.state[0]
            );
            assert!((co.state[2] - ei).abs() < 1e-8 * p.k);
        }
    }
}
