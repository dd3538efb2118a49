//! Right-hand sides of the controlled reduced systems and their analytic partials.
//!
//! SIT state: `(E, F, Ms)` with the release entering `Ms`.
//! Wolbachia state: `(Eu, Fu, Ei, Fi)` with the release entering `Fi`.
//!
//! Both fertility ratios, `F / (F + γ Ms)` and `Fi / (Fu + Fi)`, are taken
//! as 0 where their denominator vanishes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{SmallMatrix, StateVec};
use crate::params::{SitParams, WolParams};

pub const SIT_STATE_NAMES: [&str; 3] = ["E", "F", "Ms"];
pub const WOL_STATE_NAMES: [&str; 4] = ["Eu", "Fu", "Ei", "Fi"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Sit,
    Wolbachia,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Sit => write!(f, "sit"),
            ModelKind::Wolbachia => write!(f, "wolbachia"),
        }
    }
}

/// A controlled system together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Sit(SitParams),
    Wolbachia(WolParams),
}

#[inline]
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn check_inputs(state: &StateVec, u: f64, dim: usize) -> Result<()> {
    if state.dim() != dim {
        return Err(Error::InvalidState(format!(
            "expected {dim} components, got {}",
            state.dim()
        )));
    }
    if !state.is_finite() {
        return Err(Error::InvalidState(format!("non-finite state {state}")));
    }
    if !u.is_finite() {
        return Err(Error::InvalidState(format!("non-finite release rate {u}")));
    }
    Ok(())
}

/// Time derivative of the controlled SIT system.
pub fn sit_rhs(state: &StateVec, u: f64, p: &SitParams) -> Result<StateVec> {
    check_inputs(state, u, 3)?;
    Ok(sit_rhs_unchecked(state, u, p))
}

/// Time derivative of the controlled Wolbachia system.
pub fn wol_rhs(state: &StateVec, u: f64, p: &WolParams) -> Result<StateVec> {
    check_inputs(state, u, 4)?;
    Ok(wol_rhs_unchecked(state, u, p))
}

#[inline]
pub(crate) fn sit_rhs_unchecked(x: &StateVec, u: f64, p: &SitParams) -> StateVec {
    let (e, f, ms) = (x[0], x[1], x[2]);
    let fertile = ratio(f, f + p.gamma * ms);
    StateVec::from_slice(&[
        p.beta_e * f * (1.0 - e / p.k) * fertile - (p.tau_e + p.delta_e) * e,
        p.nu * p.beta_f * e - p.delta_f * f,
        u - p.delta_s * ms,
    ])
}

#[inline]
pub(crate) fn wol_rhs_unchecked(x: &StateVec, u: f64, p: &WolParams) -> StateVec {
    let (eu, fu, ei, fi) = (x[0], x[1], x[2], x[3]);
    let room = 1.0 - (eu + ei) / p.k;
    let infected = ratio(fi, fu + fi);
    let a = p.tau_e + p.delta_e;
    StateVec::from_slice(&[
        p.beta_e * fu * (1.0 - p.s_h * infected) * room - a * eu,
        p.nu * p.beta_f * eu - p.delta_f * fu,
        p.eta * p.beta_e * fi * room - a * ei,
        p.nu * p.beta_f * ei - p.delta * p.delta_f * fi + u,
    ])
}

/// Partials of the SIT fertility term f_E = β_E F (1 − E/K) F/(F + γ Ms).
///
/// Returns `(∂E, ∂F, ∂Ms)`; all zero where F + γ Ms = 0.
pub fn sit_fertility_partials(x: &StateVec, p: &SitParams) -> (f64, f64, f64) {
    let (e, f, ms) = (x[0], x[1], x[2]);
    let d = f + p.gamma * ms;
    if d == 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let room = 1.0 - e / p.k;
    let d_e = -p.beta_e * f * f / (p.k * d);
    let d_f = room * (p.beta_e * f * f + 2.0 * p.gamma * p.beta_e * f * ms) / (d * d);
    let d_ms = -p.gamma * p.beta_e * f * f * room / (d * d);
    (d_e, d_f, d_ms)
}

pub(crate) fn sit_jacobian(x: &StateVec, p: &SitParams) -> SmallMatrix {
    let (fe_e, fe_f, fe_ms) = sit_fertility_partials(x, p);
    let mut j = SmallMatrix::zeros(3);
    j.set(0, 0, fe_e - (p.tau_e + p.delta_e));
    j.set(0, 1, fe_f);
    j.set(0, 2, fe_ms);
    j.set(1, 0, p.nu * p.beta_f);
    j.set(1, 1, -p.delta_f);
    j.set(2, 2, -p.delta_s);
    j
}

pub(crate) fn wol_jacobian(x: &StateVec, p: &WolParams) -> SmallMatrix {
    let (eu, fu, ei, fi) = (x[0], x[1], x[2], x[3]);
    let room = 1.0 - (eu + ei) / p.k;
    let a = p.tau_e + p.delta_e;
    let d = fu + fi;
    // g = Fu (1 - s_h Fi/(Fu+Fi)) and its partials
    let (g, g_fu, g_fi) = if d == 0.0 {
        (0.0, 0.0, 0.0)
    } else {
        (
            fu * (1.0 - p.s_h * fi / d),
            1.0 - p.s_h * fi * fi / (d * d),
            -p.s_h * fu * fu / (d * d),
        )
    };
    let mut j = SmallMatrix::zeros(4);
    j.set(0, 0, -p.beta_e * g / p.k - a);
    j.set(0, 1, p.beta_e * room * g_fu);
    j.set(0, 2, -p.beta_e * g / p.k);
    j.set(0, 3, p.beta_e * room * g_fi);

    j.set(1, 0, p.nu * p.beta_f);
    j.set(1, 1, -p.delta_f);

    j.set(2, 0, -p.eta * p.beta_e * fi / p.k);
    j.set(2, 2, -p.eta * p.beta_e * fi / p.k - a);
    j.set(2, 3, p.eta * p.beta_e * room);

    j.set(3, 2, p.nu * p.beta_f);
    j.set(3, 3, -p.delta * p.delta_f);
    j
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Sit(_) => ModelKind::Sit,
            Model::Wolbachia(_) => ModelKind::Wolbachia,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Model::Sit(_) => 3,
            Model::Wolbachia(_) => 4,
        }
    }

    pub fn state_names(&self) -> &'static [&'static str] {
        match self {
            Model::Sit(_) => &SIT_STATE_NAMES,
            Model::Wolbachia(_) => &WOL_STATE_NAMES,
        }
    }

    /// Index of the compartment the release rate is added to.
    pub fn control_channel(&self) -> usize {
        match self {
            Model::Sit(_) => 2,
            Model::Wolbachia(_) => 3,
        }
    }

    /// Egg capacity K.
    pub fn capacity(&self) -> f64 {
        match self {
            Model::Sit(p) => p.k,
            Model::Wolbachia(p) => p.k,
        }
    }

    #[inline]
    pub fn rhs(&self, x: &StateVec, u: f64) -> StateVec {
        match self {
            Model::Sit(p) => sit_rhs_unchecked(x, u, p),
            Model::Wolbachia(p) => wol_rhs_unchecked(x, u, p),
        }
    }

    pub fn checked_rhs(&self, x: &StateVec, u: f64) -> Result<StateVec> {
        match self {
            Model::Sit(p) => sit_rhs(x, u, p),
            Model::Wolbachia(p) => wol_rhs(x, u, p),
        }
    }

    /// Analytic state Jacobian ∂f/∂x. The release enters additively, so ∂f/∂u
    /// is the unit vector on [`Model::control_channel`].
    #[inline]
    pub fn jacobian(&self, x: &StateVec) -> SmallMatrix {
        match self {
            Model::Sit(p) => sit_jacobian(x, p),
            Model::Wolbachia(p) => wol_jacobian(x, p),
        }
    }

    /// Denominator of the fertility ratio at `x`.
    pub fn ratio_denominator(&self, x: &StateVec) -> f64 {
        match self {
            Model::Sit(p) => x[1] + p.gamma * x[2],
            Model::Wolbachia(_) => x[1] + x[3],
        }
    }
}
