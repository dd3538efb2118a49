//! Biological parameters of the reduced sterile-male and Wolbachia models.
//!
//! Defaults are the field values used for the Aedes island scenario
//! (74 ha, about 5106 adult females at equilibrium). The value intervals
//! observed in the field are advisory: values outside them produce
//! [`ParamWarning`]s, never errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adult female density of the reference island scenario (69 ha⁻¹ × 74 ha).
pub const REFERENCE_FEMALE_DENSITY: f64 = 5106.0;

/// A parameter that lies outside its documented field interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamWarning {
    pub name: String,
    pub value: f64,
    pub low: f64,
    pub high: f64,
}

impl std::fmt::Display for ParamWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} = {} outside field interval [{}, {}]",
            self.name, self.value, self.low, self.high
        )
    }
}

/// Parameters of the reduced sterile insect technique system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SitParams {
    /// Effective fecundity (eggs per female per day).
    pub beta_e: f64,
    /// Mating competitiveness of released sterile males.
    pub gamma: f64,
    /// Egg hatching rate.
    pub tau_e: f64,
    /// Aquatic-phase death rate.
    pub delta_e: f64,
    /// Female emergence rate.
    pub beta_f: f64,
    /// Adult female death rate (also used for wild males).
    pub delta_f: f64,
    /// Sterile male death rate.
    pub delta_s: f64,
    /// Female fraction at emergence.
    pub nu: f64,
    /// Environmental capacity for eggs.
    pub k: f64,
}

impl Default for SitParams {
    fn default() -> Self {
        let mut p = SitParams {
            beta_e: 10.0,
            gamma: 1.0,
            tau_e: 0.05,
            delta_e: 0.03,
            beta_f: 0.01,
            delta_f: 0.04,
            delta_s: 0.12,
            nu: 0.5,
            k: 1.0,
        };
        p.k = crate::equilibria::derive_carrying_capacity(
            REFERENCE_FEMALE_DENSITY,
            &p.reproduction(),
        )
        .expect("default parameters are persistent");
        p
    }
}

/// Aquatic/adult rates shared by both models; enough to calibrate K.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reproduction {
    pub beta_e: f64,
    pub tau_e: f64,
    pub delta_e: f64,
    pub beta_f: f64,
    pub delta_f: f64,
    pub nu: f64,
}

impl Reproduction {
    /// Aquatic exit rate τ_E + δ_E.
    pub fn aquatic_exit(&self) -> f64 {
        self.tau_e + self.delta_e
    }

    /// Basic offspring number ν β_E β_F / (δ_F (τ_E + δ_E)); persistence iff > 1.
    pub fn offspring_number(&self) -> f64 {
        self.nu * self.beta_e * self.beta_f / (self.delta_f * self.aquatic_exit())
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and > 0",
        });
    }
    Ok(())
}

fn interval(warnings: &mut Vec<ParamWarning>, name: &str, value: f64, low: f64, high: f64) {
    if value < low || value > high {
        warnings.push(ParamWarning {
            name: name.to_string(),
            value,
            low,
            high,
        });
    }
}

impl Reproduction {
    fn validate(&self) -> Result<()> {
        check_positive("beta_E", self.beta_e)?;
        check_positive("tau_E", self.tau_e)?;
        check_positive("delta_E", self.delta_e)?;
        check_positive("beta_F", self.beta_f)?;
        check_positive("delta_F", self.delta_f)?;
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::InvalidParameter {
                name: "nu",
                value: self.nu,
                reason: "must lie in (0, 1)",
            });
        }
        Ok(())
    }

    fn field_warnings(&self, w: &mut Vec<ParamWarning>) {
        interval(w, "beta_E", self.beta_e, 7.46, 14.85);
        interval(w, "tau_E", self.tau_e, 0.005, 0.25);
        interval(w, "delta_E", self.delta_e, 0.023, 0.046);
        interval(w, "beta_F", self.beta_f, 0.005, 0.025);
        interval(w, "delta_F", self.delta_f, 0.033, 0.046);
    }
}

impl SitParams {
    pub fn reproduction(&self) -> Reproduction {
        Reproduction {
            beta_e: self.beta_e,
            tau_e: self.tau_e,
            delta_e: self.delta_e,
            beta_f: self.beta_f,
            delta_f: self.delta_f,
            nu: self.nu,
        }
    }

    /// Checks hard invariants and returns field-interval warnings.
    pub fn validate(&self) -> Result<Vec<ParamWarning>> {
        self.reproduction().validate()?;
        check_positive("delta_s", self.delta_s)?;
        check_positive("K", self.k)?;
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                value: self.gamma,
                reason: "must lie in [0, 1]",
            });
        }
        let mut w = Vec::new();
        self.reproduction().field_warnings(&mut w);
        Ok(w)
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }
}

/// Parameters of the reduced Wolbachia replacement system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WolParams {
    pub beta_e: f64,
    pub tau_e: f64,
    pub delta_e: f64,
    pub beta_f: f64,
    pub delta_f: f64,
    pub nu: f64,
    pub k: f64,
    /// Cytoplasmic incompatibility probability.
    pub s_h: f64,
    /// Fecundity ratio of infected to uninfected females.
    pub eta: f64,
    /// Mortality multiplier of infected adults.
    pub delta: f64,
}

impl Default for WolParams {
    fn default() -> Self {
        let sit = SitParams::default();
        WolParams {
            beta_e: sit.beta_e,
            tau_e: sit.tau_e,
            delta_e: sit.delta_e,
            beta_f: sit.beta_f,
            delta_f: sit.delta_f,
            nu: sit.nu,
            k: sit.k,
            s_h: 0.9951,
            eta: 0.95,
            delta: 1.25,
        }
    }
}

impl WolParams {
    pub fn reproduction(&self) -> Reproduction {
        Reproduction {
            beta_e: self.beta_e,
            tau_e: self.tau_e,
            delta_e: self.delta_e,
            beta_f: self.beta_f,
            delta_f: self.delta_f,
            nu: self.nu,
        }
    }

    /// b = ν β_F β_E / (τ_E + δ_E), recomputed on every call.
    pub fn b(&self) -> f64 {
        self.nu * self.beta_f * self.beta_e / (self.tau_e + self.delta_e)
    }

    pub fn validate(&self) -> Result<Vec<ParamWarning>> {
        self.reproduction().validate()?;
        check_positive("K", self.k)?;
        if !(self.s_h > 0.0 && self.s_h <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "s_h",
                value: self.s_h,
                reason: "must lie in (0, 1]",
            });
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidParameter {
                name: "eta",
                value: self.eta,
                reason: "must lie in (0, 1)",
            });
        }
        if !(self.delta > 1.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "delta",
                value: self.delta,
                reason: "must be > 1",
            });
        }
        let mut w = Vec::new();
        self.reproduction().field_warnings(&mut w);
        interval(&mut w, "eta", self.eta, 0.85, 1.0);
        interval(&mut w, "delta", self.delta, 1.0, 1.7);
        Ok(w)
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k = k;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_inside_field_intervals() {
        assert!(SitParams::default().validate().unwrap().is_empty());
        assert!(WolParams::default().validate().unwrap().is_empty());
    }

    #[test]
    fn b_matches_its_definition() {
        let p = WolParams::default();
        assert!((p.b() - 0.625).abs() < 1e-15);
        let lhs = p.b() * (p.tau_e + p.delta_e);
        let rhs = p.nu * p.beta_f * p.beta_e;
        assert!((lhs - rhs).abs() <= 4.0 * f64::EPSILON * rhs);
    }

    #[test]
    fn out_of_interval_is_warning_not_error() {
        let p = SitParams {
            beta_e: 20.0,
            ..SitParams::default()
        };
        let w = p.validate().unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].name, "beta_E");
    }

    #[test]
    fn hard_invariants_rejected() {
        let bad_nu = SitParams {
            nu: 1.0,
            ..SitParams::default()
        };
        assert!(bad_nu.validate().is_err());
        let bad_gamma = SitParams {
            gamma: 1.5,
            ..SitParams::default()
        };
        assert!(bad_gamma.validate().is_err());
        let bad_delta = WolParams {
            delta: 0.9,
            ..WolParams::default()
        };
        assert!(bad_delta.validate().is_err());
        let bad_sh = WolParams {
            s_h: 0.0,
            ..WolParams::default()
        };
        assert!(bad_sh.validate().is_err());
    }
}
