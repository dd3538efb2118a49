//! Scenario configuration: JSON file, `--set` overrides, resolved defaults.

use std::path::{Path, PathBuf};

use mosquito_release::dynamics::default_intervals;
use mosquito_release::equilibria::derive_carrying_capacity;
use mosquito_release::optimizer::SolveOptions;
use mosquito_release::params::REFERENCE_FEMALE_DENSITY;
use mosquito_release::{Model, ModelKind, SitParams, WolParams};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

/// Model parameters; missing entries take the default column values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsBlock {
    #[serde(rename = "beta_E", skip_serializing_if = "Option::is_none")]
    pub beta_e: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(rename = "tau_E", skip_serializing_if = "Option::is_none")]
    pub tau_e: Option<f64>,
    #[serde(rename = "delta_E", skip_serializing_if = "Option::is_none")]
    pub delta_e: Option<f64>,
    #[serde(rename = "beta_F", skip_serializing_if = "Option::is_none")]
    pub beta_f: Option<f64>,
    #[serde(rename = "delta_F", skip_serializing_if = "Option::is_none")]
    pub delta_f: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

/// Exactly one of `F_target` (female density at the persistent equilibrium) or `K`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    #[serde(rename = "F_target", skip_serializing_if = "Option::is_none")]
    pub f_target: Option<f64>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Release schedule for `simulate`: exactly one source.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    /// One rate per interval.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<f64>>,
    /// A `t,u` file as written by `optimize`, one row per interval.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelKind,
    #[serde(default)]
    pub params: ParamsBlock,
    #[serde(default)]
    pub calibration: Calibration,
    /// Horizon T in days.
    pub horizon: f64,
    /// Total release budget C.
    pub budget: f64,
    /// Release rate cap Ū.
    pub ubar: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<usize>,
    #[serde(default)]
    pub optimizer: OptimizerBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<ControlBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn config_error(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses a `--set key.path=value` override into the JSON tree.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_error(format!("override `{assignment}` is not key=value")))?;
    let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if key.is_empty() {
            return Err(config_error(format!("empty key in override `{path}`")));
        }
        let map = match node {
            Value::Object(map) => map,
            _ => {
                return Err(config_error(format!(
                    "`{path}` does not name an object field"
                )))
            }
        };
        if i + 1 == keys.len() {
            map.insert((*key).to_string(), value);
            return Ok(());
        }
        node = map
            .entry((*key).to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split yields at least one key")
}

/// Loads a config file, or the `config` field of a previously written summary.
pub fn load(path: &Path, overrides: &[String]) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    if let Some(inner) = value
        .get("config")
        .filter(|_| value.get("version").is_some())
    {
        value = inner.clone();
    }
    from_value(value, overrides)
}

pub fn from_value(mut value: Value, overrides: &[String]) -> Result<ScenarioConfig, CliError> {
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    let config: ScenarioConfig =
        serde_json::from_value(value).map_err(|e| config_error(e.to_string()))?;
    config.check()?;
    Ok(config)
}

const SIT_ONLY: [&str; 2] = ["gamma", "delta_s"];
const WOL_ONLY: [&str; 3] = ["s_h", "eta", "delta"];

impl ScenarioConfig {
    fn check(&self) -> Result<(), CliError> {
        let p = &self.params;
        let (foreign, present): (&[&str], [bool; 3]) = match self.model {
            ModelKind::Sit => (
                &WOL_ONLY,
                [p.s_h.is_some(), p.eta.is_some(), p.delta.is_some()],
            ),
            ModelKind::Wolbachia => (&SIT_ONLY, [p.gamma.is_some(), p.delta_s.is_some(), false]),
        };
        if let Some((name, _)) = foreign.iter().zip(present).find(|(_, set)| *set) {
            return Err(config_error(format!(
                "parameter `{name}` does not belong to the {} model",
                self.model
            )));
        }
        if self.calibration.f_target.is_some() && self.calibration.k.is_some() {
            return Err(config_error(
                "calibration takes either F_target or K, not both",
            ));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(config_error(format!(
                "horizon must be > 0, got {}",
                self.horizon
            )));
        }
        if self.intervals == Some(0) {
            return Err(config_error("intervals must be >= 1"));
        }
        if let Some(c) = &self.control {
            let sources =
                c.constant.is_some() as u8 + c.schedule.is_some() as u8 + c.csv.is_some() as u8;
            if sources != 1 {
                return Err(config_error(
                    "control takes exactly one of constant, schedule or csv",
                ));
            }
        }
        Ok(())
    }

    pub fn intervals(&self) -> usize {
        self.intervals
            .unwrap_or_else(|| default_intervals(self.horizon))
    }

    pub fn solve_options(&self) -> SolveOptions {
        let d = SolveOptions::default();
        SolveOptions {
            max_iter: self.optimizer.max_iter.unwrap_or(d.max_iter),
            tol: self.optimizer.tol.unwrap_or(d.tol),
            starts: self.optimizer.starts.unwrap_or(d.starts),
            seed: self.optimizer.seed.unwrap_or(d.seed),
        }
    }

    /// Builds the model, calibrating K if needed.
    pub fn model(&self) -> Result<Model, CliError> {
        let p = &self.params;
        let model = match self.model {
            ModelKind::Sit => {
                let d = SitParams::default();
                Model::Sit(SitParams {
                    beta_e: p.beta_e.unwrap_or(d.beta_e),
                    gamma: p.gamma.unwrap_or(d.gamma),
                    tau_e: p.tau_e.unwrap_or(d.tau_e),
                    delta_e: p.delta_e.unwrap_or(d.delta_e),
                    beta_f: p.beta_f.unwrap_or(d.beta_f),
                    delta_f: p.delta_f.unwrap_or(d.delta_f),
                    delta_s: p.delta_s.unwrap_or(d.delta_s),
                    nu: p.nu.unwrap_or(d.nu),
                    k: d.k,
                })
            }
            ModelKind::Wolbachia => {
                let d = WolParams::default();
                Model::Wolbachia(WolParams {
                    beta_e: p.beta_e.unwrap_or(d.beta_e),
                    tau_e: p.tau_e.unwrap_or(d.tau_e),
                    delta_e: p.delta_e.unwrap_or(d.delta_e),
                    beta_f: p.beta_f.unwrap_or(d.beta_f),
                    delta_f: p.delta_f.unwrap_or(d.delta_f),
                    nu: p.nu.unwrap_or(d.nu),
                    k: d.k,
                    s_h: p.s_h.unwrap_or(d.s_h),
                    eta: p.eta.unwrap_or(d.eta),
                    delta: p.delta.unwrap_or(d.delta),
                })
            }
        };
        let k = match self.calibration.k {
            Some(k) => k,
            None => {
                let target = self
                    .calibration
                    .f_target
                    .unwrap_or(REFERENCE_FEMALE_DENSITY);
                let repro = match &model {
                    Model::Sit(p) => p.reproduction(),
                    Model::Wolbachia(p) => p.reproduction(),
                };
                derive_carrying_capacity(target, &repro).map_err(|e| config_error(e.to_string()))?
            }
        };
        Ok(match model {
            Model::Sit(p) => Model::Sit(p.with_k(k)),
            Model::Wolbachia(p) => Model::Wolbachia(p.with_k(k)),
        })
    }

    /// Copy with every default filled in, as archived in run summaries.
    pub fn resolved(&self) -> Result<ScenarioConfig, CliError> {
        let model = self.model()?;
        let params = match model {
            Model::Sit(p) => ParamsBlock {
                beta_e: Some(p.beta_e),
                gamma: Some(p.gamma),
                tau_e: Some(p.tau_e),
                delta_e: Some(p.delta_e),
                beta_f: Some(p.beta_f),
                delta_f: Some(p.delta_f),
                delta_s: Some(p.delta_s),
                nu: Some(p.nu),
                ..ParamsBlock::default()
            },
            Model::Wolbachia(p) => ParamsBlock {
                beta_e: Some(p.beta_e),
                tau_e: Some(p.tau_e),
                delta_e: Some(p.delta_e),
                beta_f: Some(p.beta_f),
                delta_f: Some(p.delta_f),
                nu: Some(p.nu),
                s_h: Some(p.s_h),
                eta: Some(p.eta),
                delta: Some(p.delta),
                ..ParamsBlock::default()
            },
        };
        let opts = self.solve_options();
        Ok(ScenarioConfig {
            model: self.model,
            params,
            calibration: Calibration {
                f_target: None,
                k: Some(model.capacity()),
            },
            horizon: self.horizon,
            budget: self.budget,
            ubar: self.ubar,
            intervals: Some(self.intervals()),
            optimizer: OptimizerBlock {
                max_iter: Some(opts.max_iter),
                tol: Some(opts.tol),
                starts: Some(opts.starts),
                seed: Some(opts.seed),
            },
            control: self.control.clone(),
            output_dir: self.output_dir.clone(),
        })
    }
}
