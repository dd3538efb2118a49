//! Optimal release schedules for two reduced mosquito-population models:
//! sterile insect technique (SIT) and Wolbachia population replacement.
//!
//! The crate covers the model right-hand sides and their equilibria
//! ([`model`], [`equilibria`]), fixed-step integration ([`dynamics`]),
//! linear stability ([`stability`]), admissible release schedules and costs
//! ([`control`]), and a projected-gradient optimizer with discrete-adjoint
//! gradients and first-order optimality diagnostics ([`optimizer`]).

pub mod adjoint;
pub mod control;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod params;
pub mod stability;

pub use control::{project_admissible, total_release, ControlGrid};
pub use dynamics::{simulate, verify_bounds, TimeGrid, Trajectory};
pub use equilibria::{Equilibrium, EquilibriumLabel, Stability};
pub use error::{Error, Result};
pub use linalg::{SmallMatrix, StateVec};
pub use model::{Model, ModelKind};
pub use params::{SitParams, WolParams};

/// Crate version, recorded in run summaries.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
