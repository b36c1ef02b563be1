//! Mechanistic scalability model built from three unit states: solo units
//! working alone, grupo units interacting with others, and fermo units blocked
//! on shared resources.
//!
//! The crate computes steady-state populations and throughput curves over
//! system size, reproduces the classical scalability laws as closed-form
//! special cases, cross-checks the mean-field equations with exact stochastic
//! simulation, and fits transition rates to measured throughput data.
//!
//! ```
//! use mechscale::{integrate_to_steady, Contribution, IntegrationSettings, Rates, SystemConfig};
//!
//! let cfg = SystemConfig::new(Rates::amdahl(0.004, 0.04, 1.0), Contribution::default(), 100.0).unwrap();
//! let fp = integrate_to_steady(&cfg, &IntegrationSettings::default()).unwrap();
//! assert!(fp.s_star < 25.0);
//! ```

pub mod error;
pub mod fit;
pub mod io;
pub mod laws;
pub mod model;
mod ode;
pub mod presets;
pub mod ssa;
pub mod steady;

pub use error::{Error, Result};
pub use model::{
    jacobian_reduced, rhs_full, rhs_reduced, Contribution, FixedPoint, PopulationState, Rates, Stability,
    SystemConfig,
};
pub use steady::{find_critical_n, integrate_to_steady, sweep, IntegrationSettings, SweepResult, SweepRow};
