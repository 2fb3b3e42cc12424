//! Simulator and policy library for a transmitter that runs on harvested
//! energy and must clear a fixed data queue as fast as possible while the
//! harvesting rate stays completely unknown to it.
//!
//! The transmitter monitors its own battery; whenever the energy harvested
//! since the last event reaches a threshold, an event triggers and a planner
//! designs a constant-power transmission from nothing but the current battery
//! level and queue length. [`policies`] provides the minimax-optimal planner
//! and the estimation-based and greedy baselines; [`rate_math`] carries the
//! closed forms behind them (rate-power equilibria via the lower Lambert W
//! branch, reachability, time-optimal durations); [`harvest`] the energy
//! arrival profiles; [`engine`] the fixed-step closed loop; [`sweep`] the
//! benchmark harness that maps worst cases and finite-completion regions
//! over profile families; [`config`] the JSON front end for both.

pub mod config;
pub mod engine;
pub mod error;
pub mod harvest;
pub mod policies;
pub mod rate_math;
pub mod sweep;

pub use engine::{simulate, Completion, SimConfig, SimOutcome};
pub use error::{Error, Result};
pub use harvest::HarvestProfile;
pub use policies::{plan, PlannedTransmission, PolicyContext, PolicyKind};
pub use rate_math::{PowerBudget, SlopeK, K_MAX};
pub use sweep::{run_sweep, run_sweep_sequential, SweepResult, SweepSpec};
