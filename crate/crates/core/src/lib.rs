//! Robust traffic signal timing from sampled connected-vehicle trajectories.
//!
//! The crate is organized as a pipeline:
//!
//! * [`trajectory`] parses per-vehicle trajectory samples, detects stop
//!   episodes, and digests each signal cycle into a [`trajectory::CycleObservation`].
//! * [`uncertainty`] turns cycle observations into per-cycle arrival-rate
//!   bounds and aggregates them into a per-movement box uncertainty set.
//! * [`lp`] is a self-contained bounded-variable simplex and branch-and-bound
//!   MILP solver with a deterministic text dump format.
//! * [`signal`] builds the min-max timing program, reduces it to a
//!   deterministic MILP (fixed-time) or LP (real-time) over the box set,
//!   and evaluates plans in closed form.
//! * [`sim`] is a seeded discrete-time point-queue simulator of one
//!   signalized intersection that produces ground-truth delays and emits
//!   trajectory files the front of the pipeline can consume.
//! * [`sweep`] runs seeded experiment grids over penetration rates and
//!   demand fluctuation levels, comparing robust and deterministic plans.
//!
//! All randomness is seeded and every pipeline stage is deterministic given
//! its inputs, so experiment outputs are byte-reproducible.

pub mod config;
pub mod error;
pub mod lp;
pub mod par;
pub mod signal;
pub mod sim;
pub mod sweep;
pub mod trajectory;
pub mod uncertainty;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
