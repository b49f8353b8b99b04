//! Age of Information (AoI) for discrete-time zero-wait status updating over
//! two parallel queues: one with geometric service, one with deterministic
//! service (the Geo-D system), plus the single-queue, Geo-Geo, D-D, and
//! continuous-time reference systems.
//!
//! * [`closed_forms`] evaluates the analytic averages.
//! * [`state_calculus`] is an exact rational engine that enumerates every
//!   sample path of a deterministic service period and recovers the averages
//!   from first principles.
//! * [`slot_sim`] is the slot-level Monte Carlo simulator.
//! * [`limits`] studies the discrete-to-continuous limit.

pub mod closed_forms;
pub mod error;
pub mod limits;
pub mod model;
pub mod slot_sim;
pub mod state_calculus;

pub use error::{Error, Result};
