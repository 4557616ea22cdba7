//! Maintenance outage scheduling for transmission networks under wind and
//! load uncertainty.
//!
//! The pipeline samples operating scenarios ([`sampler`]), plans each day
//! with a unit commitment ([`uc`]) or its nearest-neighbour stand-in
//! ([`proxy`]), follows every hour with a redispatch LP ([`rt`]), scores
//! N-1 security ([`reliability`]) and searches over schedules with the
//! cross-entropy method ([`ce`]). [`harness`] wires these together.

pub mod ce;
pub mod error;
pub mod fixtures;
pub mod grid;
pub mod harness;
pub mod proxy;
pub mod reliability;
pub mod rt;
pub mod sampler;
pub mod seed;
pub mod stochastic;
pub mod uc;

pub use error::{Error, Result};
