//! Slot-based simulator for solar-harvesting sensor nodes that learn when
//! to sense, relay, or bank energy.
//!
//! The library is organized around a per-slot decision loop: stochastic
//! harvest and data-value streams feed a budget-aware bandit whose banking
//! threshold is tuned by an adaptive controller, with an offline optimal
//! planner and a static duty-cycle schedule as reference policies, plus a
//! multi-hop network layer and a reproducible experiment harness.

// Validation throughout is written `if !(x > 0.0)` on purpose: the negated
// form also rejects NaN, which `x <= 0.0` would wave through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ava;
pub mod bandit;
pub mod config;
pub mod battery;
pub mod error;
pub mod experiment;
pub mod kl;
pub mod network;
pub mod policy;
pub mod rng;
pub mod sources;
pub mod trace;

pub use error::{Error, Result};
