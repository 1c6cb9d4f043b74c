//! Cascaded DoA/ToA tracking and joint 3D positioning / network
//! synchronization for ultra-dense radio access networks.
//!
//! Stage 1 ([`tracker`]) runs one unscented tracker per access node on
//! multiantenna-multicarrier channel snapshots ([`channel`]) and produces
//! azimuth, elevation and time-of-arrival estimates. Stage 2 ([`fusion`])
//! fuses those from the line-of-sight access nodes into a user-node
//! position, velocity and clock state, optionally together with the
//! access-node clock offsets. [`sim`] provides the synthetic world and
//! [`eval`] the batch runner and metrics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod clock;
pub mod error;
pub mod eval;
pub mod filter;
pub mod fusion;
pub mod sim;
pub mod tracker;

pub use error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
