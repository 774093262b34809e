//! Phase-shift optimization for multi-RIS MISO downlinks under statistical CSI.
//!
//! A single-antenna user is served by an `M`-antenna access point through `K`
//! reconfigurable intelligent surfaces of `N` elements each. The direct link is
//! blocked, so everything the user hears is reflected. Each RIS element applies
//! a unit-modulus coefficient `e^{j phi}`, and the goal is to pick those `NK`
//! phases knowing only the channel *distribution*, not per-slot realizations.
//!
//! Two model-free stochastic optimizers are provided:
//!
//! * [`ssca`] — successive convex approximation over the unconstrained phase
//!   angles, maximizing the average achievable rate.
//! * [`smm`] — majorization-minimization over the reflection coefficients,
//!   maximizing the average received SNR via sample-average recursions.
//!
//! Both consume a stream of channel realizations drawn from [`chanmodel`] and
//! never inspect the model parameters themselves. [`harness`] orchestrates the
//! snapshot/realization simulation protocol and emits CSV results.

// Validation uses `!(x > 0.0)` so that NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chanmodel;
pub mod harness;
pub mod rng;
pub mod smm;
pub mod ssca;
pub mod sysmodel;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
