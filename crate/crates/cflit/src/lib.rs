//! Co-simulation of over-the-air federated learning coexisting with uplink
//! information transfer in an OFDM system.
//!
//! A set of learning devices aggregates model updates analogously over shared
//! subcarriers while transfer devices stream data over the remaining ones.
//! The crate provides:
//!
//! - [`channel`]: block-fading Rayleigh channel grids and the order
//!   statistics of the best per-block transfer gain.
//! - [`aircomp`]: update normalization, minimum-MSE transceiver scalars,
//!   noisy analog aggregation, and its error in closed form.
//! - [`learning`]: the synthetic heterogeneous classification task, clipped
//!   local SGD, and empirical estimation of the task constants.
//! - [`hyperopt`]: the convergence bound with closed-form optimal local-step
//!   count and round budget.
//! - [`allocation`]: threshold-based online subcarrier allocation with exact
//!   feasibility, the offline optimum, and a randomized baseline.
//! - [`rates`]: per-block and average transfer rates plus their closed-form
//!   expectations under Rayleigh fading.
//! - [`harness`]: configuration, the end-to-end simulation pipeline, and an
//!   experiment registry that writes CSV/JSON outputs.
//!
//! The `examples/` directory has one runnable example per capability; the
//! `cflit` binary exposes the same pipeline as subcommands.

// `!(x > 0.0)` is used deliberately where NaN must be rejected along with
// the out-of-range values; `x <= 0.0` would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aircomp;
pub mod allocation;
pub mod channel;
pub mod error;
pub mod harness;
pub mod hyperopt;
pub mod learning;
pub mod rates;
pub mod rng;

pub use error::{Error, Result};
