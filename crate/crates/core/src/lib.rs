//! Cooperative spectrum sharing between D2D pairs and cell-edge users.
//!
//! Each candidate CEU / D2D pairing is priced with a two-stage leader/follower
//! game: the CEU sets a price for its licensed channel and the D2D pair picks
//! how much of the frame it spends relaying CEU traffic. The per-pair
//! equilibria feed preference lists, and a CEU-proposing deferred acceptance
//! forms a stable one-to-one matching. The [`simulation`] module runs the
//! Monte Carlo sweeps comparing this against two baselines.
//!
//! Modules, bottom-up:
//!
//! - [`channel`]: node placement and pathloss / exponential fading gains
//! - [`rates`]: direct, decode-and-forward and D2D link rates
//! - [`stackelberg`]: per-pair pricing equilibrium and its grid oracle
//! - [`matching`]: preference construction, deferred acceptance, stability checks
//! - [`simulation`]: drops, schemes and sweep aggregation
//! - [`config`], [`report`], [`verify`], [`cli`]: the command line front end

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod matching;
pub mod rates;
pub mod report;
pub mod simulation;
pub mod stackelberg;
pub mod verify;

pub use error::{Error, Result};

/// Absolute tolerance for zero tests on utilities and rate thresholds.
pub const ZERO_TOL: f64 = 1e-9;
