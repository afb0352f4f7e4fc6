//! Adaptive probabilistic data association for radio localization under
//! multipath and obstructed line-of-sight.
//!
//! The crate contains the measurement models, the particle-based
//! message-passing filter, a measurement-level simulator, CRLB utilities and
//! a Monte-Carlo experiment harness.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod crlb;
pub mod error;
pub mod filter;
pub mod harness;
pub mod likelihoods;
pub mod motion;
pub mod resample;
pub mod scanfile;
pub mod simulator;
pub mod special;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    los_distance, AgentState, AmplitudeParams, Anchor, LosGrid, Measurement, NlosParams, Scan, Vec2,
};
