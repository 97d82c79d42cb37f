//! Reconfigurable MDI/QKD three-node network simulation with finite-key
//! decoy-state analysis and quantum digital signature distillation.
//!
//! The crate is layered bottom-up:
//!
//! * [`mathkit`]: entropy, concentration bounds, Poisson statistics and a
//!   small bounded LP solver.
//! * [`channel`]: ground-truth photon-number yield models and count synthesis.
//! * [`counts`]: count tables, the interchange format between simulation and
//!   analysis (JSON and CSV).
//! * [`decoy`]: decoy-state single-photon bounds with finite-size widening.
//! * [`keyrate`]: secure key length and rate sweeps.
//! * [`qds`]: signature distillation, multi-block extraction and the
//!   sign/transfer/verify flows.
//! * [`netsim`]: the three-party slot simulator and classical channel.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod counts;
pub mod decoy;
pub mod error;
pub mod keyrate;
pub mod mathkit;
pub mod netsim;
pub mod qds;

pub use error::{Error, Result};
pub use mathkit::{FailureBudget, Probability};
