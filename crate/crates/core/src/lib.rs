//! Monitoring of nonlinear functional profiles with Fréchet means under the
//! shape-invariant deformation model.
//!
//! Phase I ([`frechet`]) estimates an in-control template curve `f0` from a
//! training set, jointly with per-curve amplitude and phase deformation
//! parameters. Phase II ([`ewma`]) registers each new curve against `f0`
//! ([`sim`]), updates EWMA-type charts for the profile, its deviance and
//! its deformation parameters, and flags out-of-control observations.

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli_io;
pub mod curve;
pub mod error;
pub mod ewma;
pub mod frechet;
pub mod optim;
pub mod sim;
pub mod synth;

pub use curve::{l2_distance, l2_inner, resample, SampledCurve, TimeGrid};
pub use error::{Error, Result};
pub use sim::{RegisterConfig, RegistrationResult, SimParams};
