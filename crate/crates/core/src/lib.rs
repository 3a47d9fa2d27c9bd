//! Directed polymers on Cayley trees and random tree source codes.
//!
//! The crate computes exact partition functions, internal energies and ground
//! states on lazily generated random trees ([`dprm`]), the closed-form
//! free-energy limit and its freezing transition ([`theory`]), the random
//! tree-code ensemble with its encoders, bit packing and delayless decoder
//! ([`treecode`]), and rate-distortion numerics used to check that the
//! ensemble's almost-sure distortion equals the distortion-rate function
//! ([`rd`]). Experiments and the CLI live in [`harness`].

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// reference constants in tests carry their full computed digits
#![cfg_attr(test, allow(clippy::excessive_precision))]

pub mod dprm;
pub mod error;
pub mod harness;
pub mod model;
pub mod rd;
pub mod rng;
pub mod stats;
pub mod theory;
pub mod treecode;

pub use error::{Error, Result};
