//! Bayesian wavelet shrinkage in warped bases for random-design regression.
//!
//! The pipeline: sample a design ([`design`]), compute empirical warped
//! coefficients ([`coefficients`]) with tabulated wavelets ([`wavelet`]),
//! shrink them ([`shrinkage`]) and reconstruct. [`harness`] drives the
//! Monte-Carlo study, [`config`] and [`report`] handle files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod config;
pub mod design;
pub mod error;
pub mod function_spaces;
pub mod harness;
pub mod numeric;
pub mod report;
pub mod shrinkage;
pub mod signals;
pub mod wavelet;

pub use error::{Error, Result};
