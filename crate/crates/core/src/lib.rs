#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod paths;
pub mod potentials;
pub mod quad;
pub mod rng;
pub mod runner;
pub mod spectral;
pub mod stable;
pub mod stats;

pub use error::{Error, Result};
