//! Age-structured model of substance-use-disorder (SUD) mortality coupled to
//! an ensemble Kalman filter that assimilates annual overdose death counts.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod enkf;
pub mod error;
pub mod ingest;
pub mod model;
pub mod population;
pub mod scenario;
pub mod special;
pub mod synthetic;

pub use error::{Error, Result};
