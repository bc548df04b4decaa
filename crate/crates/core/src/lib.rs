// `!(x > 0.0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detection;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod runner;
pub mod scoring;
pub mod signal;
pub mod synth;

pub use error::{Error, Result};
