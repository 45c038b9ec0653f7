// `!(x > 0.0)` deliberately rejects NaN; index loops couple several arrays.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod dtn;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod harness;
pub mod pipeline;
pub mod problems;
pub mod quadrature;
pub mod source;
pub mod spectral;
pub mod squad;

pub use error::{Error, Result};
