// Index loops mirror the matrix algorithms; `!(a < b)` is deliberate NaN handling.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod bo;
pub mod chebapprox;
pub mod error;
pub mod gp;
pub mod harness;
pub mod optimize;
pub mod separable_extrema;
pub mod tsroots;
pub mod spectral_prior;

pub use error::{Error, Result};
