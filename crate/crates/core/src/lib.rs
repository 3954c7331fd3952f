//! Reduced-order models of multi-variable spatio-temporal fields: POD
//! compression plus LSTM / Conv1D forecasters of the temporal coefficients.

// `!(x > 0.0)` checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod binio;
pub mod data;
pub mod error;
pub mod forecast;
pub mod neuralnet;
pub mod pod;
pub mod rom;

pub use error::{ErrorClass, Result, RomError, Stage};
