//! Sparse VAR network discovery with false discovery rate control.
//!
//! Pipeline: row-wise lasso, CLIME precision for the lagged design,
//! debiasing, t-statistics, and a threshold chosen either from the normal
//! approximation or from a fixed-design wild bootstrap.

pub mod bootstrap;
pub mod clime;
pub mod debias;
pub mod error;
pub mod evaluation;
pub mod lasso;
pub mod model;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod testing;

pub use error::{Error, LassoError, Result};
