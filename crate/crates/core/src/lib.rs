//! Truncated distributions built from skewing functions: moments, variance
//! identities and bounds, limiting behaviour, and an empirical pipeline that
//! rebuilds the σ/ℓ curve from tick returns.

pub mod asymptotics;
pub mod bounds;
pub mod cli;
pub mod empirical;
pub mod error;
pub mod format;
pub mod moments;
pub mod quadrature;
pub mod selftest;
pub mod skewing;
pub mod specfun;
pub mod truncated;

pub use error::{Error, Result};
pub use skewing::{CValue, SkewingFunction};
pub use truncated::{SymmetricTruncated, TruncatedDistribution};
