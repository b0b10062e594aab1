//! Early-warning detection of shifts in information transfer.
//!
//! A target series is whitened against its own history, projected on lagged
//! covariates, and the conditional entropy of the residuals given the
//! projection is tracked over a sliding window. A weighted Shiryaev-Roberts
//! procedure on that entropy stream raises the alarms.

pub mod detector;
pub mod entropy;
pub mod error;
pub mod forest;
pub mod linalg;
pub mod linproj;
pub mod pipeline;
pub mod report;
pub mod seed;
pub mod series;
pub mod simlab;
pub mod window;

pub use error::{EwsError, Result};
