//! Motion-artifact simulation for 2D MR k-space and correction by
//! outlier-rejecting bootstrap subsampling and aggregation.
//!
//! Motion between phase-encoding steps corrupts a sparse set of k-space
//! lines with phase errors. Random line subsampling drops many of those
//! lines; reconstructing each subsample and averaging the results yields an
//! estimate whose error is bounded by the mean branch error.

pub mod aggregate;
pub mod cli;
pub mod error;
pub mod fft;
pub mod io;
pub mod metrics;
pub mod motion;
pub mod phantom;
pub mod recon;
pub mod sampling;

pub use error::{Error, Result};
pub use fft::{Image, KSpace};
