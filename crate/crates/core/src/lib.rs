//! Finite-blocklength network availability of cell-free, cellular and
//! small-cell Massive MIMO.

pub mod channel;
pub mod config;
pub mod error;
pub mod geometry;
pub mod pilot;
pub mod processing;
pub mod report;
pub mod seed;
pub mod selftest;
pub mod sim;

pub use config::{SMode, SimConfig};
pub use error::{Error, Result};
pub use geometry::Mode;
pub use processing::Scheme;
