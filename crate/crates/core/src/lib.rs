//! Optimized honest confidence intervals for regression kink and discontinuity designs.

pub mod cli;
pub mod domain;
pub mod error;
pub mod estimate;
pub mod fuzzy;
pub mod grid;
pub mod localpoly;
pub mod numeric;
pub mod optimizer;
pub mod simbench;
pub mod smoothness;
pub mod variance;

pub use domain::{HonestInterval, Order, Sample, Shape, SmoothnessSpec};
pub use error::{Error, Result};
