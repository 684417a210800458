//! Mass partitions of weighted point sets by cones, fans, double wedges and
//! projectively transformed hyperplanes, with equivariance and degree
//! certificates.

mod cdf;
pub mod error;
pub mod geometry;
pub mod json;
pub mod masses;
pub mod plot;
pub mod projective;
pub mod regions;
pub mod solvers;
pub mod testmaps;

pub use error::{Error, Result};
