//! Uniform sampling on constrained regions by sequentially constrained Monte
//! Carlo, and space-filling designs built on the resulting samples.

pub mod cli;
pub mod config;
pub mod design;
pub mod dsl;
pub mod error;
pub mod geodesic;
pub mod normal;
pub mod output;
pub mod polygon;
pub mod region;
pub mod scmc;
pub mod svg;

pub use error::{Error, Result};
