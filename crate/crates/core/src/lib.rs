//! Survival-analysis tools for single-arm trials compared against a
//! historical control cohort.

pub mod design;
pub mod error;
pub mod inflation;
pub mod logrank;
pub mod normal;
pub mod quadrature;
pub mod simulation;
pub mod step;
pub mod survival;
pub mod tables;

pub use error::{Error, Result};
