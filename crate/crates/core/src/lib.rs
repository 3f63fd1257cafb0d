//! Exact walk tables, renewal quantities and percolation Monte Carlo for
//! finite connections in two-dimensional bond percolation.

pub mod enumerate;
pub mod experiments;
pub mod error;
pub mod halfline;
pub mod perc;
pub mod renewal;
pub mod steplaw;
pub mod theorems;
pub mod walk1d;
pub mod walk3d;
pub mod weight;

pub use error::{Error, Result};
