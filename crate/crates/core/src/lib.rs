pub mod bounds;
pub mod cli;
pub mod error;
pub mod gnn;
pub mod metric;
pub mod operator;
pub mod rng;
pub mod signal;

pub use error::{Error, Result};
