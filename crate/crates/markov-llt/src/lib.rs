//! Monte Carlo drivers, verification harnesses, configuration and the
//! `mllt` command line on top of `markov-llt-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod mc;
pub mod output;
pub mod verify;

pub use error::RunError;
