//! Configuration, drivers and result files of the `closing-lab` binary.

pub mod config;
pub mod experiments;
pub mod output;
