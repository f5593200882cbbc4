//! Experiment driver behind the `ccpr` binary.

pub mod commands;
pub mod config;
