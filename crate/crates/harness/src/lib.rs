//! Experiment orchestration for multi-reward multi-policy evaluation:
//! configuration, seeded runs, statistics, CSV output and the CLI.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod output;
pub mod pac;
pub mod stats;
pub mod sweep;
