//! Configuration and orchestration behind the `vdamp-cli` binary.

pub mod config;
pub mod experiment;
