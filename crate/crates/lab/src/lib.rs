//! Configuration, file formats and command implementations for the `butterfly-lab` binary.

pub mod commands;
pub mod config;
pub mod output;
