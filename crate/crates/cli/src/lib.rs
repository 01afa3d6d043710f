//! Command implementations behind the `powerval` binary.
//!
//! Every command takes a [`manifest::RunManifest`] and returns an
//! [`commands::Outcome`]; exit codes are 0 for pass, 1 for a failed
//! validation or scenario, 2 for usage and input errors.

pub mod commands;
pub mod error;
pub mod manifest;

pub use commands::{cmd_plot, cmd_replay, cmd_scenario, cmd_synth, cmd_validate, Outcome, Status, SynthOptions};
pub use error::CliError;
pub use manifest::RunManifest;

pub const EXIT_USAGE: i32 = 2;
