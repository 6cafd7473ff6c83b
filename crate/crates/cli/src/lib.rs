//! Command-line front end for tplab: subcommand implementations and the verification suite.

pub mod commands;
pub mod manifest;
pub mod suite;
