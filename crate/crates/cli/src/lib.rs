//! Command-line front end for `goalpred`: configuration, the prediction log
//! format and the command implementations.

pub mod commands;
pub mod config;
pub mod log;
