//! Library side of the `picnn` command-line tool.

pub mod commands;
pub mod config;
pub mod verify;
