//! Configuration parsing and the `forward`, `reconstruct`, `validate` and
//! `kernel` subcommands of the `neumann` binary.

// Negated comparisons reject NaN; coordinate loops index several
// fixed-size arrays at once.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod commands;
pub mod config;
pub mod error;

pub use config::{parse_config, RunConfig};
pub use error::CliError;
