//! Report generation for the `kernelspect` command.

mod cli;
pub mod report;
pub mod svg;
pub mod sweep;

pub use cli::{run, InvariantFailure, EXIT_INPUT, EXIT_INVARIANT, EXIT_OK};
