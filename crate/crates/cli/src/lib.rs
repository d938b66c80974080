//! Problem files, run orchestration and artifact export for the `reachnet`
//! command-line tool.

pub mod error;
pub mod run;
pub mod schema;

pub use error::CliError;
pub use run::{execute, run, Mode, Report, RunConfig, Task};
pub use schema::{load_spec, parse_spec, serialize_spec, Problem};
