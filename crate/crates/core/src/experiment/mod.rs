//! Scenario description and the trial runners behind the CLI. Each trial
//! builds a fresh world from its own seed and reduces the record log to rows.

mod runs;
mod scenario;

pub use runs::*;
pub use scenario::*;
