//! Scenario files, parallel trial execution and CSV reports on top of
//! `lorasim-core`.

pub mod report;
pub mod run;
pub mod scenario;

pub use scenario::Experiment;
