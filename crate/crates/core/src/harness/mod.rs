//! Configuration, execution, persistence and verification behind the CLI.
//!
//! Modules never write files; everything on disk goes through [`run`] or the
//! [`verify`] suites.

pub mod config;
pub mod manifest;
pub mod output;
pub mod runner;
pub mod verify;

pub use config::{Experiment, ExperimentConfig, OUT_ENV};
pub use manifest::RunManifest;
pub use runner::run;
pub use verify::{verify, Suite, SuiteReport, VerifySettings};
