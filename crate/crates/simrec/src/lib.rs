//! Files, artifacts, configuration, the command line and the HTTP service
//! around `simrec-core`.

pub mod artifact;
pub mod cli;
pub mod config;
mod error;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod service;

pub use error::{Error, Result};
