//! Command-line front end for `ist-core`: configuration, thread-pool
//! execution, file formats, run manifests and the acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod error;
pub mod exec;
pub mod formats;
pub mod output;
pub mod stats;
