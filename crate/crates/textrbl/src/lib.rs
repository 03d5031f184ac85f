//! Frame IO, JSON annotation documents, the `textrbl` command line and the
//! HTTP annotation service, built on `textrbl-core`.

pub mod cli;
pub mod config;
pub mod document;
pub mod error;
pub mod frames;
pub mod service;

pub use error::{Error, ErrorBody, Result};
