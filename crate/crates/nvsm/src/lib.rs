//! File formats, statistics and the command-line pipeline around
//! [`nvsm_core`].

pub mod cli;
pub mod container;
pub mod error;
pub mod formats;
pub mod manifest;
pub mod pipeline;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
pub use nvsm_core as core;
