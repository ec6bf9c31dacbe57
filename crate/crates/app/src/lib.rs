//! Batch commands and the live experiment service.

pub mod cli;
pub mod commands;
pub mod error;
pub mod server;

pub use error::{AppError, Result};
