#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod cli;
pub mod config;
pub mod io;
pub mod oracles;

pub use starscatter_core as core;

/// Failures of a command run. Configuration and file problems exit with 2,
/// errors raised by the numerics with 1.
#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Domain(#[from] starscatter_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Domain(_) => 1,
            AppError::Config(_) | AppError::Io(_) => 2,
        }
    }
}
