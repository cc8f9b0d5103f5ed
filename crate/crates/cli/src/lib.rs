//! Experiment harness behind the `qhash` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod sweep;

use qhash_core::Error as CoreError;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_AUDIT: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

/// Process exit status for a failed run.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<config::ConfigError>().is_some() {
        return EXIT_CONFIG;
    }
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::AuditViolation(_)) => EXIT_AUDIT,
        Some(CoreError::Numerical(_) | CoreError::RetryCapExceeded(_)) => EXIT_NUMERICAL,
        Some(_) => EXIT_CONFIG,
        None => 1,
    }
}
