//! Experiment driver for toral relaxation times.

pub mod acceptance;
pub mod commands;
pub mod config;
pub mod emit;
pub mod sweep;
pub mod table;

pub use config::ExperimentConfig;
pub use sweep::{fit_rate, run_sweep, ResultRow};

pub const THREADS_ENV: &str = "TORAL_RELAX_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] toral_relax::Error),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("acceptance failure: {0}")]
    Acceptance(String),
}

impl CliError {
    /// 1 config, 2 numerical, 3 acceptance; unwritable output counts as a configuration problem.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Acceptance(_) => 3,
        }
    }
}

/// Worker count: explicit flag, then TORAL_RELAX_THREADS, then the config, then the hardware default (0).
pub fn resolve_threads(flag: Option<usize>, env: Option<&str>, config: usize) -> Result<usize, CliError> {
    if let Some(k) = flag {
        return Ok(k);
    }
    if let Some(v) = env.map(str::trim).filter(|v| !v.is_empty()) {
        return v.parse().map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}")));
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_precedence() {
        assert_eq!(resolve_threads(Some(3), Some("5"), 7).unwrap(), 3);
        assert_eq!(resolve_threads(None, Some("5"), 7).unwrap(), 5);
        assert_eq!(resolve_threads(None, Some(" "), 7).unwrap(), 7);
        assert_eq!(resolve_threads(None, None, 0).unwrap(), 0);
        assert!(matches!(resolve_threads(None, Some("x"), 0), Err(CliError::Config(_))));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 1);
        assert_eq!(CliError::Numerical(toral_relax::Error::NoConvergence("x".into())).exit_code(), 2);
        assert_eq!(CliError::Acceptance("x".into()).exit_code(), 3);
    }
}
