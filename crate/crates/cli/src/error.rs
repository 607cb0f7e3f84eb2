use std::io;
use thiserror::Error;

use pmqkd_fock::FockError;

/// Errors surfaced by the CLI, each with a fixed exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, configuration or input files. Exit code 2.
    #[error("{0}")]
    Config(String),

    /// The data cannot support an estimate. Exit code 3.
    #[error("{0}")]
    Degenerate(String),

    /// Anything else, including failed verification checks. Exit code 1.
    #[error("{0}")]
    Failed(String),

    /// The reader of stdout went away. Ends the command quietly with exit code 0.
    #[error("output closed")]
    Closed,
}

impl CliError {
    pub fn invalid(field: &str, reason: impl std::fmt::Display) -> Self {
        CliError::Config(format!("invalid `{field}`: {reason}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Closed => 0,
            CliError::Failed(_) => 1,
            CliError::Config(_) => 2,
            CliError::Degenerate(_) => 3,
        }
    }
}

impl From<pmqkd::Error> for CliError {
    fn from(e: pmqkd::Error) -> Self {
        use pmqkd::Error as E;
        if let Some(kind) = io_kind(&e) {
            return io_failure(kind, &e);
        }
        match e {
            E::InvalidParameter { .. } | E::Parse(_) | E::Csv(_) => CliError::Config(e.to_string()),
            E::DegenerateData(_) | E::DegenerateChannel | E::BudgetExceeded { .. } => {
                CliError::Degenerate(e.to_string())
            }
            E::Domain { .. } | E::Io(_) => CliError::Failed(e.to_string()),
        }
    }
}

impl From<FockError> for CliError {
    fn from(e: FockError) -> Self {
        if let Some(kind) = io_kind(&e) {
            return io_failure(kind, &e);
        }
        match e {
            FockError::Model(m) => m.into(),
            FockError::Domain { .. } | FockError::Truncation { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Failed(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        io_failure(e.kind(), &e)
    }
}

fn io_failure(kind: io::ErrorKind, e: &dyn std::fmt::Display) -> CliError {
    match kind {
        io::ErrorKind::BrokenPipe => CliError::Closed,
        _ => CliError::Failed(e.to_string()),
    }
}

/// Kind of the I/O error at the root of `e`, if any. Write failures reach the
/// CLI wrapped in CSV or model errors.
fn io_kind(e: &(dyn std::error::Error + 'static)) -> Option<io::ErrorKind> {
    let mut current = Some(e);
    while let Some(err) = current {
        if let Some(io) = err.downcast_ref::<io::Error>() {
            return Some(io.kind());
        }
        if let Some(pmqkd::Error::Io(io)) = err.downcast_ref::<pmqkd::Error>() {
            return Some(io.kind());
        }
        if let Some(FockError::Io(io)) = err.downcast_ref::<FockError>() {
            return Some(io.kind());
        }
        current = err.source();
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Failing(io::ErrorKind);

    impl io::Write for Failing {
        fn write(&mut self, _: &[u8]) -> io::Result<usize> {
            Err(self.0.into())
        }
        fn flush(&mut self) -> io::Result<()> {
            Ok(())
        }
    }

    fn write_error(kind: io::ErrorKind) -> CliError {
        let table = pmqkd::decoy::TallyTable::new(16);
        let mut w = Failing(kind);
        table.write_csv(&mut w).map_err(CliError::from).unwrap_err()
    }

    #[test]
    fn write_failures_map_by_io_kind() {
        assert!(matches!(
            write_error(io::ErrorKind::BrokenPipe),
            CliError::Closed
        ));
        let e = write_error(io::ErrorKind::StorageFull);
        assert_eq!(e.exit_code(), 1, "{e}");
    }

    #[test]
    fn parse_failures_are_configuration_errors() {
        let e: CliError = pmqkd::decoy::TallyTable::read_csv("setting,j_s\nx,y\n".as_bytes())
            .unwrap_err()
            .into();
        assert_eq!(e.exit_code(), 2, "{e}");
    }
}
