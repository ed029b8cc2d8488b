//! CLI error type with stable exit codes and single-line rendering.

use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io(_) => EXIT_IO,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }
}

/// Maps a core error to an exit class, tagged with the module it came from.
pub fn from_core(module: &str, err: learncurve::Error) -> CliError {
    use learncurve::Error as E;
    let msg = format!("{module}: {err}");
    match err {
        E::InvalidArgument(_) | E::DegenerateSpec(_) => CliError::Config(msg),
        E::Numerical(_) | E::Divergence { .. } => CliError::Numerical(msg),
        E::Parse { .. } | E::Validation(_) | E::Io(_) => CliError::Io(msg),
        E::Trajectory { source, index } => {
            let mapped = from_core(module, *source);
            let text = format!("{module}: trajectory {index}: {}", mapped);
            match mapped {
                CliError::Config(_) => CliError::Config(text),
                CliError::Numerical(_) => CliError::Numerical(text),
                CliError::Io(_) => CliError::Io(text),
            }
        }
    }
}

pub fn io_err(context: &str, err: std::io::Error) -> CliError {
    CliError::Io(format!("{context}: {err}"))
}
