use std::fmt;

use chiralguide::Error;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or parameters: exit 2.
    Config(String),
    /// Solver or integrator failure: exit 3.
    Numerical(String),
    /// Some sweep points failed: exit 4.
    Partial(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Partial(_) => 4,
            CliError::Io(_) => 1,
        }
    }

    /// Wraps a core error, prefixed with the module that raised it.
    pub fn from_core(module: &str, e: Error) -> Self {
        let msg = format!("{module}: {e}");
        match e {
            Error::InvalidParameter { .. }
            | Error::RegimeViolation(_)
            | Error::WindowTooNarrow { .. }
            | Error::WrapAround { .. }
            | Error::DegenerateChirality { .. } => CliError::Config(msg),
            Error::NumericalFailure { .. }
            | Error::StepFailure { .. }
            | Error::PositivityLoss { .. }
            | Error::Instability { .. } => CliError::Numerical(msg),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Partial(m) => write!(f, "partial failure: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub trait CoreContext<T> {
    fn module(self, module: &str) -> Result<T, CliError>;
}

impl<T> CoreContext<T> for chiralguide::Result<T> {
    fn module(self, module: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::from_core(module, e))
    }
}
