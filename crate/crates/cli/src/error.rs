use std::fmt;
use std::io;
use std::path::Path;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Failure classes, one process exit status each.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Input(String),
    Io(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Input(_) => 3,
            CliError::Io(_) => 4,
            CliError::Numeric(_) => 5,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn io_at(path: &Path, e: io::Error) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    /// Prefixes the message with `what`, keeping the class.
    pub fn context(self, what: impl fmt::Display) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{what}: {m}")),
            CliError::Input(m) => CliError::Input(format!("{what}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{what}: {m}")),
            CliError::Numeric(m) => CliError::Numeric(format!("{what}: {m}")),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<imbalab_core::Error> for CliError {
    fn from(e: imbalab_core::Error) -> Self {
        use imbalab_core::Error as E;
        match e {
            E::Config(m) => CliError::Config(m),
            E::Input(m) => CliError::Input(m),
            E::Numeric(m) => CliError::Numeric(m),
            E::Io(e) => CliError::Io(e.to_string()),
        }
    }
}

impl From<imbalab_bench::Error> for CliError {
    fn from(e: imbalab_bench::Error) -> Self {
        use imbalab_bench::Error as E;
        match e {
            E::Config(m) => CliError::Config(m),
            E::Input(m) => CliError::Input(m),
            e @ E::Io { .. } => CliError::Io(e.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            CliError::Io(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<toml::de::Error> for CliError {
    fn from(e: toml::de::Error) -> Self {
        CliError::Config(e.to_string().trim_end().to_string())
    }
}
