use std::fmt;

/// Process exit codes.
///
/// | code | meaning                                        |
/// |------|------------------------------------------------|
/// | 0    | success                                        |
/// | 1    | runtime failure (I/O, network, corrupt input)  |
/// | 2    | usage error (unknown flag or subcommand)       |
/// | 3    | validation failure (configuration rejected)    |
pub mod exit {
    pub const OK: i32 = 0;
    pub const RUNTIME: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const VALIDATION: i32 = 3;
}

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(anyhow::Error),
}

impl CliError {
    /// The reader of standard output went away (`ironstream export | head`).
    pub fn is_broken_pipe(&self) -> bool {
        let CliError::Runtime(e) = self else {
            return false;
        };
        e.chain().any(|c| {
            let io = c
                .downcast_ref::<std::io::Error>()
                .or(match c.downcast_ref::<ironstream::wire::SessionError>() {
                    Some(ironstream::wire::SessionError::Io(e)) => Some(e),
                    _ => None,
                });
            io.is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
        })
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => exit::VALIDATION,
            CliError::Runtime(_) => exit::RUNTIME,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => f.write_str(m),
            CliError::Runtime(e) => write!(f, "{e:#}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<ironstream::config::ConfigError> for CliError {
    fn from(e: ironstream::config::ConfigError) -> Self {
        use ironstream::config::ConfigError;
        match e {
            ConfigError::Invalid(_) | ConfigError::Parse { .. } => CliError::Validation(e.to_string()),
            ConfigError::Io { .. } => CliError::Runtime(e.into()),
        }
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
