use std::fmt;

/// Exit code for unreadable or malformed inputs.
pub const EXIT_BAD_INPUT: u8 = 2;
/// Exit code for failures after the inputs were accepted.
pub const EXIT_RUNTIME: u8 = 1;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub trait Classify<T> {
    fn bad_input(self, what: impl fmt::Display) -> CliResult<T>;
    fn runtime(self, what: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn bad_input(self, what: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| CliError {
            code: EXIT_BAD_INPUT,
            error: e.into().context(what.to_string()),
        })
    }

    fn runtime(self, what: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| CliError {
            code: EXIT_RUNTIME,
            error: e.into().context(what.to_string()),
        })
    }
}
