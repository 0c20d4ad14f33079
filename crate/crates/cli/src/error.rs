use std::fmt;

use endodemand::Error;

#[derive(Debug)]
pub enum CliError {
    Library(Error),
    /// Bad arguments, unreadable or malformed input.
    Input(String),
    Output(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Library(e) if e.is_convergence_failure() => 3,
            CliError::Library(_) | CliError::Input(_) => 2,
            CliError::Output(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Library(e) => write!(f, "{e}"),
            CliError::Input(msg) => f.write_str(msg),
            CliError::Output(e) => write!(f, "cannot write output: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Library(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let stuck = CliError::from(Error::NonConvergence {
            iterations: 3,
            residuals: vec![1.0],
        });
        assert_eq!(stuck.exit_code(), 3);
        assert_eq!(CliError::from(Error::SpaceMismatch).exit_code(), 2);
        assert_eq!(CliError::Input("x".into()).exit_code(), 2);
    }
}
