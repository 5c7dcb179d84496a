use std::fmt;
use std::path::Path;

/// Process exit status of the tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    /// Bad arguments or config.
    Usage = 1,
    /// Divergence, instability or a singular system.
    Numerical = 2,
    Io = 3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: ExitKind::Usage,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError {
            kind: ExitKind::Numerical,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError {
            kind: ExitKind::Io,
            message: format!("{}: {err}", path.display()),
        }
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<dlza::Error> for CliError {
    fn from(e: dlza::Error) -> Self {
        use dlza::Error as E;
        let kind = match e {
            E::Diverged { .. } | E::Unstable { .. } | E::Singular(_) | E::NegativeVariance { .. } | E::NonFinite(_) => {
                ExitKind::Numerical
            }
            _ => ExitKind::Usage,
        };
        CliError {
            kind,
            message: e.to_string(),
        }
    }
}
