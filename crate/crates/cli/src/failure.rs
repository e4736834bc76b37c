//! Command failures and their process exit codes.

use std::fmt;

use sortad::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Data,
    Training,
}

impl Kind {
    pub fn exit_code(self) -> u8 {
        match self {
            Kind::Config => 2,
            Kind::Data => 3,
            Kind::Training => 4,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Failure {
            kind: Kind::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure {
            kind: Kind::Data,
            message: message.into(),
        }
    }

    /// Errors reading, splitting or scoring data.
    pub fn from_data(e: Error) -> Self {
        Failure::data(e.to_string())
    }

    /// Errors while fitting. Bad input data stays a data error; everything
    /// else (selection failure, divergence, overflow) is a training error.
    pub fn from_fit(e: Error) -> Self {
        let kind = match root(&e) {
            Error::Data(_) | Error::Csv(_) | Error::Io { .. } => Kind::Data,
            _ => Kind::Training,
        };
        Failure {
            kind,
            message: e.to_string(),
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Failure::data(format!("{}: {e}", path.display()))
    }
}

fn root(e: &Error) -> &Error {
    match e {
        Error::Stage { source, .. } | Error::RowOverflow { source, .. } => root(source),
        other => other,
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self.kind {
            Kind::Config => "configuration error",
            Kind::Data => "data error",
            Kind::Training => "training error",
        };
        write!(f, "{label}: {}", self.message)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_errors_are_classified_through_stages() {
        let diverged = Error::TrainingDivergence {
            epoch: 1,
            batch: 2,
            loss: f64::NAN,
        };
        assert_eq!(Failure::from_fit(diverged).kind.exit_code(), 4);
        let wrapped = Error::Stage {
            stage: "scaling",
            source: Box::new(Error::Data("bad".into())),
        };
        assert_eq!(Failure::from_fit(wrapped).kind.exit_code(), 3);
        assert_eq!(Failure::from_data(Error::Data("x".into())).kind.exit_code(), 3);
    }
}
