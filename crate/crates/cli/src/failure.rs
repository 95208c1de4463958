//! Exit-status classes: 1 for configuration, 2 for input data, 3 for a
//! violated internal invariant.

use std::fmt;
use std::process::ExitCode;

use exea_core::Error;

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Data(String),
    Invariant(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
            Failure::Invariant(m) => write!(f, "invariant violated: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(_) | Error::DegenerateConfig(_) | Error::InvalidHop(_) => Failure::Config(e.to_string()),
            Error::Invariant(m) => Failure::Invariant(m),
            other => Failure::Data(other.to_string()),
        }
    }
}

fn class(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return match f {
                Failure::Config(_) => 1,
                Failure::Data(_) => 2,
                Failure::Invariant(_) => 3,
            };
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::InvalidConfig(_) | Error::DegenerateConfig(_) | Error::InvalidHop(_) => 1,
                Error::Invariant(_) => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    3
}

pub fn report(err: &anyhow::Error) -> ExitCode {
    eprintln!("error: {err:#}");
    ExitCode::from(class(err))
}
