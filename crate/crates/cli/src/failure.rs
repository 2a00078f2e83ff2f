use hetcycle::Error;
use std::fmt;

/// Command failure carrying its process exit code.
#[derive(Debug)]
pub enum Failure {
    Check(String),
    Config(String),
    Resonance(String),
    Budget(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Check(_) | Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Resonance(_) => 3,
            Failure::Budget(_) => 4,
        }
    }

    /// Map a library error raised while setting a run up.
    pub fn from_setup(e: Error) -> Self {
        match e {
            Error::ResonanceGuard { .. } => Failure::Resonance(e.to_string()),
            Error::MeshExplosion(_) => Failure::Budget(e.to_string()),
            Error::InvalidInput(_) | Error::DomainError(_) | Error::WindowViolation { .. } => Failure::Config(e.to_string()),
            _ => Failure::Check(e.to_string()),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Check(m) => write!(f, "check failed: {m}"),
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Resonance(m) => write!(f, "resonance: {m}"),
            Failure::Budget(m) => write!(f, "resource budget exceeded: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

pub type CmdResult<T = ()> = std::result::Result<T, Failure>;
