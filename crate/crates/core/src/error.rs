use thiserror::Error;

/// Every failure the engine can report. Values are cheap to clone so they can
/// travel through stream error channels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid distribution parameters: {0}")]
    Domain(String),
    #[error("incompatible supports: {0}")]
    IncompatibleSupport(String),
    #[error("zero-measure product: {0}")]
    ZeroMeasure(String),
    #[error("undefined moment: {0}")]
    UndefinedMoment(String),
    #[error("no rule registered for {0}")]
    NoRule(String),
    #[error("ambiguous rule registration: {0}")]
    AmbiguousRule(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("{0}")]
    Fault(String),
    #[error("wiring failed: {0}")]
    Wiring(String),
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for failures that stem from the rule table or graph wiring
    /// rather than from user input.
    pub fn is_wiring(&self) -> bool {
        matches!(self, Error::NoRule(_) | Error::AmbiguousRule(_) | Error::Wiring(_))
    }

    /// Same variant with `ctx` prepended to the message.
    pub fn context(self, ctx: &str) -> Self {
        let add = |m: String| format!("{ctx}: {m}");
        match self {
            Error::Domain(m) => Error::Domain(add(m)),
            Error::IncompatibleSupport(m) => Error::IncompatibleSupport(add(m)),
            Error::ZeroMeasure(m) => Error::ZeroMeasure(add(m)),
            Error::UndefinedMoment(m) => Error::UndefinedMoment(add(m)),
            Error::NoRule(m) => Error::NoRule(add(m)),
            Error::AmbiguousRule(m) => Error::AmbiguousRule(add(m)),
            Error::Precondition(m) => Error::Precondition(add(m)),
            Error::Fault(m) => Error::Fault(add(m)),
            Error::Wiring(m) => Error::Wiring(add(m)),
            Error::Config { path, message } => Error::Config { path, message: add(message) },
            Error::Numerical(m) => Error::Numerical(add(m)),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
