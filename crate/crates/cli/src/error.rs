use std::fmt;

use acoustic_fdtd::solver::SolverError;

/// What went wrong, as far as the exit status is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    /// Bad scene file, flag value or parameter combination.
    Config,
    /// The solver produced non-finite values.
    Unstable,
    /// Filesystem problems and missing or malformed run data.
    Io,
    /// A validation run finished but missed its accuracy bounds.
    Bound,
}

impl FailureKind {
    pub fn exit_code(self) -> u8 {
        match self {
            FailureKind::Config => 1,
            FailureKind::Unstable => 2,
            FailureKind::Io => 3,
            FailureKind::Bound => 4,
        }
    }
}

/// Exit status for command-line usage errors.
pub const USAGE_EXIT: u8 = 64;

#[derive(Debug)]
pub struct Failure {
    pub kind: FailureKind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(kind: FailureKind, error: impl Into<anyhow::Error>) -> Self {
        Self { kind, error: error.into() }
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        Self::new(FailureKind::Config, anyhow::anyhow!("{msg}"))
    }

    pub fn io(msg: impl fmt::Display) -> Self {
        Self::new(FailureKind::Io, anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> u8 {
        self.kind.exit_code()
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

fn classify(e: &acoustic_fdtd::Error) -> FailureKind {
    use acoustic_fdtd::Error as E;
    match e {
        E::Solver(SolverError::Unstable { .. }) => FailureKind::Unstable,
        E::Scene(_) | E::Signal(_) | E::Solver(_) => FailureKind::Config,
        E::Validation(acoustic_fdtd::validation::ValidationError::Csv(_)) => FailureKind::Io,
        E::Validation(_) => FailureKind::Config,
        E::Ir(_) | E::Io(_) => FailureKind::Io,
    }
}

impl From<acoustic_fdtd::Error> for Failure {
    fn from(e: acoustic_fdtd::Error) -> Self {
        Self::new(classify(&e), e)
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        acoustic_fdtd::Error::from(e).into()
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::new(FailureKind::Io, e)
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Attaches a kind and a message to any error.
pub trait Context<T> {
    fn kind(self, kind: FailureKind, msg: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Context<T> for Result<T, E> {
    fn kind(self, kind: FailureKind, msg: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| Failure::new(kind, e.into().context(msg.to_string())))
    }
}

/// Keeps the kind of an existing failure while adding a message.
pub trait FailureContext<T> {
    fn context(self, msg: impl fmt::Display) -> CliResult<T>;
}

impl<T, E: Into<Failure>> FailureContext<T> for Result<T, E> {
    fn context(self, msg: impl fmt::Display) -> CliResult<T> {
        self.map_err(|e| {
            let f: Failure = e.into();
            Failure::new(f.kind, f.error.context(msg.to_string()))
        })
    }
}
