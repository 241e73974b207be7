use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    /// A standing assumption on the dynamics does not hold (equilibrium,
    /// stability, simplicity, non-resonance, forward invariance).
    #[error("assumption violated: {0}")]
    Assumption(String),

    /// Observer synthesis failed (criteria, PBH, placement verification).
    #[error("synthesis failed: {0}")]
    Synthesis(String),

    #[error("simulation failed: {0}")]
    Simulation(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn assumption(msg: impl Into<String>) -> Self {
        Error::Assumption(msg.into())
    }

    pub fn synthesis(msg: impl Into<String>) -> Self {
        Error::Synthesis(msg.into())
    }

    pub fn simulation(msg: impl Into<String>) -> Self {
        Error::Simulation(msg.into())
    }

    /// Tag the error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    /// Process exit code: 2 validation, 3 assumption, 4 synthesis, 5 simulation.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::DimensionMismatch { .. } | Error::Validation(_) | Error::Config(_) => 2,
            Error::Assumption(_) => 3,
            Error::Synthesis(_) => 4,
            Error::Simulation(_) => 5,
            Error::Io(_) | Error::Stage { .. } => 1,
        }
    }
}
