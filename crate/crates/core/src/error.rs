use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent or invalid configuration (timescales, delays, grids).
    #[error("configuration error: {0}")]
    Config(String),
    /// A caller broke a documented precondition (shapes, ranges, indices).
    #[error("contract violation: {0}")]
    Contract(String),
    /// Input outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Non-finite or overflowing state during integration.
    #[error("integration diverged at step {step} (t = {time})")]
    Divergence { step: usize, time: f64 },
    /// Normal equations are singular.
    #[error("rank-deficient system: {0}")]
    RankDeficient(String),
    /// An iterative method failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// An unstable recursion or dynamical system.
    #[error("instability: {0}")]
    Instability(String),
    /// Analysis requested for dynamics it does not cover.
    #[error("unsupported analysis: {0}")]
    Unsupported(String),
    /// An error tagged with the pipeline stage that produced it.
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

/// Broad error classes, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Configuration,
    Numerical,
}

impl Error {
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Strips stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self.root() {
            Error::Config(_) | Error::Contract(_) | Error::Domain(_) | Error::Unsupported(_) => {
                ErrorClass::Configuration
            }
            _ => ErrorClass::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at_stage(stage))
    }
}
