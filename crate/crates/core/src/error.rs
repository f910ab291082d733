use alloc::boxed::Box;
use alloc::string::String;

use thiserror::Error;

use crate::orchestrator::SpeedReport;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("malformed coefficients: {0}")]
    MalformedCoefficients(String),
    #[error("assumption violated: {0}")]
    AssumptionViolated(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("Dg/(s - {base}) is not integrable at the base point")]
    NonIntegrableSingularity { base: f64 },
    #[error("complex local slopes at {gamma} for c = {c} (discriminant {discriminant})")]
    ComplexRoots { gamma: f64, c: f64, discriminant: f64 },
    #[error("no admissible local slope at {end} for c = {c}")]
    NoAdmissibleLocalSlope { end: f64, c: f64 },
    #[error("integration step failure at phi = {phi}")]
    StepFailure { phi: f64 },
    #[error("no solvability change inside the widened bracket [{lo}, {hi}]")]
    BracketInconsistent { lo: f64, hi: f64 },
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),
    #[error("flux mismatch at junction {junction}: s - l = {mismatch}")]
    FluxMismatch { junction: f64, mismatch: f64 },
    #[error("speed {c} is below the critical speed {threshold}")]
    NotAdmissible { c: f64, threshold: f64, report: Box<SpeedReport> },
    #[error("test function support [{lo}, {hi}] is not covered by the profile")]
    SupportNotCovered { lo: f64, hi: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;
