//! Error types shared across the simulation pipeline.

use thiserror::Error;

/// Everything that can go wrong between a trap configuration and a finished
/// observable.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("equilibrium solver stalled after {iterations} iterations (residual {residual:.3e})")]
    SolverFailure { iterations: usize, residual: f64 },

    #[error(
        "zigzag instability: transverse mode {mode} has stiffness {stiffness:.6e} <= 0; \
         the chain is not linear at these parameters"
    )]
    ZigzagInstability { mode: usize, stiffness: f64 },

    #[error(
        "beatnote resonance: mu = {mu} MHz is {detuning:.3e} MHz from phonon mode {mode} \
         at {omega:.6} MHz (minimum detuning 1e-6 MHz)"
    )]
    BeatnoteResonance {
        mu: f64,
        mode: usize,
        omega: f64,
        detuning: f64,
    },

    #[error("power-law fit requires at least two distinct separations with nonzero couplings")]
    DegenerateFit,

    #[error("cannot normalize a coupling matrix whose pair sum is zero")]
    ZeroCouplingSum,

    #[error("eigensolver did not converge: {0}")]
    Eigensolver(String),

    #[error("integrator step underflow at t = {t:.6e} (step {step:.3e}); system too stiff")]
    StiffIntegration { t: f64, step: f64 },

    #[error("site indices must differ (both were {0})")]
    EqualSites(usize),

    #[error("site index {index} out of range for {n} sites")]
    SiteOutOfRange { index: usize, n: usize },

    #[error("full-state oracle capped at N = 12 sites; got N = {0}")]
    OracleTooLarge(usize),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Stable process exit code per error category, used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 3,
            Error::EqualSites(_) | Error::SiteOutOfRange { .. } | Error::OracleTooLarge(_) => 4,
            Error::ZigzagInstability { .. }
            | Error::BeatnoteResonance { .. }
            | Error::DegenerateFit
            | Error::ZeroCouplingSum => 5,
            Error::SolverFailure { .. }
            | Error::Eigensolver(_)
            | Error::StiffIntegration { .. } => 6,
            Error::Io(_) => 7,
        }
    }

    /// Short machine-readable category name for JSON summaries.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "config",
            Error::EqualSites(_) | Error::SiteOutOfRange { .. } | Error::OracleTooLarge(_) => {
                "argument"
            }
            Error::ZigzagInstability { .. } => "zigzag-instability",
            Error::BeatnoteResonance { .. } => "beatnote-resonance",
            Error::DegenerateFit => "degenerate-fit",
            Error::ZeroCouplingSum => "zero-coupling-sum",
            Error::SolverFailure { .. } => "solver-failure",
            Error::Eigensolver(_) => "eigensolver",
            Error::StiffIntegration { .. } => "stiff-integration",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
