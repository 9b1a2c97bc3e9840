use thiserror::Error;

/// Errors produced by the simulation layers.
///
/// Variants split into configuration problems (bad labels, shapes, or
/// parameter ranges) and numerical failures (truncation too small,
/// ill-conditioned inversion). The CLI maps the former to exit code 2 and
/// the latter to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(
        "Fock cutoff too small: truncated tail mass {tail:.3e} exceeds tolerance {tol:.3e}; \
         the smallest adequate cutoff is N_max = {required}"
    )]
    CutoffTooSmall {
        tail: f64,
        tol: f64,
        required: usize,
    },

    #[error(
        "Fock boundary populated: top level holds {population:.3e} (> {tol:.3e}) after evolution; \
         increase the cutoff"
    )]
    BoundaryPopulated { population: f64, tol: f64 },

    #[error("ill-posed reconstruction grid: {0}; extend the time span or add grid points")]
    IllPosedGrid(String),
}

impl Error {
    /// True for failures of numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::CutoffTooSmall { .. } | Error::BoundaryPopulated { .. } | Error::IllPosedGrid(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
