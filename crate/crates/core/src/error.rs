use thiserror::Error;

/// Failure classes shared by every solver stage.
///
/// The CLI maps these onto exit codes through [`Error::class`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("fluid layer collapses: min(eta + h - b) = {min_thickness:.3e}")]
    LayerCollapse { min_thickness: f64 },

    #[error("singular kernel evaluation at dx = {dx}, y = y' = {y}")]
    SingularPoint { dx: f64, y: f64 },

    #[error("evaluation point (x = {x:.4}, y = {y:.4}) is within {distance:.2e} of the bottom")]
    NearBoundary { x: f64, y: f64, distance: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e}, tolerance {tol:.1e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
        tol: f64,
    },

    #[error("bottom-trace iteration diverged: residual {residual:.3e} stalled above {tol:.1e}")]
    Divergence { residual: f64, tol: f64 },

    #[error("speed c = {c} lies in the excluded interval ({lower:.6}, {upper:.6}) around c_{k}")]
    Inadmissible {
        c: f64,
        k: usize,
        lower: f64,
        upper: f64,
    },

    #[error("resolution exhausted: {0}")]
    Resolution(String),

    #[error("reduced Hamiltonian has fewer than two extrema (oscillation {oscillation:.3e})")]
    FewerThanTwoExtrema { oscillation: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse grouping of [`Error`] variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Convergence,
    Resolution,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Validation(_) | Error::SingularPoint { .. } => ErrorClass::Validation,
            Error::LayerCollapse { .. }
            | Error::Convergence { .. }
            | Error::Divergence { .. }
            | Error::Inadmissible { .. }
            | Error::FewerThanTwoExtrema { .. } => ErrorClass::Convergence,
            Error::NearBoundary { .. } | Error::Resolution(_) => ErrorClass::Resolution,
            Error::Io(_) | Error::Json(_) => ErrorClass::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
