use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("matrix is not symmetric positive definite (Cholesky pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("metric is not symmetric: asymmetry {asymmetry:e}")]
    NotSymmetric { asymmetry: f64 },
    #[error("vectors are linearly dependent (vector {index}, residual norm {residual:e})")]
    LinearlyDependent { index: usize, residual: f64 },
    #[error("operator is not self-adjoint in its metric (defect {defect:e})")]
    NotSelfAdjoint { defect: f64 },
    #[error("basis is not orthonormal (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },
    #[error("singular system in {context}")]
    Singular { context: &'static str },
    #[error("zero pivot in {context} at row {row}")]
    ZeroPivot { context: &'static str, row: usize },
    #[error("{context} did not converge after {iterations} iterations")]
    NonConvergence {
        context: &'static str,
        iterations: usize,
    },
    #[error("point is not an equilibrium: |f(x)| = {residual:e}")]
    NotEquilibrium { residual: f64 },
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },
    #[error("forward solve failed at iterate {iterate}: {source}")]
    ForwardSolve {
        iterate: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("stability routes disagree: Routh-Hurwitz says {routh}, Lyapunov certificate says {lyapunov}")]
    RouteDisagreement { routh: bool, lyapunov: bool },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable snake-case name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::NotSymmetric { .. } => "not_symmetric",
            Error::LinearlyDependent { .. } => "linearly_dependent",
            Error::NotSelfAdjoint { .. } => "not_self_adjoint",
            Error::NotOrthonormal { .. } => "not_orthonormal",
            Error::Singular { .. } => "singular",
            Error::ZeroPivot { .. } => "zero_pivot",
            Error::NonConvergence { .. } => "non_convergence",
            Error::NotEquilibrium { .. } => "not_equilibrium",
            Error::NonFinite { .. } => "non_finite",
            Error::ForwardSolve { .. } => "forward_solve",
            Error::RouteDisagreement { .. } => "route_disagreement",
            Error::InvalidArgument(_) => "invalid_argument",
        }
    }

    /// Numerical failures as opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::LinearlyDependent { .. }
                | Error::Singular { .. }
                | Error::ZeroPivot { .. }
                | Error::NonConvergence { .. }
                | Error::NonFinite { .. }
                | Error::ForwardSolve { .. }
                | Error::RouteDisagreement { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
