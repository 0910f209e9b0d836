use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("no stationary sign draw within {attempts} redraws (n={n}, m={m}, rho={rho})")]
    RedrawLimit {
        attempts: usize,
        n: usize,
        m: usize,
        rho: f64,
    },

    #[error("coefficient matrix is not stationary: companion spectral radius {radius}")]
    NonStationary { radius: f64 },

    #[error("covariance matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Lasso(#[from] LassoError),

    #[error("lasso failed on {} row(s), first at row {}", .0.len(), .0[0].0)]
    LassoRows(Vec<(usize, LassoError)>),

    #[error("CLIME column {column} infeasible at lambda1={lambda1}; consider ridge_epsilon > 0")]
    ClimeInfeasible { column: usize, lambda1: f64 },

    #[error("CLIME column {column}: {message}")]
    ClimeSolver { column: usize, message: String },

    #[error("no feasible lambda1 on the grid (largest tried {largest})")]
    NoFeasibleLambda1 { largest: f64 },

    #[error("non-positive variance term for {variant} standard error at column {column}")]
    NonPositiveVariance { variant: &'static str, column: usize },

    #[error("hypothesis set is empty")]
    EmptyHypotheses,

    #[error("bootstrap null set is empty")]
    EmptyNull,

    #[error("threshold search range undefined for |H|={size}: 2 ln|H| - a ln ln|H| = {value}")]
    SearchRangeUndefined { size: usize, value: f64 },

    #[error("{failed} of {total} {what} failed (limit {limit:.1}%)")]
    TooManyFailures {
        what: &'static str,
        failed: usize,
        total: usize,
        limit: f64,
    },
}

/// Failure of a single coordinate-descent solve.
#[derive(Debug, Clone, Error)]
#[error("lasso did not converge after {iterations} sweeps (KKT violation {violation:.3e})")]
pub struct LassoError {
    pub iterations: usize,
    pub violation: f64,
    pub last_iterate: Vec<f64>,
}
