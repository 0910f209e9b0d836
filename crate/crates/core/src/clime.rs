//! CLIME estimate of the precision matrix `Omega = Sigma_x^-1`.
//!
//! Column `j` solves `min |theta|_1` subject to
//! `|Sigma theta - e_j|_inf <= lambda1` as a linear program in the split
//! variables `theta = theta+ - theta-`. The columns are then symmetrized by
//! keeping, for each pair `(i, j)`, the entry of smaller magnitude.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PanelData;
use crate::par;

/// Slack allowed on the re-verified constraint `|Sigma Theta - I|_max <= lambda1`.
pub const CERTIFICATE_TOL: f64 = 1e-6;

/// `Sigma_x = XX'/T`, exactly symmetric.
pub fn sample_covariance(data: &PanelData) -> DMatrix<f64> {
    crate::lasso::gram(data.design())
}

/// A backend able to solve one CLIME column program.
pub trait ColumnSolver: Sync {
    /// Returns `Ok(None)` when the program is infeasible.
    fn solve(&self, sigma: &DMatrix<f64>, j: usize, lambda1: f64) -> Result<Option<DVector<f64>>>;
}

/// Dense simplex backend.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimplexSolver;

impl ColumnSolver for SimplexSolver {
    fn solve(&self, sigma: &DMatrix<f64>, j: usize, lambda1: f64) -> Result<Option<DVector<f64>>> {
        let p = sigma.nrows();
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let plus: Vec<_> = (0..p).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
        let minus: Vec<_> = (0..p).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
        for r in 0..p {
            let mut terms = Vec::with_capacity(2 * p);
            for c in 0..p {
                let a = sigma[(r, c)];
                if a != 0.0 {
                    terms.push((plus[c], a));
                    terms.push((minus[c], -a));
                }
            }
            let target = if r == j { 1.0 } else { 0.0 };
            lp.add_constraint(terms.as_slice(), ComparisonOp::Le, target + lambda1);
            lp.add_constraint(terms.as_slice(), ComparisonOp::Ge, target - lambda1);
        }
        match lp.solve() {
            Ok(outcome) => {
                let sol = outcome.into_solution().map_err(|_| Error::ClimeSolver {
                    column: j,
                    message: "solve interrupted".into(),
                })?;
                Ok(Some(DVector::from_fn(p, |c, _| {
                    sol.var_value_raw(plus[c]) - sol.var_value_raw(minus[c])
                })))
            }
            Err(microlp::Error::Infeasible) => Ok(None),
            Err(e) => Err(Error::ClimeSolver {
                column: j,
                message: e.to_string(),
            }),
        }
    }
}

fn check_square(sigma: &DMatrix<f64>) -> Result<()> {
    if !sigma.is_square() || sigma.nrows() == 0 {
        return Err(Error::DimensionMismatch {
            context: "CLIME covariance",
            expected: "square matrix".into(),
            found: format!("{} x {}", sigma.nrows(), sigma.ncols()),
        });
    }
    Ok(())
}

/// One CLIME column `theta_j`.
pub fn clime_column(sigma: &DMatrix<f64>, j: usize, lambda1: f64) -> Result<DVector<f64>> {
    check_square(sigma)?;
    if !(lambda1 >= 0.0 && lambda1.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda1 must be non-negative, got {lambda1}")));
    }
    SimplexSolver
        .solve(sigma, j, lambda1)?
        .ok_or(Error::ClimeInfeasible { column: j, lambda1 })
}

/// `|Sigma Theta - I|_max`.
pub fn constraint_residual(sigma: &DMatrix<f64>, theta: &DMatrix<f64>) -> f64 {
    let p = sigma.nrows();
    (sigma * theta - DMatrix::<f64>::identity(p, p)).amax()
}

/// `omega_ij = omega_ji` is whichever of `theta_ij`, `theta_ji` has the
/// smaller magnitude (`theta_ij` on ties).
pub fn symmetrize_min_magnitude(theta: &DMatrix<f64>) -> DMatrix<f64> {
    let p = theta.nrows();
    let mut omega = theta.clone();
    for i in 0..p {
        for j in (i + 1)..p {
            let a = theta[(i, j)];
            let b = theta[(j, i)];
            let v = if a.abs() <= b.abs() { a } else { b };
            omega[(i, j)] = v;
            omega[(j, i)] = v;
        }
    }
    omega
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionEstimate {
    pub omega: DMatrix<f64>,
    /// Column solutions before symmetrization.
    pub theta: DMatrix<f64>,
    pub lambda1: f64,
    pub ridge_epsilon: f64,
    /// `max(0, |Sigma_eps Theta - I|_max - lambda1)`.
    pub constraint_violation: f64,
}

impl PrecisionEstimate {
    /// Wraps a known precision matrix, e.g. an exact inverse.
    pub fn from_matrix(omega: DMatrix<f64>) -> Self {
        Self {
            theta: omega.clone(),
            omega,
            lambda1: 0.0,
            ridge_epsilon: 0.0,
            constraint_violation: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }

    /// True when every diagonal entry is positive.
    pub fn has_positive_diagonal(&self) -> bool {
        self.omega.diagonal().iter().all(|&v| v > 0.0)
    }
}

fn ridge(sigma: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    let p = sigma.nrows();
    sigma + DMatrix::<f64>::identity(p, p) * eps
}

fn solve_all<S: ColumnSolver>(
    solver: &S,
    sigma: &DMatrix<f64>,
    lambda1: f64,
) -> Vec<Result<Option<DVector<f64>>>> {
    par::map_indexed(sigma.nrows(), |j| solver.solve(sigma, j, lambda1))
}

fn assemble(
    sigma_eps: &DMatrix<f64>,
    columns: Vec<DVector<f64>>,
    lambda1: f64,
    ridge_epsilon: f64,
) -> Result<PrecisionEstimate> {
    let theta = DMatrix::from_columns(&columns);
    let residual = constraint_residual(sigma_eps, &theta);
    let violation = (residual - lambda1).max(0.0);
    if violation > CERTIFICATE_TOL {
        let worst = (0..theta.ncols())
            .max_by(|&a, &b| {
                let ra = (sigma_eps * theta.column(a)).amax();
                let rb = (sigma_eps * theta.column(b)).amax();
                ra.total_cmp(&rb)
            })
            .unwrap_or(0);
        return Err(Error::ClimeSolver {
            column: worst,
            message: format!("constraint certificate failed by {violation:.3e}"),
        });
    }
    Ok(PrecisionEstimate {
        omega: symmetrize_min_magnitude(&theta),
        theta,
        lambda1,
        ridge_epsilon,
        constraint_violation: violation,
    })
}

/// CLIME on `Sigma + eps I` at a fixed `lambda1`.
pub fn estimate_precision(sigma: &DMatrix<f64>, lambda1: f64, ridge_epsilon: f64) -> Result<PrecisionEstimate> {
    estimate_precision_with(&SimplexSolver, sigma, lambda1, ridge_epsilon)
}

pub fn estimate_precision_with<S: ColumnSolver>(
    solver: &S,
    sigma: &DMatrix<f64>,
    lambda1: f64,
    ridge_epsilon: f64,
) -> Result<PrecisionEstimate> {
    check_square(sigma)?;
    if !(lambda1 >= 0.0 && lambda1.is_finite()) || !(ridge_epsilon >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "need lambda1 >= 0 and ridge_epsilon >= 0, got {lambda1}, {ridge_epsilon}"
        )));
    }
    let sigma_eps = ridge(sigma, ridge_epsilon);
    let mut columns = Vec::with_capacity(sigma.nrows());
    for (j, col) in solve_all(solver, &sigma_eps, lambda1).into_iter().enumerate() {
        columns.push(col?.ok_or(Error::ClimeInfeasible { column: j, lambda1 })?);
    }
    assemble(&sigma_eps, columns, lambda1, ridge_epsilon)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Lambda1Strategy {
    Fixed { value: f64 },
    /// Smallest grid value at which every column program is feasible and
    /// certified.
    ConstraintPath { grid: Vec<f64> },
}

impl Lambda1Strategy {
    /// `0.005 * 2^k` for `k = 0..=12`.
    pub fn default_grid() -> Vec<f64> {
        (0..=12).map(|k| 0.005 * 2f64.powi(k)).collect()
    }
}

impl Default for Lambda1Strategy {
    fn default() -> Self {
        Lambda1Strategy::ConstraintPath {
            grid: Self::default_grid(),
        }
    }
}

/// Runs the strategy and returns the estimate at the chosen `lambda1`.
pub fn estimate_precision_auto(
    sigma: &DMatrix<f64>,
    strategy: &Lambda1Strategy,
    ridge_epsilon: f64,
) -> Result<PrecisionEstimate> {
    match strategy {
        Lambda1Strategy::Fixed { value } => estimate_precision(sigma, *value, ridge_epsilon),
        Lambda1Strategy::ConstraintPath { grid } => {
            if grid.is_empty() {
                return Err(Error::InvalidInput("lambda1 grid is empty".into()));
            }
            let mut grid = grid.clone();
            grid.sort_by(f64::total_cmp);
            for &lambda1 in &grid {
                match estimate_precision(sigma, lambda1, ridge_epsilon) {
                    Ok(est) => return Ok(est),
                    Err(Error::ClimeInfeasible { .. }) | Err(Error::ClimeSolver { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::NoFeasibleLambda1 {
                largest: *grid.last().unwrap(),
            })
        }
    }
}

pub fn select_lambda1(sigma: &DMatrix<f64>, strategy: &Lambda1Strategy) -> Result<f64> {
    match strategy {
        Lambda1Strategy::Fixed { value } => Ok(*value),
        _ => Ok(estimate_precision_auto(sigma, strategy, 0.0)?.lambda1),
    }
}
