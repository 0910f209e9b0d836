//! Row-wise lasso for the VAR coefficient rows.
//!
//! Each row solves `(2T)^-1 ||y_i - phi X||^2 + lambda ||phi||_1` by cyclic
//! coordinate descent on the Gram form `G = XX'/T`, `c = Xy'/T`. The
//! gradient `c - G phi` is cached and updated column-wise whenever a
//! coordinate moves.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, LassoError, Result};
use crate::model::{PanelData, SparsityPattern};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoSettings {
    /// Stop when the largest coordinate move is below `tol * max|c|`.
    pub tol: f64,
    /// Maximum number of full sweeps.
    pub max_iter: usize,
    /// Required KKT certificate, relative to `lambda`.
    pub kkt_tol: f64,
}

impl Default for LassoSettings {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 10_000,
            kkt_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowFit {
    pub coefficients: DVector<f64>,
    pub iterations: usize,
    pub kkt_violation: f64,
}

/// `G = XX'/T`, symmetrized.
pub fn gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    let t = x.ncols() as f64;
    let g = x * x.transpose() / t;
    (&g + g.transpose()) * 0.5
}

fn soft_threshold(z: f64, lambda: f64) -> f64 {
    if z > lambda {
        z - lambda
    } else if z < -lambda {
        z + lambda
    } else {
        0.0
    }
}

/// Lasso objective in Gram form, `yy'/(2T) - phi c + phi G phi'/2 + lambda |phi|_1`.
pub fn objective(
    gram: &DMatrix<f64>,
    xty: &DVector<f64>,
    yty_over_t: f64,
    coef: &DVector<f64>,
    lambda: f64,
) -> f64 {
    let quad = (gram * coef).dot(coef);
    0.5 * yty_over_t - coef.dot(xty) + 0.5 * quad + lambda * coef.abs().sum()
}

/// Largest violation of the subgradient conditions: `|g_j| <= lambda` off the
/// support and `g_j = lambda sign(phi_j)` on it, where `g = c - G phi`.
pub fn kkt_violation(gram: &DMatrix<f64>, xty: &DVector<f64>, coef: &DVector<f64>, lambda: f64) -> f64 {
    let g = xty - gram * coef;
    g.iter()
        .zip(coef.iter())
        .map(|(&gj, &bj)| {
            if bj == 0.0 {
                (gj.abs() - lambda).max(0.0)
            } else {
                (gj - lambda * bj.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Coordinate descent on one row given its Gram form.
pub fn fit_row_gram(
    gram: &DMatrix<f64>,
    xty: &DVector<f64>,
    lambda: f64,
    warm_start: Option<&DVector<f64>>,
    settings: &LassoSettings,
) -> Result<RowFit, LassoError> {
    let p = xty.len();
    let scale = xty.amax();
    let mut coef = match warm_start {
        Some(w) => w.clone(),
        None => DVector::zeros(p),
    };
    if warm_start.is_none() && scale <= lambda {
        return Ok(RowFit {
            coefficients: coef,
            iterations: 0,
            kkt_violation: 0.0,
        });
    }
    if warm_start.is_some() {
        let v = kkt_violation(gram, xty, &coef, lambda);
        if v <= settings.kkt_tol * lambda {
            return Ok(RowFit {
                coefficients: coef,
                iterations: 0,
                kkt_violation: v,
            });
        }
    }
    let mut grad = xty - gram * &coef;
    let step_tol = settings.tol * scale.max(f64::MIN_POSITIVE);
    let mut violation = f64::INFINITY;
    for sweep in 1..=settings.max_iter {
        let mut max_step = 0.0f64;
        for j in 0..p {
            let gjj = gram[(j, j)];
            if gjj <= 0.0 {
                continue;
            }
            let old = coef[j];
            let new = soft_threshold(grad[j] + gjj * old, lambda) / gjj;
            let delta = new - old;
            if delta != 0.0 {
                coef[j] = new;
                grad.axpy(-delta, &gram.column(j), 1.0);
                max_step = max_step.max(delta.abs());
            }
        }
        if max_step <= step_tol {
            violation = kkt_violation(gram, xty, &coef, lambda);
            if violation <= settings.kkt_tol * lambda {
                return Ok(RowFit {
                    coefficients: coef,
                    iterations: sweep,
                    kkt_violation: violation,
                });
            }
            // refresh the cached gradient to shed accumulated rounding
            grad = xty - gram * &coef;
        }
    }
    if violation.is_infinite() {
        violation = kkt_violation(gram, xty, &coef, lambda);
    }
    Err(LassoError {
        iterations: settings.max_iter,
        violation,
        last_iterate: coef.iter().copied().collect(),
    })
}

/// Fits one row from the raw design `x` (`KN x T`) and response `y_row`.
pub fn fit_row(
    x: &DMatrix<f64>,
    y_row: &DVector<f64>,
    lambda: f64,
    settings: &LassoSettings,
) -> Result<RowFit> {
    if x.ncols() != y_row.len() {
        return Err(Error::DimensionMismatch {
            context: "fit_row",
            expected: format!("response of length {}", x.ncols()),
            found: format!("{}", y_row.len()),
        });
    }
    check_lambda(lambda)?;
    let g = gram(x);
    let xty = x * y_row / x.ncols() as f64;
    Ok(fit_row_gram(&g, &xty, lambda, None, settings)?)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    Ok(())
}

/// Regularization level, shared or per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Penalty {
    Shared(f64),
    PerRow(Vec<f64>),
}

impl Penalty {
    pub fn for_row(&self, i: usize) -> f64 {
        match self {
            Penalty::Shared(l) => *l,
            Penalty::PerRow(v) => v[i],
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            Penalty::Shared(l) => Penalty::Shared(l * c),
            Penalty::PerRow(v) => Penalty::PerRow(v.iter().map(|l| l * c).collect()),
        }
    }

    fn validate(&self, n_rows: usize) -> Result<()> {
        match self {
            Penalty::Shared(l) => check_lambda(*l),
            Penalty::PerRow(v) => {
                if v.len() != n_rows {
                    return Err(Error::DimensionMismatch {
                        context: "per-row penalty",
                        expected: format!("{n_rows} values"),
                        found: format!("{}", v.len()),
                    });
                }
                v.iter().try_for_each(|&l| check_lambda(l))
            }
        }
    }
}

/// Lasso estimate `Phi^L` for all rows with residuals `U = Y - Phi^L X`.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub coefficients: DMatrix<f64>,
    pub residuals: DMatrix<f64>,
    pub active_sets: SparsityPattern,
    pub penalty: Penalty,
    pub kkt_violation: f64,
    pub iterations: Vec<usize>,
}

impl LassoFit {
    pub fn lambda(&self, row: usize) -> f64 {
        self.penalty.for_row(row)
    }
}

/// Gram form of a design shared by every row: `G = XX'/T` and `C = XY'/T`.
#[derive(Debug, Clone)]
pub struct GramForm {
    pub gram: DMatrix<f64>,
    pub xty: DMatrix<f64>,
}

impl GramForm {
    pub fn new(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Self {
        let t = x.ncols() as f64;
        Self {
            gram: gram(x),
            xty: x * y.transpose() / t,
        }
    }

    /// Reuses a precomputed `G`.
    pub fn with_gram(gram: DMatrix<f64>, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Self {
        let t = x.ncols() as f64;
        Self {
            gram,
            xty: x * y.transpose() / t,
        }
    }
}

/// Fits every row of `y` on the design `x`. Rows are independent problems.
pub fn fit_design(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    penalty: &Penalty,
    settings: &LassoSettings,
) -> Result<LassoFit> {
    fit_design_with(x, y, &GramForm::new(x, y), penalty, None, settings)
}

/// As [`fit_design`] with a precomputed Gram form and optional warm start.
pub fn fit_design_with(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    form: &GramForm,
    penalty: &Penalty,
    warm_start: Option<&DMatrix<f64>>,
    settings: &LassoSettings,
) -> Result<LassoFit> {
    let n = y.nrows();
    if x.ncols() != y.ncols() {
        return Err(Error::DimensionMismatch {
            context: "fit_design",
            expected: format!("{} columns in Y", x.ncols()),
            found: format!("{}", y.ncols()),
        });
    }
    penalty.validate(n)?;
    let rows = par::map_indexed(n, |i| {
        let xty = form.xty.column(i).into_owned();
        let warm = warm_start.map(|w| w.row(i).transpose());
        fit_row_gram(&form.gram, &xty, penalty.for_row(i), warm.as_ref(), settings)
    });
    let mut coefficients = DMatrix::zeros(n, x.nrows());
    let mut failures = Vec::new();
    let mut iterations = Vec::with_capacity(n);
    let mut kkt = 0.0f64;
    for (i, row) in rows.into_iter().enumerate() {
        match row {
            Ok(fit) => {
                coefficients.set_row(i, &fit.coefficients.transpose());
                iterations.push(fit.iterations);
                kkt = kkt.max(fit.kkt_violation);
            }
            Err(e) => failures.push((i, e)),
        }
    }
    if !failures.is_empty() {
        return Err(Error::LassoRows(failures));
    }
    let residuals = y - &coefficients * x;
    Ok(LassoFit {
        active_sets: SparsityPattern::from_matrix(&coefficients),
        coefficients,
        residuals,
        penalty: penalty.clone(),
        kkt_violation: kkt,
        iterations,
    })
}

pub fn fit_all(data: &PanelData, penalty: &Penalty, settings: &LassoSettings) -> Result<LassoFit> {
    fit_design(data.design(), data.observations(), penalty, settings)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum DofRule {
    /// `d_i = s_i`, the lasso support size of row `i`.
    #[default]
    ActiveSetSize,
    Zero,
    Fixed(usize),
}

/// `sigma_i^2 = sum_t u_it^2 / (T - d_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualVariances {
    pub values: DVector<f64>,
    pub dof_adjustment: Vec<usize>,
}

pub fn residual_variance(fit: &LassoFit, rule: DofRule) -> Result<ResidualVariances> {
    let dof: Vec<usize> = match rule {
        DofRule::ActiveSetSize => fit.active_sets.per_row_sizes().to_vec(),
        DofRule::Zero => vec![0; fit.residuals.nrows()],
        DofRule::Fixed(d) => vec![d; fit.residuals.nrows()],
    };
    variances_with_dof(&fit.residuals, dof)
}

pub(crate) fn variances_with_dof(residuals: &DMatrix<f64>, dof: Vec<usize>) -> Result<ResidualVariances> {
    let t = residuals.ncols();
    let mut values = DVector::zeros(residuals.nrows());
    for (i, &d) in dof.iter().enumerate() {
        if d >= t {
            return Err(Error::InvalidInput(format!(
                "degrees-of-freedom adjustment {d} for row {i} leaves no residual degrees (T={t})"
            )));
        }
        values[i] = residuals.row(i).norm_squared() / (t - d) as f64;
    }
    Ok(ResidualVariances {
        values,
        dof_adjustment: dof,
    })
}

/// How a cross-validation curve picks its penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvRule {
    /// Minimizer of the pooled out-of-fold error.
    #[default]
    Min,
    /// Largest penalty whose error is within one standard error of the
    /// minimum, the standard error taken across fold-wise mean squared errors.
    OneStandardError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaStrategy {
    /// `8 b c_uu sqrt(2 (nu+5)^3 log^3(N v T) / T)` with user-supplied constants.
    Theory { nu: f64, b: f64, c_uu: f64 },
    /// Contiguous-block cross-validation over a 100-point log grid.
    CrossValidation {
        n_folds: usize,
        per_row: bool,
        #[serde(default)]
        rule: CvRule,
    },
    /// Cross-validation restricted to the given values; a single value is
    /// returned as is.
    FixedGrid {
        values: Vec<f64>,
        n_folds: usize,
        per_row: bool,
        #[serde(default)]
        rule: CvRule,
    },
}

impl Default for LambdaStrategy {
    fn default() -> Self {
        LambdaStrategy::CrossValidation {
            n_folds: 10,
            per_row: false,
            rule: CvRule::Min,
        }
    }
}

pub fn theory_lambda(n: usize, t: usize, nu: f64, b: f64, c_uu: f64) -> f64 {
    let log_nt = (n.max(t) as f64).ln();
    8.0 * b * c_uu * (2.0 * (nu + 5.0).powi(3) * log_nt.powi(3) / t as f64).sqrt()
}

pub fn select_lambda(data: &PanelData, strategy: &LambdaStrategy, settings: &LassoSettings) -> Result<Penalty> {
    select_lambda_design(data.design(), data.observations(), strategy, settings)
}

pub fn select_lambda_design(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    strategy: &LambdaStrategy,
    settings: &LassoSettings,
) -> Result<Penalty> {
    match strategy {
        LambdaStrategy::Theory { nu, b, c_uu } => {
            let l = theory_lambda(y.nrows(), y.ncols(), *nu, *b, *c_uu);
            check_lambda(l)?;
            Ok(Penalty::Shared(l))
        }
        LambdaStrategy::CrossValidation { n_folds, per_row, rule } => {
            cross_validate(x, y, None, *n_folds, *per_row, *rule, settings)
        }
        LambdaStrategy::FixedGrid {
            values,
            n_folds,
            per_row,
            rule,
        } => {
            if values.is_empty() {
                return Err(Error::InvalidInput("lambda grid is empty".into()));
            }
            values.iter().try_for_each(|&l| check_lambda(l))?;
            if values.len() == 1 {
                return Ok(Penalty::Shared(values[0]));
            }
            let mut grid = values.clone();
            grid.sort_by(|a, b| b.total_cmp(a));
            grid.dedup();
            cross_validate(x, y, Some(&grid), *n_folds, *per_row, *rule, settings)
        }
    }
}

pub const CV_GRID_POINTS: usize = 100;
pub const CV_GRID_RATIO: f64 = 1e-3;

/// Descending log grid from `lambda_max` to `1e-3 lambda_max`.
pub fn log_grid(lambda_max: f64) -> Vec<f64> {
    let last = (CV_GRID_POINTS - 1) as f64;
    (0..CV_GRID_POINTS)
        .map(|k| lambda_max * CV_GRID_RATIO.powf(k as f64 / last))
        .collect()
}

struct Fold {
    start: usize,
    len: usize,
    form: GramForm,
}

fn cross_validate(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    fixed_grid: Option<&[f64]>,
    n_folds: usize,
    per_row: bool,
    rule: CvRule,
    settings: &LassoSettings,
) -> Result<Penalty> {
    let t = x.ncols();
    let n = y.nrows();
    if n_folds < 2 || t < 2 * n_folds {
        return Err(Error::InvalidInput(format!(
            "cross-validation needs n_folds >= 2 and T >= 2 n_folds (T={t}, n_folds={n_folds})"
        )));
    }
    let full_xx = x * x.transpose();
    let full_xy = x * y.transpose();
    let full_c = &full_xy / t as f64;
    let folds: Vec<Fold> = (0..n_folds)
        .map(|f| {
            let start = f * t / n_folds;
            let end = (f + 1) * t / n_folds;
            let len = end - start;
            let xf = x.columns(start, len);
            let yf = y.columns(start, len);
            let train = (t - len) as f64;
            let g = (&full_xx - xf * xf.transpose()) / train;
            Fold {
                start,
                len,
                form: GramForm {
                    gram: (&g + g.transpose()) * 0.5,
                    xty: (&full_xy - xf * yf.transpose()) / train,
                },
            }
        })
        .collect();

    let grid_for = |rows: &[usize]| -> Vec<f64> {
        match fixed_grid {
            Some(g) => g.to_vec(),
            None => {
                let lmax = rows
                    .iter()
                    .map(|&i| full_c.column(i).amax())
                    .fold(0.0, f64::max);
                log_grid(lmax.max(f64::MIN_POSITIVE))
            }
        }
    };

    // out-of-fold squared error per (grid point, fold) for one row
    let row_path_errors = |i: usize, grid: &[f64]| -> Result<DMatrix<f64>, LassoError> {
        let mut errors = DMatrix::zeros(grid.len(), folds.len());
        for (f, fold) in folds.iter().enumerate() {
            let xty = fold.form.xty.column(i).into_owned();
            let xf = x.columns(fold.start, fold.len);
            let yf = y.row(i).columns(fold.start, fold.len).into_owned();
            let mut warm: Option<DVector<f64>> = None;
            for (k, &lambda) in grid.iter().enumerate() {
                let fit = fit_row_gram(&fold.form.gram, &xty, lambda, warm.as_ref(), settings)?;
                let pred = fit.coefficients.transpose() * xf;
                errors[(k, f)] = (&yf - pred).norm_squared();
                warm = Some(fit.coefficients);
            }
        }
        Ok(errors)
    };

    let fold_lens: Vec<f64> = folds.iter().map(|f| f.len as f64).collect();
    let choose = |errors: &DMatrix<f64>| -> usize {
        let pooled: Vec<f64> = errors.row_iter().map(|r| r.sum()).collect();
        let mut best = 0;
        for (k, e) in pooled.iter().enumerate() {
            if *e < pooled[best] {
                best = k;
            }
        }
        match rule {
            CvRule::Min => best,
            CvRule::OneStandardError => {
                let nf = fold_lens.len() as f64;
                let mse = |k: usize| errors.row(k).iter().zip(&fold_lens).map(|(e, l)| e / l).collect::<Vec<_>>();
                let m = mse(best);
                let mean = m.iter().sum::<f64>() / nf;
                let var = m.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0);
                let bound = pooled[best] / t as f64 + (var / nf).sqrt();
                (0..=best).find(|&k| pooled[k] / t as f64 <= bound).unwrap_or(best)
            }
        }
    };

    if per_row {
        let chosen = par::map_indexed(n, |i| {
            let grid = grid_for(&[i]);
            row_path_errors(i, &grid).map(|e| grid[choose(&e)])
        });
        let mut values = Vec::with_capacity(n);
        let mut failures = Vec::new();
        for (i, c) in chosen.into_iter().enumerate() {
            match c {
                Ok(l) => values.push(l),
                Err(e) => failures.push((i, e)),
            }
        }
        if !failures.is_empty() {
            return Err(Error::LassoRows(failures));
        }
        Ok(Penalty::PerRow(values))
    } else {
        let rows: Vec<usize> = (0..n).collect();
        let grid = grid_for(&rows);
        let per_row_errors = par::map_indexed(n, |i| row_path_errors(i, &grid));
        let mut total = DMatrix::zeros(grid.len(), folds.len());
        let mut failures = Vec::new();
        for (i, e) in per_row_errors.into_iter().enumerate() {
            match e {
                Ok(e) => total += e,
                Err(err) => failures.push((i, err)),
            }
        }
        if !failures.is_empty() {
            return Err(Error::LassoRows(failures));
        }
        Ok(Penalty::Shared(grid[choose(&total)]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // T = 4, rows of X orthogonal with squared norm T so that XX'/T = I.
    fn orthonormal_design() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            3,
            4,
            &[
                1.0, 1.0, 1.0, 1.0, //
                1.0, -1.0, 1.0, -1.0, //
                1.0, 1.0, -1.0, -1.0,
            ],
        )
    }

    #[test]
    fn soft_threshold_under_orthonormal_design() {
        let x = orthonormal_design();
        // OLS coefficient z = 0.9 on the second coordinate only
        let y = DVector::from_row_slice(x.row(1).transpose().as_slice()) * 0.9;
        let fit = fit_row(&x, &y, 0.3, &LassoSettings::default()).unwrap();
        assert_abs_diff_eq!(fit.coefficients[1], 0.6, epsilon = 1e-12);
        assert_eq!(fit.coefficients[0], 0.0);
        assert_eq!(fit.coefficients[2], 0.0);
    }

    #[test]
    fn null_model_above_lambda_max() {
        let x = orthonormal_design();
        let y = DVector::from_row_slice(&[0.3, -0.2, 0.5, 0.1]);
        let xty = &x * &y / 4.0;
        let fit = fit_row(&x, &y, xty.amax() * 1.0001, &LassoSettings::default()).unwrap();
        assert!(fit.coefficients.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn residual_variance_arithmetic() {
        let residuals = DMatrix::from_row_slice(1, 4, &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(variances_with_dof(&residuals, vec![0]).unwrap().values[0], 1.0);
        assert_eq!(variances_with_dof(&residuals, vec![2]).unwrap().values[0], 2.0);
        assert!(variances_with_dof(&residuals, vec![4]).is_err());
    }

    #[test]
    fn active_set_size_divisor() {
        let coefficients = DMatrix::from_row_slice(1, 5, &[0.1, 0.0, -0.2, 0.3, 0.0]);
        let residuals = DMatrix::from_element(1, 100, 1.0);
        let fit = LassoFit {
            active_sets: SparsityPattern::from_matrix(&coefficients),
            coefficients,
            residuals,
            penalty: Penalty::Shared(0.1),
            kkt_violation: 0.0,
            iterations: vec![1],
        };
        let v = residual_variance(&fit, DofRule::ActiveSetSize).unwrap();
        assert_eq!(v.dof_adjustment, vec![3]);
        assert_abs_diff_eq!(v.values[0], 100.0 / 97.0, epsilon = 1e-15);
    }

    #[test]
    fn theory_lambda_formula() {
        // 8 sqrt(2 * 216 * ln(100)^3 / 100)
        let expected = 8.0 * (4.32 * 100f64.ln().powi(3)).sqrt();
        assert_abs_diff_eq!(theory_lambda(100, 100, 1.0, 1.0, 1.0), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(expected, 164.324, epsilon = 1e-3);
    }

    #[test]
    fn singleton_grid_passes_through() {
        let x = DMatrix::from_fn(2, 40, |i, t| ((i + 1) * t) as f64 % 3.0);
        let y = DMatrix::from_fn(2, 40, |i, t| (i + t) as f64 % 5.0);
        let s = LambdaStrategy::FixedGrid {
            values: vec![0.1],
            n_folds: 5,
            per_row: false,
            rule: CvRule::Min,
        };
        assert_eq!(
            select_lambda_design(&x, &y, &s, &LassoSettings::default()).unwrap(),
            Penalty::Shared(0.1)
        );
        let empty = LambdaStrategy::FixedGrid {
            values: vec![],
            n_folds: 5,
            per_row: false,
            rule: CvRule::Min,
        };
        assert!(select_lambda_design(&x, &y, &empty, &LassoSettings::default()).is_err());
    }

    #[test]
    fn degenerate_folds_rejected() {
        let x = DMatrix::from_element(2, 15, 1.0);
        let y = DMatrix::from_element(2, 15, 1.0);
        let s = LambdaStrategy::CrossValidation {
            n_folds: 10,
            per_row: false,
            rule: CvRule::Min,
        };
        assert!(select_lambda_design(&x, &y, &s, &LassoSettings::default()).is_err());
    }

    #[test]
    fn non_convergence_carries_last_iterate() {
        let x = DMatrix::from_fn(5, 30, |i, t| ((i * 7 + t * 3) % 11) as f64 - 5.0);
        let y = DVector::from_fn(30, |t, _| (t % 4) as f64);
        let settings = LassoSettings {
            max_iter: 1,
            tol: 0.0,
            kkt_tol: 0.0,
        };
        let g = gram(&x);
        let xty = &x * &y / 30.0;
        let err = fit_row_gram(&g, &xty, 0.01, None, &settings).unwrap_err();
        assert_eq!(err.iterations, 1);
        assert_eq!(err.last_iterate.len(), 5);
        assert!(err.violation > 0.0);
    }
}
