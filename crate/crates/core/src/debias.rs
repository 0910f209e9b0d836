//! Debiased lasso and its t-statistics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::clime::PrecisionEstimate;
use crate::error::{Error, Result};
use crate::lasso::{LassoFit, ResidualVariances};
use crate::model::PanelData;

/// `Phi = Phi^L + (Y - Phi^L X) X' Omega / T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DebiasedEstimate {
    pub coefficients: DMatrix<f64>,
    pub correction: DMatrix<f64>,
}

pub fn debias(fit: &LassoFit, data: &PanelData, precision: &PrecisionEstimate) -> Result<DebiasedEstimate> {
    debias_parts(&fit.coefficients, &fit.residuals, data.design(), &precision.omega)
}

/// Debiasing from the lasso coefficients, their residuals and the design.
pub fn debias_parts(
    lasso: &DMatrix<f64>,
    residuals: &DMatrix<f64>,
    x: &DMatrix<f64>,
    omega: &DMatrix<f64>,
) -> Result<DebiasedEstimate> {
    let kn = x.nrows();
    if lasso.ncols() != kn || omega.shape() != (kn, kn) || residuals.shape() != (lasso.nrows(), x.ncols()) {
        return Err(Error::DimensionMismatch {
            context: "debias",
            expected: format!("Phi N x {kn}, Omega {kn} x {kn}, U N x T"),
            found: format!(
                "Phi {:?}, Omega {:?}, U {:?}",
                lasso.shape(),
                omega.shape(),
                residuals.shape()
            ),
        });
    }
    let correction = residuals * x.transpose() * omega / x.ncols() as f64;
    Ok(DebiasedEstimate {
        coefficients: lasso + &correction,
        correction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeVariant {
    /// `sigma_i sqrt(omega_j' Sigma_x omega_j)`.
    #[default]
    Sandwich,
    /// `sigma_i sqrt(omega_jj)`.
    DiagOnly,
}

impl SeVariant {
    pub fn name(&self) -> &'static str {
        match self {
            SeVariant::Sandwich => "sandwich",
            SeVariant::DiagOnly => "diag_only",
        }
    }
}

/// Index pairs `(i, j)`: row `i` of `Phi`, column `j` of the stacked lags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypotheses {
    pairs: Vec<(usize, usize)>,
}

impl Hypotheses {
    /// Every entry of an `n_rows x n_cols` coefficient matrix, row-major.
    pub fn all(n_rows: usize, n_cols: usize) -> Self {
        Self {
            pairs: (0..n_rows)
                .flat_map(|i| (0..n_cols).map(move |j| (i, j)))
                .collect(),
        }
    }

    pub fn from_pairs(mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        pairs.dedup();
        Self { pairs }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, pair: (usize, usize)) -> bool {
        self.pairs.binary_search(&pair).is_ok()
    }

    /// Pairs not in the sorted `excluded` list.
    pub fn minus(&self, excluded: &[(usize, usize)]) -> Self {
        Self {
            pairs: self
                .pairs
                .iter()
                .copied()
                .filter(|p| excluded.binary_search(p).is_err())
                .collect(),
        }
    }
}

/// Per-column scale `sqrt(omega_j' Sigma_x omega_j)` or `sqrt(omega_jj)`.
pub fn column_scales(
    precision: &PrecisionEstimate,
    sigma_x: &DMatrix<f64>,
    variant: SeVariant,
) -> Result<DVector<f64>> {
    let omega = &precision.omega;
    let p = omega.nrows();
    if sigma_x.shape() != (p, p) {
        return Err(Error::DimensionMismatch {
            context: "column_scales",
            expected: format!("{p} x {p}"),
            found: format!("{:?}", sigma_x.shape()),
        });
    }
    let raw: DVector<f64> = match variant {
        SeVariant::Sandwich => {
            let so = sigma_x * omega;
            DVector::from_fn(p, |j, _| omega.column(j).dot(&so.column(j)))
        }
        SeVariant::DiagOnly => omega.diagonal(),
    };
    let mut out = DVector::zeros(p);
    for j in 0..p {
        if !(raw[j] > 0.0) {
            return Err(Error::NonPositiveVariance {
                variant: variant.name(),
                column: j,
            });
        }
        out[j] = raw[j].sqrt();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestField {
    /// Aligned with `hypotheses.pairs()`.
    pub t_values: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub se_variant: SeVariant,
    pub hypotheses: Hypotheses,
}

impl TestField {
    pub fn len(&self) -> usize {
        self.t_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_values.is_empty()
    }

    pub fn get(&self, pair: (usize, usize)) -> Option<f64> {
        self.hypotheses
            .pairs()
            .binary_search(&pair)
            .ok()
            .map(|k| self.t_values[k])
    }

    pub fn abs_values(&self) -> Vec<f64> {
        self.t_values.iter().map(|t| t.abs()).collect()
    }
}

/// Builds `T_ij = sqrt(T) phi_ij / (sigma_i s_j)` from precomputed scales.
pub fn t_values_from_scales(
    coefficients: &DMatrix<f64>,
    sigma: &DVector<f64>,
    scales: &DVector<f64>,
    n_obs: usize,
    pairs: &[(usize, usize)],
) -> (Vec<f64>, Vec<f64>) {
    let root_t = (n_obs as f64).sqrt();
    pairs
        .iter()
        .map(|&(i, j)| {
            let se = sigma[i] * scales[j];
            (root_t * coefficients[(i, j)] / se, se)
        })
        .unzip()
}

pub fn t_field(
    estimate: &DebiasedEstimate,
    variances: &ResidualVariances,
    precision: &PrecisionEstimate,
    sigma_x: &DMatrix<f64>,
    n_obs: usize,
    variant: SeVariant,
    hypotheses: &Hypotheses,
) -> Result<TestField> {
    let (n, kn) = estimate.coefficients.shape();
    if variances.values.len() != n || precision.dim() != kn {
        return Err(Error::DimensionMismatch {
            context: "t_field",
            expected: format!("{n} variances and a {kn} x {kn} precision"),
            found: format!("{} and {}", variances.values.len(), precision.dim()),
        });
    }
    if let Some(&(i, j)) = hypotheses.pairs().iter().find(|&&(i, j)| i >= n || j >= kn) {
        return Err(Error::InvalidInput(format!("hypothesis ({i}, {j}) outside {n} x {kn}")));
    }
    if let Some(i) = (0..n).find(|&i| !(variances.values[i] > 0.0)) {
        return Err(Error::NonPositiveVariance {
            variant: "residual",
            column: i,
        });
    }
    let scales = column_scales(precision, sigma_x, variant)?;
    let sigma = variances.values.map(f64::sqrt);
    let (t_values, standard_errors) =
        t_values_from_scales(&estimate.coefficients, &sigma, &scales, n_obs, hypotheses.pairs());
    Ok(TestField {
        t_values,
        standard_errors,
        se_variant: variant,
        hypotheses: hypotheses.clone(),
    })
}

/// Correlation between `z_ij` and `z_kl`:
/// `sigma_ik omega_jl / (sigma_i sigma_k omega_j omega_l)` with
/// `sigma_i = sqrt(sigma_ii)` and `omega_j = sqrt(omega_jj)`.
pub fn pair_correlation(
    sigma_u: &DMatrix<f64>,
    omega: &DMatrix<f64>,
    pair_a: (usize, usize),
    pair_b: (usize, usize),
) -> Result<f64> {
    let (i, j) = pair_a;
    let (k, l) = pair_b;
    let diag = [sigma_u[(i, i)], sigma_u[(k, k)], omega[(j, j)], omega[(l, l)]];
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "pair_correlation needs positive diagonals, got {diag:?}"
        )));
    }
    let denom: f64 = diag.iter().map(|d| d.sqrt()).product();
    Ok(sigma_u[(i, k)] * omega[(j, l)] / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn t_value_arithmetic() {
        let coefficients = DMatrix::from_row_slice(1, 2, &[0.5, 0.0]);
        let sigma = DVector::from_element(1, 1.0);
        let scales = DVector::from_row_slice(&[2.0, 1.0]);
        let (t, se) = t_values_from_scales(&coefficients, &sigma, &scales, 100, &[(0, 0), (0, 1)]);
        assert_abs_diff_eq!(t[0], 2.5, epsilon = 1e-15);
        assert_eq!(se[0], 2.0);
        assert_eq!(t[1], 0.0);
    }

    #[test]
    fn variants_coincide_for_identity() {
        let p = PrecisionEstimate::from_matrix(DMatrix::identity(3, 3));
        let s = DMatrix::identity(3, 3);
        assert_eq!(
            column_scales(&p, &s, SeVariant::Sandwich).unwrap(),
            column_scales(&p, &s, SeVariant::DiagOnly).unwrap()
        );
    }

    #[test]
    fn non_positive_scale_named() {
        let mut omega = DMatrix::<f64>::identity(2, 2);
        omega[(1, 1)] = 0.0;
        let p = PrecisionEstimate::from_matrix(omega);
        let err = column_scales(&p, &DMatrix::identity(2, 2), SeVariant::DiagOnly).unwrap_err();
        assert!(matches!(err, Error::NonPositiveVariance { variant: "diag_only", column: 1 }));
    }

    #[test]
    fn zero_correction_cases() {
        let x = DMatrix::from_fn(2, 5, |i, t| (i + t) as f64);
        let lasso = DMatrix::from_row_slice(1, 2, &[0.3, -0.1]);
        let zero_u = DMatrix::zeros(1, 5);
        let u = DMatrix::from_fn(1, 5, |_, t| t as f64 - 2.0);
        let omega = DMatrix::identity(2, 2);
        assert_eq!(debias_parts(&lasso, &zero_u, &x, &omega).unwrap().coefficients, lasso);
        assert_eq!(
            debias_parts(&lasso, &u, &x, &DMatrix::zeros(2, 2)).unwrap().coefficients,
            lasso
        );
    }

    #[test]
    fn pair_correlation_examples() {
        let su = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let om = DMatrix::identity(2, 2);
        assert_abs_diff_eq!(pair_correlation(&su, &om, (0, 1), (0, 1)).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pair_correlation(&su, &om, (0, 0), (1, 0)).unwrap(), 0.5, epsilon = 1e-15);
        let diag = DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 3.0]));
        assert_eq!(pair_correlation(&diag, &om, (0, 0), (1, 0)).unwrap(), 0.0);
        assert!(pair_correlation(&DMatrix::zeros(2, 2), &om, (0, 0), (1, 0)).is_err());
    }

    #[test]
    fn hypotheses_helpers() {
        let h = Hypotheses::all(2, 3);
        assert_eq!(h.len(), 6);
        let rest = h.minus(&[(0, 1), (1, 2)]);
        assert_eq!(rest.pairs(), &[(0, 0), (0, 2), (1, 0), (1, 1)]);
        assert!(rest.contains((1, 1)));
    }
}
