//! VAR(K) data types and the simulation design.
//!
//! Observations are stored column-wise: `Y` is `N x T` with column `t` equal
//! to `y_t`, and the lag design `X` is `KN x T` with column `t` equal to
//! `(y'_{t-1}, ..., y'_{t-K})'`. Coefficients `Phi = (Phi_1, ..., Phi_K)` are
//! `N x KN`, so `Y = Phi X + U`.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarDims {
    pub n_series: usize,
    pub lag_order: usize,
    pub n_obs: usize,
}

impl VarDims {
    pub fn new(n_series: usize, lag_order: usize, n_obs: usize) -> Result<Self> {
        if n_series == 0 || lag_order == 0 {
            return Err(Error::InvalidInput(format!(
                "need N >= 1 and K >= 1, got N={n_series}, K={lag_order}"
            )));
        }
        if n_obs <= lag_order {
            return Err(Error::InvalidInput(format!(
                "need T > K, got T={n_obs}, K={lag_order}"
            )));
        }
        Ok(Self {
            n_series,
            lag_order,
            n_obs,
        })
    }

    /// Number of stacked regressors, `KN`.
    pub fn n_regressors(&self) -> usize {
        self.n_series * self.lag_order
    }
}

/// `Phi = (Phi_1, ..., Phi_K)`, an `N x KN` block row.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    values: DMatrix<f64>,
    lag_order: usize,
}

impl CoefficientMatrix {
    pub fn new(values: DMatrix<f64>, lag_order: usize) -> Result<Self> {
        let n = values.nrows();
        if n == 0 || lag_order == 0 || values.ncols() != n * lag_order {
            return Err(Error::DimensionMismatch {
                context: "coefficient matrix",
                expected: format!("N x KN with K={lag_order}"),
                found: format!("{} x {}", values.nrows(), values.ncols()),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("coefficients must be finite".into()));
        }
        Ok(Self { values, lag_order })
    }

    pub fn zeros(n_series: usize, lag_order: usize) -> Self {
        Self {
            values: DMatrix::zeros(n_series, n_series * lag_order),
            lag_order,
        }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_series(&self) -> usize {
        self.values.nrows()
    }

    pub fn lag_order(&self) -> usize {
        self.lag_order
    }

    /// `Phi_k` for `k` in `1..=K`.
    pub fn lag_block(&self, k: usize) -> DMatrix<f64> {
        let n = self.n_series();
        self.values.columns((k - 1) * n, n).into_owned()
    }

    /// The `KN x KN` companion matrix: `Phi` on the top block row and an
    /// identity on the block subdiagonal.
    pub fn companion(&self) -> DMatrix<f64> {
        let n = self.n_series();
        let kn = n * self.lag_order;
        let mut a = DMatrix::zeros(kn, kn);
        a.rows_mut(0, n).copy_from(&self.values);
        for i in n..kn {
            a[(i, i - n)] = 1.0;
        }
        a
    }

    pub fn sparsity(&self) -> SparsityPattern {
        SparsityPattern::from_matrix(&self.values)
    }
}

/// Largest eigenvalue modulus of the companion matrix.
pub fn companion_spectral_radius(phi: &CoefficientMatrix) -> Result<f64> {
    if phi.values().iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let a = phi.companion();
    let max_iter = 1000 * a.nrows().max(10);
    let schur = Schur::try_new(a, f64::EPSILON, max_iter)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

/// Support `S` of a coefficient matrix with its per-row sizes `s_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparsityPattern {
    support: Vec<(usize, usize)>,
    per_row_sizes: Vec<usize>,
    max_row_size: usize,
}

impl SparsityPattern {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut support = Vec::new();
        let mut per_row_sizes = vec![0; m.nrows()];
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    support.push((i, j));
                    per_row_sizes[i] += 1;
                }
            }
        }
        let max_row_size = per_row_sizes.iter().copied().max().unwrap_or(0);
        Self {
            support,
            per_row_sizes,
            max_row_size,
        }
    }

    /// Row-major sorted `(i, j)` pairs.
    pub fn support(&self) -> &[(usize, usize)] {
        &self.support
    }

    pub fn per_row_sizes(&self) -> &[usize] {
        &self.per_row_sizes
    }

    pub fn max_row_size(&self) -> usize {
        self.max_row_size
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.support.binary_search(&(i, j)).is_ok()
    }
}

/// Two-component normal mixture, standardized to mean zero and unit variance
/// before use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureParams {
    pub pi: f64,
    pub mu_xi: f64,
    pub sigma_xi: f64,
    pub mu_zeta: f64,
    pub sigma_zeta: f64,
}

impl Default for MixtureParams {
    /// Skewed, heavy-tailed design: mean 0.4, s.d. 3.88, skewness 1.86.
    fn default() -> Self {
        Self {
            pi: 0.9,
            mu_xi: 0.0,
            sigma_xi: 2.0,
            mu_zeta: 4.0,
            sigma_zeta: 10.0,
        }
    }
}

impl MixtureParams {
    fn validate(&self) -> Result<()> {
        let finite = [self.pi, self.mu_xi, self.sigma_xi, self.mu_zeta, self.sigma_zeta]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(0.0..=1.0).contains(&self.pi) || self.variance() <= 0.0 {
            return Err(Error::InvalidInput(format!("invalid mixture parameters {self:?}")));
        }
        Ok(())
    }

    // Raw moments E[eta^k], k = 0..=4.
    fn raw_moments(&self) -> [f64; 5] {
        let normal = |m: f64, s: f64| {
            let s2 = s * s;
            [
                1.0,
                m,
                m * m + s2,
                m.powi(3) + 3.0 * m * s2,
                m.powi(4) + 6.0 * m * m * s2 + 3.0 * s2 * s2,
            ]
        };
        let a = normal(self.mu_xi, self.sigma_xi);
        let b = normal(self.mu_zeta, self.sigma_zeta);
        std::array::from_fn(|k| self.pi * a[k] + (1.0 - self.pi) * b[k])
    }

    pub fn mean(&self) -> f64 {
        self.raw_moments()[1]
    }

    pub fn variance(&self) -> f64 {
        let r = self.raw_moments();
        r[2] - r[1] * r[1]
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn skewness(&self) -> f64 {
        let r = self.raw_moments();
        let mu = r[1];
        let c3 = r[3] - 3.0 * mu * r[2] + 2.0 * mu.powi(3);
        c3 / self.variance().powf(1.5)
    }

    /// Non-excess kurtosis `E[(eta - mu)^4] / sigma^4`.
    pub fn kurtosis(&self) -> f64 {
        let r = self.raw_moments();
        let mu = r[1];
        let c4 = r[4] - 4.0 * mu * r[3] + 6.0 * mu * mu * r[2] - 3.0 * mu.powi(4);
        c4 / self.variance().powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorDistribution {
    #[default]
    StandardNormal,
    MixtureNormal(MixtureParams),
}

impl ErrorDistribution {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ErrorDistribution::StandardNormal => StandardNormal.sample(rng),
            ErrorDistribution::MixtureNormal(p) => {
                let first = rng.random::<f64>() < p.pi;
                let z: f64 = StandardNormal.sample(rng);
                let eta = if first {
                    p.mu_xi + p.sigma_xi * z
                } else {
                    p.mu_zeta + p.sigma_zeta * z
                };
                (eta - p.mean()) / p.std_dev()
            }
        }
    }
}

/// Error covariance `Sigma_u` and the law of the standardized innovations.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSpec {
    covariance: DMatrix<f64>,
    distribution: ErrorDistribution,
    chol_lower: DMatrix<f64>,
}

impl ErrorSpec {
    pub fn new(covariance: DMatrix<f64>, distribution: ErrorDistribution) -> Result<Self> {
        if !covariance.is_square() || covariance.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                context: "error covariance",
                expected: "square N x N".into(),
                found: format!("{} x {}", covariance.nrows(), covariance.ncols()),
            });
        }
        if covariance != covariance.transpose() {
            return Err(Error::InvalidInput("error covariance must be symmetric".into()));
        }
        if let ErrorDistribution::MixtureNormal(p) = &distribution {
            p.validate()?;
        }
        let chol_lower = covariance
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?
            .l();
        Ok(Self {
            covariance,
            distribution,
            chol_lower,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n), ErrorDistribution::StandardNormal)
            .expect("identity is positive definite")
    }

    pub fn with_distribution(self, distribution: ErrorDistribution) -> Result<Self> {
        Self::new(self.covariance, distribution)
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn distribution(&self) -> &ErrorDistribution {
        &self.distribution
    }

    pub fn n_series(&self) -> usize {
        self.covariance.nrows()
    }
}

/// Draws `u_1, ..., u_T` as columns, `u_t = L eps_t` with `L` the lower
/// Cholesky factor of `Sigma_u`.
pub fn sample_errors<R: Rng + ?Sized>(spec: &ErrorSpec, t: usize, rng: &mut R) -> DMatrix<f64> {
    let n = spec.n_series();
    let mut eps = DMatrix::zeros(n, t);
    for col in 0..t {
        for i in 0..n {
            eps[(i, col)] = spec.distribution.draw(rng);
        }
    }
    &spec.chol_lower * eps
}

/// Observation matrix `Y` with its lag design `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelData {
    observations: DMatrix<f64>,
    design: DMatrix<f64>,
    dims: VarDims,
}

impl PanelData {
    /// Builds the panel from `N x (K + T)` raw columns; the first `K` columns
    /// serve only as presample lags.
    pub fn from_series(series: &DMatrix<f64>, lag_order: usize) -> Result<Self> {
        let n = series.nrows();
        let total = series.ncols();
        if total <= lag_order {
            return Err(Error::InvalidInput(format!(
                "need more than K={lag_order} observations, got {total}"
            )));
        }
        let dims = VarDims::new(n, lag_order, total - lag_order)?;
        let t_obs = dims.n_obs;
        let observations = series.columns(lag_order, t_obs).into_owned();
        let mut design = DMatrix::zeros(n * lag_order, t_obs);
        for t in 0..t_obs {
            for k in 1..=lag_order {
                let src = series.column(lag_order + t - k);
                design.view_mut(((k - 1) * n, t), (n, 1)).copy_from(&src);
            }
        }
        Ok(Self {
            observations,
            design,
            dims,
        })
    }

    pub fn observations(&self) -> &DMatrix<f64> {
        &self.observations
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn dims(&self) -> VarDims {
        self.dims
    }

    /// Checks the lag-shift structure bit-exactly: block 1 of `X[:, t]` is
    /// `Y[:, t-1]` and block `k` of `X[:, t]` is block `k-1` of `X[:, t-1]`.
    pub fn design_is_consistent(&self) -> bool {
        let n = self.dims.n_series;
        let x = &self.design;
        let y = &self.observations;
        for t in 1..self.dims.n_obs {
            for i in 0..n {
                if x[(i, t)].to_bits() != y[(i, t - 1)].to_bits() {
                    return false;
                }
                for k in 2..=self.dims.lag_order {
                    let cur = x[((k - 1) * n + i, t)];
                    let prev = x[((k - 2) * n + i, t - 1)];
                    if cur.to_bits() != prev.to_bits() {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// `psi_ij = rho^(1 + |i-j|/4)` inside the band `|i-j| <= m`, zero outside.
pub fn build_psi(n: usize, m: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        let d = i.abs_diff(j);
        if d <= m {
            rho.powf(1.0 + d as f64 / 4.0)
        } else {
            0.0
        }
    })
}

/// Banded VAR(1) coefficient design with random signs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDesign {
    pub n: usize,
    pub m: usize,
    pub rho: f64,
    pub spectral_cap: f64,
    pub max_redraws: usize,
}

impl CoefficientDesign {
    pub fn new(n: usize, m: usize, rho: f64) -> Self {
        Self {
            n,
            m,
            rho,
            spectral_cap: 0.96,
            max_redraws: 10_000,
        }
    }

    /// Redraws the sign matrix until the companion spectral radius is at most
    /// `spectral_cap`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CoefficientMatrix> {
        if self.n == 0 || self.rho.abs() >= 1.0 || !self.rho.is_finite() {
            return Err(Error::InvalidInput(format!(
                "need n >= 1 and |rho| < 1, got n={}, rho={}",
                self.n, self.rho
            )));
        }
        if !(self.spectral_cap > 0.0 && self.spectral_cap <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "spectral cap must lie in (0, 1], got {}",
                self.spectral_cap
            )));
        }
        let psi = build_psi(self.n, self.m, self.rho);
        for _ in 0..self.max_redraws {
            let mut values = psi.clone();
            for v in values.iter_mut() {
                // the sign is drawn for every cell so the stream position
                // does not depend on the band
                if !rng.random::<bool>() {
                    *v = -*v;
                }
            }
            let phi = CoefficientMatrix::new(values, 1)?;
            if companion_spectral_radius(&phi)? <= self.spectral_cap {
                return Ok(phi);
            }
        }
        Err(Error::RedrawLimit {
            attempts: self.max_redraws,
            n: self.n,
            m: self.m,
            rho: self.rho,
        })
    }
}

pub fn build_coefficient_matrix<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    rho: f64,
    spectral_cap: f64,
    rng: &mut R,
) -> Result<CoefficientMatrix> {
    CoefficientDesign {
        spectral_cap,
        ..CoefficientDesign::new(n, m, rho)
    }
    .draw(rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaUKind {
    #[default]
    Diagonal,
    Banded,
}

/// Random error covariance. `Diagonal` draws `sigma_i^2 ~ U(0.5, 1.5)`.
/// `Banded` draws `sigma*_i^2 ~ U(0.1, 1.9)`, fills the off-diagonals within
/// distance 10 with `min(sigma*_i^2, sigma*_j^2) - |i-j|/10` where positive,
/// and if the result is not positive definite shifts the diagonal by
/// `c = 0.1 - lambda_min` and divides by the mean diagonal.
pub fn build_sigma_u<R: Rng + ?Sized>(n: usize, kind: SigmaUKind, rng: &mut R) -> Result<ErrorSpec> {
    if n == 0 {
        return Err(Error::InvalidInput("need n >= 1".into()));
    }
    let covariance = match kind {
        SigmaUKind::Diagonal => {
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
            DMatrix::from_diagonal(&DVector::from_vec(d))
        }
        SigmaUKind::Banded => {
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.9)).collect();
            let star = DMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    return d[i];
                }
                let dist = i.abs_diff(j);
                let v = d[i].min(d[j]) - dist as f64 / 10.0;
                if dist <= 10 && v > 0.0 {
                    v
                } else {
                    0.0
                }
            });
            let lambda_min = SymmetricEigen::new(star.clone()).eigenvalues.min();
            if lambda_min > 0.0 {
                star
            } else {
                let c = -lambda_min + 0.1;
                let shifted = star + DMatrix::identity(n, n) * c;
                let mean_diag = shifted.diagonal().mean();
                let mut s = shifted / mean_diag;
                // keep exact symmetry after the scalar ops
                s = (&s + s.transpose()) * 0.5;
                s
            }
        }
    };
    ErrorSpec::new(covariance, ErrorDistribution::StandardNormal)
}

/// Default burn-in length `50 + K`.
pub fn default_burn_in(lag_order: usize) -> usize {
    50 + lag_order
}

/// Simulates `y_t = sum_k Phi_k y_{t-k} + u_t` from zero initial values.
/// The first `burn_in` draws are dropped, the next `K` become presample lags,
/// and the remaining `t` form the panel.
pub fn simulate_var<R: Rng + ?Sized>(
    phi: &CoefficientMatrix,
    spec: &ErrorSpec,
    t: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<PanelData> {
    let n = phi.n_series();
    let k = phi.lag_order();
    if spec.n_series() != n {
        return Err(Error::DimensionMismatch {
            context: "simulate_var",
            expected: format!("Sigma_u of size {n}"),
            found: format!("{}", spec.n_series()),
        });
    }
    let radius = companion_spectral_radius(phi)?;
    if radius >= 1.0 {
        return Err(Error::NonStationary { radius });
    }
    let total = burn_in + k + t;
    let u = sample_errors(spec, total, rng);
    let mut y = DMatrix::<f64>::zeros(n, total);
    let mut lags = DVector::<f64>::zeros(n * k);
    let coef = phi.values();
    for s in 0..total {
        let mut yt = u.column(s).into_owned();
        yt.gemv(1.0, coef, &lags, 1.0);
        y.set_column(s, &yt);
        if k > 1 {
            for i in (n..n * k).rev() {
                lags[i] = lags[i - n];
            }
        }
        lags.rows_mut(0, n).copy_from(&yt);
    }
    let series = y.columns(burn_in, k + t).into_owned();
    PanelData::from_series(&series, k)
}
