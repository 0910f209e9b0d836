//! Fixed-design wild bootstrap null distribution of the t-statistics.
//!
//! Each draw multiplies the whole lasso residual vector `u_t` by one scalar
//! `zeta_t`, rebuilds `Y* = Phi^L X + U*` on the original design, refits the
//! lasso with the original penalties and debiases with the original `Omega`.
//! The bootstrap statistics on the pairs outside the screened set are pooled
//! into one empirical null.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clime::PrecisionEstimate;
use crate::debias::{column_scales, debias_parts, t_values_from_scales, Hypotheses, SeVariant, TestField};
use crate::error::{Error, Result};
use crate::lasso::{fit_design_with, GramForm, LassoFit, LassoSettings};
use crate::par;
use crate::rng;
use crate::testing::{check_search_inputs, finish, SortedAbs, ThresholdResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierKind {
    #[default]
    Rademacher,
    Mammen,
}

impl MultiplierKind {
    /// Two-point support as `(value, probability)` pairs.
    pub fn support(&self) -> [(f64, f64); 2] {
        match self {
            MultiplierKind::Rademacher => [(-1.0, 0.5), (1.0, 0.5)],
            MultiplierKind::Mammen => {
                let s5 = 5f64.sqrt();
                [
                    (-(s5 - 1.0) / 2.0, (s5 + 1.0) / (2.0 * s5)),
                    ((s5 + 1.0) / 2.0, (s5 - 1.0) / (2.0 * s5)),
                ]
            }
        }
    }

    pub fn analytic_mean(&self) -> f64 {
        self.support().iter().map(|(v, p)| v * p).sum()
    }

    pub fn analytic_variance(&self) -> f64 {
        let m = self.analytic_mean();
        self.support().iter().map(|(v, p)| p * (v - m).powi(2)).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> Vec<f64> {
        let [(low, p_low), (high, _)] = self.support();
        (0..t)
            .map(|_| if rng.random::<f64>() < p_low { low } else { high })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSettings {
    pub b_draws: usize,
    pub multiplier: MultiplierKind,
    /// Draw `b` uses the child stream `(seed, b)`.
    pub seed: u64,
    /// Largest tolerated fraction of draws dropped for lasso non-convergence.
    pub max_skip_fraction: f64,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        Self {
            b_draws: 100,
            multiplier: MultiplierKind::Rademacher,
            seed: 0,
            max_skip_fraction: 0.05,
        }
    }
}

/// Pooled bootstrap statistics over `S~^c ∩ H` for one standard-error variant.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapNull {
    pub sorted_t_values: Vec<f64>,
    /// Effective number of draws after skipping failures.
    pub b_draws: usize,
    pub skipped_draws: Vec<usize>,
    pub null_set: Hypotheses,
    pub se_variant: SeVariant,
    /// Hash of the design every refit used, for reproducibility records.
    pub design_fingerprint: u64,
}

impl BootstrapNull {
    pub fn from_values(mut values: Vec<f64>, b_draws: usize, null_set: Hypotheses, se_variant: SeVariant) -> Self {
        values.sort_by(f64::total_cmp);
        Self {
            sorted_t_values: values,
            b_draws,
            skipped_draws: Vec::new(),
            null_set,
            se_variant,
            design_fingerprint: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.sorted_t_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted_t_values.is_empty()
    }

    fn count_greater(&self, t: f64) -> usize {
        self.len() - self.sorted_t_values.partition_point(|&v| v <= t)
    }

    fn count_at_most(&self, t: f64) -> usize {
        self.sorted_t_values.partition_point(|&v| v <= t)
    }
}

/// Writes the pooled null as one `t_value` per line under a header.
pub fn write_null_csv<W: std::io::Write>(null: &BootstrapNull, mut out: W) -> std::io::Result<()> {
    writeln!(out, "t_value")?;
    for v in &null.sorted_t_values {
        writeln!(out, "{v:?}")?;
    }
    Ok(())
}

/// Fraction of pooled values strictly above `t`.
pub fn bootstrap_cdf(null: &BootstrapNull, t: f64) -> f64 {
    if null.is_empty() {
        return 0.0;
    }
    null.count_greater(t) as f64 / null.len() as f64
}

pub fn design_fingerprint(x: &DMatrix<f64>) -> u64 {
    let mut h = DefaultHasher::new();
    x.shape().hash(&mut h);
    for v in x.iter() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Inputs shared by every bootstrap draw.
pub struct BootstrapInputs<'a> {
    pub design: &'a DMatrix<f64>,
    pub fit: &'a LassoFit,
    pub precision: &'a PrecisionEstimate,
    pub sigma_x: &'a DMatrix<f64>,
    /// Screened set `S~`, sorted.
    pub screened: &'a [(usize, usize)],
    pub hypotheses: &'a Hypotheses,
    pub lasso_settings: LassoSettings,
}

/// Bootstrap nulls for one or more standard-error variants from the same
/// draws.
pub fn bootstrap_nulls(
    inputs: &BootstrapInputs<'_>,
    variants: &[SeVariant],
    settings: &BootstrapSettings,
) -> Result<Vec<BootstrapNull>> {
    let t = inputs.design.ncols();
    bootstrap_nulls_with(inputs, variants, settings, |b| {
        let mut s = rng::stream(settings.seed, &[b as u64]);
        settings.multiplier.sample(t, &mut s)
    })
}

pub fn bootstrap_null(
    inputs: &BootstrapInputs<'_>,
    variant: SeVariant,
    settings: &BootstrapSettings,
) -> Result<BootstrapNull> {
    Ok(bootstrap_nulls(inputs, &[variant], settings)?.remove(0))
}

/// As [`bootstrap_nulls`] with an arbitrary multiplier source for draw `b`.
pub fn bootstrap_nulls_with<F>(
    inputs: &BootstrapInputs<'_>,
    variants: &[SeVariant],
    settings: &BootstrapSettings,
    multipliers: F,
) -> Result<Vec<BootstrapNull>>
where
    F: Fn(usize) -> Vec<f64> + Sync,
{
    let x = inputs.design;
    let fit = inputs.fit;
    let (n, kn) = fit.coefficients.shape();
    let t = x.ncols();
    if settings.b_draws == 0 {
        return Err(Error::InvalidInput("need at least one bootstrap draw".into()));
    }
    let null_set = inputs.hypotheses.minus(inputs.screened);
    if null_set.is_empty() {
        return Err(Error::EmptyNull);
    }
    if x.nrows() != kn || fit.residuals.shape() != (n, t) {
        return Err(Error::DimensionMismatch {
            context: "bootstrap_null",
            expected: format!("design {kn} x {t}"),
            found: format!("{:?}", x.shape()),
        });
    }
    let scales: Vec<DVector<f64>> = variants
        .iter()
        .map(|&v| column_scales(inputs.precision, inputs.sigma_x, v))
        .collect::<Result<_>>()?;
    let dof = fit.active_sets.per_row_sizes();
    if let Some(i) = (0..n).find(|&i| dof[i] >= t) {
        return Err(Error::InvalidInput(format!("row {i} support size leaves no residual degrees")));
    }
    let gram = crate::lasso::gram(x);
    let fitted = &fit.coefficients * x;
    let original = design_fingerprint(x);

    let draws = par::map_indexed(settings.b_draws, |b| {
        let zeta = multipliers(b);
        assert_eq!(zeta.len(), t, "multiplier length must equal T");
        let mut u_star = fit.residuals.clone();
        for (col, z) in zeta.iter().enumerate() {
            u_star.column_mut(col).scale_mut(*z);
        }
        let y_star = &fitted + &u_star;
        let form = GramForm::with_gram(gram.clone(), x, &y_star);
        let refit = match fit_design_with(
            x,
            &y_star,
            &form,
            &fit.penalty,
            Some(&fit.coefficients),
            &inputs.lasso_settings,
        ) {
            Ok(r) => r,
            Err(_) => return None,
        };
        let resid_star = &u_star - (&refit.coefficients - &fit.coefficients) * x;
        let est = debias_parts(&refit.coefficients, &resid_star, x, &inputs.precision.omega).ok()?;
        let sigma_star = DVector::from_fn(n, |i, _| {
            (resid_star.row(i).norm_squared() / (t - dof[i]) as f64).sqrt()
        });
        let per_variant: Vec<Vec<f64>> = scales
            .iter()
            .map(|s| t_values_from_scales(&est.coefficients, &sigma_star, s, t, null_set.pairs()).0)
            .collect();
        Some(per_variant)
    });

    let mut skipped = Vec::new();
    let mut pooled: Vec<Vec<f64>> = vec![Vec::with_capacity(settings.b_draws * null_set.len()); variants.len()];
    for (b, d) in draws.into_iter().enumerate() {
        match d {
            Some(per_variant) => {
                for (acc, v) in pooled.iter_mut().zip(per_variant) {
                    acc.extend(v);
                }
            }
            None => skipped.push(b),
        }
    }
    let limit = settings.max_skip_fraction;
    if skipped.len() as f64 > limit * settings.b_draws as f64 {
        return Err(Error::TooManyFailures {
            what: "bootstrap draws",
            failed: skipped.len(),
            total: settings.b_draws,
            limit: 100.0 * limit,
        });
    }
    let effective = settings.b_draws - skipped.len();
    Ok(pooled
        .into_iter()
        .zip(variants)
        .map(|(values, &v)| {
            let mut null = BootstrapNull::from_values(values, effective, null_set.clone(), v);
            null.skipped_draws = skipped.clone();
            null.design_fingerprint = original;
            null
        })
        .collect())
}

/// `|H| {Q*(t) + 1 - Q*(-t)} / (|S(t)| v 1)`.
pub fn bootstrap_ratio(field: &TestField, null: &BootstrapNull, t: f64) -> f64 {
    let sorted = SortedAbs::new(field);
    ratio_sorted(&sorted, field.len(), null, t)
}

fn ratio_sorted(sorted: &SortedAbs, h: usize, null: &BootstrapNull, t: f64) -> f64 {
    let m = null.len() as f64;
    let tails = (null.count_greater(t) + null.count_at_most(-t)) as f64 / m;
    h as f64 * tails / sorted.count_at_least(t).max(1) as f64
}

/// Threshold against the bootstrap null. Both the discovery count and the
/// pooled tails are step functions, so the criterion is evaluated at the
/// observed `|T_ij|`, the pooled `|T*|`, `0`, and `t_bar`.
pub fn bootstrap_threshold(field: &TestField, null: &BootstrapNull, q: f64, a: f64) -> Result<ThresholdResult> {
    let cap = check_search_inputs(field, q, a)?;
    if null.is_empty() {
        return Err(Error::EmptyNull);
    }
    let h = field.len();
    let sorted = SortedAbs::new(field);
    let mut candidates: Vec<f64> = std::iter::once(0.0)
        .chain(field.t_values.iter().map(|v| v.abs()))
        .chain(null.sorted_t_values.iter().map(|v| v.abs()))
        .filter(|&v| v < cap)
        .chain(std::iter::once(cap))
        .collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let found = candidates
        .into_iter()
        .find(|&t| ratio_sorted(&sorted, h, null, t) <= q);
    Ok(finish(found, cap, q, a, h))
}
