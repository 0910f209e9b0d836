//! End-to-end discovery: lasso, CLIME, debiasing, t-statistics, thresholds.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_nulls, bootstrap_threshold, design_fingerprint, BootstrapInputs, BootstrapNull, BootstrapSettings};
use crate::clime::{estimate_precision_auto, sample_covariance, Lambda1Strategy, PrecisionEstimate};
use crate::debias::{debias, t_field, DebiasedEstimate, Hypotheses, SeVariant, TestField};
use crate::error::{Error, Result};
use crate::lasso::{fit_all, residual_variance, select_lambda, DofRule, LambdaStrategy, LassoFit, LassoSettings, Penalty, ResidualVariances};
use crate::model::PanelData;
use crate::testing::{asymptotic_threshold, discoveries, DiscoverySet, Procedure};

/// Screened set `S~` whose complement feeds the bootstrap null.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScreenRule {
    #[default]
    LassoSupport,
    AsymptoticDiscoveries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub q: f64,
    pub a: f64,
    pub procedures: Vec<Procedure>,
    pub se_variants: Vec<SeVariant>,
    pub lambda: LambdaStrategy,
    pub lambda1: Lambda1Strategy,
    pub ridge_epsilon: f64,
    pub dof: DofRule,
    pub screen: ScreenRule,
    pub bootstrap: BootstrapSettings,
    pub lasso: LassoSettings,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            q: 0.1,
            a: 3.1,
            procedures: vec![Procedure::Asymptotic, Procedure::Bootstrap],
            se_variants: vec![SeVariant::Sandwich],
            lambda: LambdaStrategy::default(),
            lambda1: Lambda1Strategy::default(),
            ridge_epsilon: 0.0,
            dof: DofRule::default(),
            screen: ScreenRule::default(),
            bootstrap: BootstrapSettings::default(),
            lasso: LassoSettings::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::InvalidInput(format!("q must lie in [0, 1], got {}", self.q)));
        }
        if !(self.a > 3.0) {
            return Err(Error::InvalidInput(format!("a must exceed 3, got {}", self.a)));
        }
        if self.procedures.is_empty() || self.se_variants.is_empty() {
            return Err(Error::InvalidInput("need at least one procedure and one standard-error variant".into()));
        }
        if !(self.ridge_epsilon >= 0.0) {
            return Err(Error::InvalidInput(format!("ridge_epsilon must be nonnegative, got {}", self.ridge_epsilon)));
        }
        if self.procedures.contains(&Procedure::Bootstrap) && self.bootstrap.b_draws == 0 {
            return Err(Error::InvalidInput("bootstrap needs at least one draw".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub procedure: Procedure,
    pub se_variant: SeVariant,
    pub discoveries: DiscoverySet,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub fit: LassoFit,
    pub precision: PrecisionEstimate,
    pub sigma_x: DMatrix<f64>,
    pub estimate: DebiasedEstimate,
    pub variances: ResidualVariances,
    /// One field per requested variant, in request order.
    pub fields: Vec<TestField>,
    pub nulls: Vec<BootstrapNull>,
    /// Ordered by variant, then procedure.
    pub outcomes: Vec<Outcome>,
}

impl Analysis {
    pub fn outcome(&self, procedure: Procedure, variant: SeVariant) -> Option<&Outcome> {
        self.outcomes
            .iter()
            .find(|o| o.procedure == procedure && o.se_variant == variant)
    }
}

pub fn analyze(data: &PanelData, config: &PipelineConfig) -> Result<Analysis> {
    config.validate()?;
    let penalty = select_lambda(data, &config.lambda, &config.lasso)?;
    analyze_with_penalty(data, &penalty, config)
}

/// As [`analyze`] with the penalty already chosen.
pub fn analyze_with_penalty(data: &PanelData, penalty: &Penalty, config: &PipelineConfig) -> Result<Analysis> {
    config.validate()?;
    let dims = data.dims();
    let fit = fit_all(data, penalty, &config.lasso)?;
    let sigma_x = sample_covariance(data);
    let precision = estimate_precision_auto(&sigma_x, &config.lambda1, config.ridge_epsilon)?;
    let estimate = debias(&fit, data, &precision)?;
    let variances = residual_variance(&fit, config.dof)?;
    let hypotheses = Hypotheses::all(dims.n_series, dims.n_regressors());
    let fields = config
        .se_variants
        .iter()
        .map(|&v| t_field(&estimate, &variances, &precision, &sigma_x, dims.n_obs, v, &hypotheses))
        .collect::<Result<Vec<_>>>()?;

    let mut asymptotic = Vec::with_capacity(fields.len());
    for field in &fields {
        let th = asymptotic_threshold(field, config.q, config.a)?;
        asymptotic.push(discoveries(field, &estimate, &th, Procedure::Asymptotic));
    }

    let mut nulls = Vec::new();
    if config.procedures.contains(&Procedure::Bootstrap) {
        let run = |screened: &[(usize, usize)], variants: &[SeVariant]| -> Result<Vec<BootstrapNull>> {
            let inputs = BootstrapInputs {
                design: data.design(),
                fit: &fit,
                precision: &precision,
                sigma_x: &sigma_x,
                screened,
                hypotheses: &hypotheses,
                lasso_settings: config.lasso,
            };
            bootstrap_nulls(&inputs, variants, &config.bootstrap)
        };
        nulls = match config.screen {
            ScreenRule::LassoSupport => run(fit.active_sets.support(), &config.se_variants)?,
            ScreenRule::AsymptoticDiscoveries => {
                let mut out = Vec::with_capacity(fields.len());
                for (k, set) in asymptotic.iter().enumerate() {
                    let mut screened = set.pairs();
                    screened.sort_unstable();
                    out.extend(run(&screened, &config.se_variants[k..=k])?);
                }
                out
            }
        };
        let fingerprint = design_fingerprint(data.design());
        if nulls.iter().any(|n| n.design_fingerprint != fingerprint) {
            return Err(Error::Numerical("bootstrap refits saw a different design".into()));
        }
    }

    let mut outcomes = Vec::new();
    for (k, (field, asy)) in fields.iter().zip(asymptotic).enumerate() {
        let variant = config.se_variants[k];
        for &procedure in &config.procedures {
            let set = match procedure {
                Procedure::Asymptotic => asy.clone(),
                Procedure::Bootstrap => {
                    let th = bootstrap_threshold(field, &nulls[k], config.q, config.a)?;
                    discoveries(field, &estimate, &th, Procedure::Bootstrap)
                }
            };
            outcomes.push(Outcome {
                procedure,
                se_variant: variant,
                discoveries: set,
            });
        }
    }

    Ok(Analysis {
        fit,
        precision,
        sigma_x,
        estimate,
        variances,
        fields,
        nulls,
        outcomes,
    })
}
