//! Directional error metrics and the Monte Carlo harness.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::debias::SeVariant;
use crate::error::{Error, Result};
use crate::model::{
    build_sigma_u, default_burn_in, simulate_var, CoefficientDesign, CoefficientMatrix, ErrorDistribution, SigmaUKind,
};
use crate::par;
use crate::pipeline::{analyze, PipelineConfig};
use crate::rng::{self, stage};
use crate::testing::{DiscoverySet, Procedure, ThresholdRule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionalScore {
    pub dfdp: f64,
    pub dpower: f64,
    pub n_rejected: usize,
    pub n_sign_errors: usize,
}

/// A rejection is a sign error unless its estimated sign matches a nonzero
/// true coefficient.
pub fn score(set: &DiscoverySet, truth: &CoefficientMatrix) -> DirectionalScore {
    let phi = truth.values();
    let mut errors = 0;
    let mut correct = 0;
    for d in &set.rejected {
        let true_sign = sign(phi[(d.row, d.col)]);
        if true_sign != 0 && true_sign == d.sign {
            correct += 1;
        } else {
            errors += 1;
        }
    }
    let support = phi.iter().filter(|v| **v != 0.0).count();
    let n_rejected = set.rejected.len();
    DirectionalScore {
        dfdp: errors as f64 / n_rejected.max(1) as f64,
        dpower: if support == 0 { 1.0 } else { correct as f64 / support as f64 },
        n_rejected,
        n_sign_errors: errors,
    }
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub n: usize,
    pub t: usize,
    /// Fitted lag order. The simulated process is VAR(1) padded with zero
    /// blocks when `k > 1`.
    pub k: usize,
    pub m: usize,
    pub rho: f64,
    pub spectral_cap: f64,
    pub error_dist: ErrorDistribution,
    pub sigma_u_kind: SigmaUKind,
    pub n_reps: usize,
    /// `None` uses the experiment default: redraw for Monte Carlo tables,
    /// fixed for the stability experiment.
    pub redraw_phi: Option<bool>,
    pub seed: u64,
    pub pipeline: PipelineConfig,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n: 50,
            t: 200,
            k: 1,
            m: 2,
            rho: 0.4,
            spectral_cap: 0.96,
            error_dist: ErrorDistribution::StandardNormal,
            sigma_u_kind: SigmaUKind::Diagonal,
            n_reps: 200,
            redraw_phi: None,
            seed: 1,
            pipeline: PipelineConfig::default(),
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.k == 0 || self.t <= self.k {
            return Err(Error::InvalidInput(format!(
                "need n >= 1, k >= 1 and t > k, got n={}, k={}, t={}",
                self.n, self.k, self.t
            )));
        }
        if self.n_reps == 0 {
            return Err(Error::InvalidInput("n_reps must be positive".into()));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::InvalidInput(format!("|rho| must be below 1, got {}", self.rho)));
        }
        self.pipeline.validate()
    }

    /// `(procedure, variant)` cells in output order.
    pub fn cells(&self) -> Vec<(Procedure, SeVariant)> {
        self.pipeline
            .se_variants
            .iter()
            .flat_map(|&v| self.pipeline.procedures.iter().map(move |&p| (p, v)))
            .collect()
    }

    fn design(&self) -> CoefficientDesign {
        CoefficientDesign {
            spectral_cap: self.spectral_cap,
            ..CoefficientDesign::new(self.n, self.m, self.rho)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub procedure: Procedure,
    pub se_variant: SeVariant,
    pub score: DirectionalScore,
    pub t0: f64,
    pub rule: ThresholdRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub index: usize,
    pub cells: Vec<CellScore>,
    pub true_support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub procedure: Procedure,
    pub se_variant: SeVariant,
    pub dfdr: f64,
    pub dfdr_se: f64,
    pub dpower: f64,
    pub dpower_se: f64,
    /// Fraction of replications with at least one sign error.
    pub dfwer: f64,
    pub mean_rejections: f64,
    pub fallback_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub config: McConfig,
    pub summaries: Vec<CellSummary>,
    pub replications: Vec<Replication>,
    pub failures: Vec<ReplicationFailure>,
    pub wall_time_secs: f64,
}

impl McReport {
    pub fn summary(&self, procedure: Procedure, variant: SeVariant) -> Option<&CellSummary> {
        self.summaries
            .iter()
            .find(|s| s.procedure == procedure && s.se_variant == variant)
    }
}

/// Largest fraction of failed replications a run tolerates.
pub const MAX_FAILED_REPLICATIONS: f64 = 0.02;

fn pad_lags(phi: CoefficientMatrix, k: usize) -> Result<CoefficientMatrix> {
    if k == phi.lag_order() {
        return Ok(phi);
    }
    let n = phi.n_series();
    let mut values = DMatrix::zeros(n, n * k);
    values.columns_mut(0, n).copy_from(phi.values());
    CoefficientMatrix::new(values, k)
}

struct World {
    phi: CoefficientMatrix,
    spec: crate::model::ErrorSpec,
}

fn draw_world(config: &McConfig, path: &[u64]) -> Result<World> {
    let mut coef_rng = rng::stream(config.seed, &[path, &[stage::COEFFICIENTS]].concat());
    let phi = pad_lags(config.design().draw(&mut coef_rng)?, config.k)?;
    let mut sigma_rng = rng::stream(config.seed, &[path, &[stage::SIGMA_U]].concat());
    let spec = build_sigma_u(config.n, config.sigma_u_kind, &mut sigma_rng)?.with_distribution(config.error_dist)?;
    Ok(World { phi, spec })
}

/// Path prefix for quantities shared by every replication in fixed mode.
const FIXED: u64 = u64::MAX;

fn run_replication(config: &McConfig, fixed: Option<&World>, rep: usize) -> Result<(Replication, crate::pipeline::Analysis, CoefficientMatrix)> {
    let owned;
    let world = match fixed {
        Some(w) => w,
        None => {
            owned = draw_world(config, &[rep as u64])?;
            &owned
        }
    };
    let mut err_rng = rng::stream(config.seed, &[rep as u64, stage::ERRORS]);
    let data = simulate_var(&world.phi, &world.spec, config.t, default_burn_in(config.k), &mut err_rng)?;
    let mut pipeline = config.pipeline.clone();
    pipeline.bootstrap.seed = rng::stream(config.seed, &[rep as u64, stage::BOOTSTRAP]).next_u64();
    let analysis = analyze(&data, &pipeline)?;
    let cells = analysis
        .outcomes
        .iter()
        .map(|o| CellScore {
            procedure: o.procedure,
            se_variant: o.se_variant,
            score: score(&o.discoveries, &world.phi),
            t0: o.discoveries.threshold.t0,
            rule: o.discoveries.threshold.rule,
        })
        .collect();
    let replication = Replication {
        index: rep,
        cells,
        true_support: world.phi.sparsity().len(),
    };
    Ok((replication, analysis, world.phi.clone()))
}

/// Neumaier-compensated mean and standard error of the mean.
fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let ss = compensated_sum(values.iter().map(|v| (v - mean).powi(2)));
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}

fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

fn summarize(cells: &[(Procedure, SeVariant)], reps: &[Replication]) -> Vec<CellSummary> {
    cells
        .iter()
        .enumerate()
        .map(|(k, &(procedure, se_variant))| {
            let col = |f: &dyn Fn(&CellScore) -> f64| reps.iter().map(|r| f(&r.cells[k])).collect::<Vec<_>>();
            let (dfdr, dfdr_se) = mean_and_se(&col(&|c| c.score.dfdp));
            let (dpower, dpower_se) = mean_and_se(&col(&|c| c.score.dpower));
            let (dfwer, _) = mean_and_se(&col(&|c| (c.score.n_sign_errors > 0) as u8 as f64));
            let (mean_rejections, _) = mean_and_se(&col(&|c| c.score.n_rejected as f64));
            let (fallback_rate, _) = mean_and_se(&col(&|c| (c.rule == ThresholdRule::FwerFallback) as u8 as f64));
            CellSummary {
                procedure,
                se_variant,
                dfdr,
                dfdr_se,
                dpower,
                dpower_se,
                dfwer,
                mean_rejections,
                fallback_rate,
            }
        })
        .collect()
}

fn check_failures(failures: &[ReplicationFailure], total: usize) -> Result<()> {
    if failures.len() as f64 > MAX_FAILED_REPLICATIONS * total as f64 {
        return Err(Error::TooManyFailures {
            what: "replications",
            failed: failures.len(),
            total,
            limit: 100.0 * MAX_FAILED_REPLICATIONS,
        });
    }
    Ok(())
}

/// Runs `n_reps` replications and scores every requested
/// `(procedure, variant)` cell on the same simulated data.
pub fn run_monte_carlo(config: &McConfig) -> Result<McReport> {
    config.validate()?;
    let start = Instant::now();
    let fixed = if config.redraw_phi.unwrap_or(true) {
        None
    } else {
        Some(draw_world(config, &[FIXED])?)
    };
    let results = par::map_indexed(config.n_reps, |rep| {
        run_replication(config, fixed.as_ref(), rep).map(|(r, _, _)| r)
    });
    let mut replications = Vec::with_capacity(config.n_reps);
    let mut failures = Vec::new();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(r) => replications.push(r),
            Err(e) => failures.push(ReplicationFailure {
                index,
                message: e.to_string(),
            }),
        }
    }
    check_failures(&failures, config.n_reps)?;
    let summaries = summarize(&config.cells(), &replications);
    Ok(McReport {
        config: config.clone(),
        summaries,
        replications,
        failures,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    /// True coefficients of the last replication, or the fixed design.
    pub truth: CoefficientMatrix,
    /// Selection frequency of each cell in the lasso support.
    pub lasso: DMatrix<f64>,
    /// Selection frequency under the first requested variant's asymptotic
    /// procedure.
    pub multiple_test: DMatrix<f64>,
    pub n_reps: usize,
    pub failures: Vec<ReplicationFailure>,
}

impl StabilityReport {
    /// Mean frequency over the cells where `truth` is zero.
    pub fn false_positive_rate(&self, freq: &DMatrix<f64>) -> f64 {
        let phi = self.truth.values();
        let zeros: Vec<f64> = freq
            .iter()
            .zip(phi.iter())
            .filter(|(_, p)| **p == 0.0)
            .map(|(f, _)| *f)
            .collect();
        mean_and_se(&zeros).0
    }
}

/// Selection frequencies of the lasso support and of Procedure 1 over
/// replications. The coefficient design is held fixed unless
/// `redraw_phi = Some(true)`.
pub fn run_stability_experiment(config: &McConfig) -> Result<StabilityReport> {
    let mut config = config.clone();
    config.pipeline.procedures = vec![Procedure::Asymptotic];
    config.validate()?;
    let redraw = config.redraw_phi.unwrap_or(false);
    let fixed = if redraw { None } else { Some(draw_world(&config, &[FIXED])?) };
    let results = par::map_indexed(config.n_reps, |rep| {
        run_replication(&config, fixed.as_ref(), rep).map(|(_, analysis, phi)| {
            let lasso = analysis.fit.active_sets.support().to_vec();
            let tested = analysis.outcomes[0].discoveries.pairs();
            (lasso, tested, phi)
        })
    });
    let (n, kn) = (config.n, config.n * config.k);
    let mut lasso = DMatrix::zeros(n, kn);
    let mut tested = DMatrix::zeros(n, kn);
    let mut failures = Vec::new();
    let mut ok = 0usize;
    let mut truth = fixed.as_ref().map(|w| w.phi.clone());
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok((l, t, phi)) => {
                ok += 1;
                for p in l {
                    lasso[p] += 1.0;
                }
                for p in t {
                    tested[p] += 1.0;
                }
                if redraw {
                    truth = Some(phi);
                }
            }
            Err(e) => failures.push(ReplicationFailure {
                index,
                message: e.to_string(),
            }),
        }
    }
    check_failures(&failures, config.n_reps)?;
    let denom = ok.max(1) as f64;
    Ok(StabilityReport {
        truth: truth.unwrap_or_else(|| CoefficientMatrix::zeros(n, config.k)),
        lasso: lasso / denom,
        multiple_test: tested / denom,
        n_reps: ok,
        failures,
    })
}
