use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use varfdr::bootstrap::{BootstrapSettings, MultiplierKind};
use varfdr::clime::Lambda1Strategy;
use varfdr::debias::SeVariant;
use varfdr::lasso::{DofRule, LambdaStrategy, LassoSettings};
use varfdr::model::{ErrorDistribution, SigmaUKind};
use varfdr::pipeline::{PipelineConfig, ScreenRule};
use varfdr::testing::Procedure;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcedureChoice {
    Asymptotic,
    Bootstrap,
    #[default]
    Both,
}

impl ProcedureChoice {
    pub fn procedures(&self) -> Vec<Procedure> {
        match self {
            ProcedureChoice::Asymptotic => vec![Procedure::Asymptotic],
            ProcedureChoice::Bootstrap => vec![Procedure::Bootstrap],
            ProcedureChoice::Both => vec![Procedure::Asymptotic, Procedure::Bootstrap],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub path: PathBuf,
    pub header: bool,
    pub delimiter: char,
    pub demean: bool,
    pub standardize: bool,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::new(),
            header: true,
            delimiter: ',',
            demean: true,
            standardize: false,
        }
    }
}

/// Simulated input following the banded random-sign design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub n: usize,
    pub t: usize,
    pub m: usize,
    pub rho: f64,
    pub spectral_cap: f64,
    pub sigma_u_kind: SigmaUKind,
    pub error_dist: ErrorDistribution,
    /// Simulate with all coefficients zero.
    pub zero_coefficients: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            n: 20,
            t: 200,
            m: 2,
            rho: 0.4,
            spectral_cap: 0.96,
            sigma_u_kind: SigmaUKind::Diagonal,
            error_dist: ErrorDistribution::StandardNormal,
            zero_coefficients: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<InputConfig>,
    pub simulate: Option<SimulateConfig>,
    pub lag_order: usize,
    pub q: f64,
    pub procedure: ProcedureChoice,
    pub se_variant: SeVariant,
    pub a: f64,
    pub b_draws: usize,
    pub multiplier: MultiplierKind,
    pub lambda: LambdaStrategy,
    pub lambda1: Lambda1Strategy,
    pub ridge_epsilon: f64,
    pub dof: DofRule,
    pub screen: ScreenRule,
    pub include_self_lags: bool,
    /// Also write the pooled bootstrap null.
    pub dump_null: bool,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
    /// Optional series name to group label map used for DOT colouring.
    pub groups: BTreeMap<String, String>,
    pub lasso: LassoSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            input: None,
            simulate: None,
            lag_order: 1,
            q: p.q,
            procedure: ProcedureChoice::Both,
            se_variant: SeVariant::Sandwich,
            a: p.a,
            b_draws: p.bootstrap.b_draws,
            multiplier: p.bootstrap.multiplier,
            lambda: p.lambda,
            lambda1: p.lambda1,
            ridge_epsilon: p.ridge_epsilon,
            dof: p.dof,
            screen: p.screen,
            include_self_lags: false,
            dump_null: false,
            seed: 1,
            output_dir: PathBuf::from("varfdr-out"),
            threads: None,
            groups: BTreeMap::new(),
            lasso: p.lasso,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> CliResult<()> {
        match (&self.input, &self.simulate) {
            (Some(_), Some(_)) => return Err(field_error("input", "give either [input] or [simulate], not both")),
            (None, None) => return Err(field_error("input", "one of [input] or [simulate] is required")),
            (Some(i), None) if i.path.as_os_str().is_empty() => {
                return Err(field_error("input.path", "input path is empty"))
            }
            _ => {}
        }
        if self.lag_order == 0 {
            return Err(field_error("lag_order", "must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(field_error("threads", "must be at least 1"));
        }
        if let Some(s) = &self.simulate {
            if s.n == 0 || s.t <= self.lag_order {
                return Err(field_error("simulate", "need n >= 1 and t > lag_order"));
            }
        }
        self.pipeline()
            .validate()
            .map_err(|e| field_error("pipeline", &e.to_string()))
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            q: self.q,
            a: self.a,
            procedures: self.procedure.procedures(),
            se_variants: vec![self.se_variant],
            lambda: self.lambda.clone(),
            lambda1: self.lambda1.clone(),
            ridge_epsilon: self.ridge_epsilon,
            dof: self.dof,
            screen: self.screen,
            bootstrap: BootstrapSettings {
                b_draws: self.b_draws,
                multiplier: self.multiplier,
                seed: self.seed,
                ..BootstrapSettings::default()
            },
            lasso: self.lasso,
        }
    }
}

fn field_error(field: &str, message: &str) -> CliError {
    CliError::Config {
        message: format!("{field}: {message}"),
        field: Some(field.to_string()),
    }
}

/// Reads and parses a TOML file; unknown keys are rejected.
pub fn load_toml<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_toml(&text)
}

pub fn parse_toml<T: DeserializeOwned>(text: &str) -> CliResult<T> {
    toml::from_str(text).map_err(|e: toml::de::Error| {
        let span = e.span().map(|s| format!(" at bytes {}..{}", s.start, s.end)).unwrap_or_default();
        CliError::Config {
            message: format!("{}{span}", e.message()),
            field: field_from_message(e.message()),
        }
    })
}

fn field_from_message(message: &str) -> Option<String> {
    let start = message.find('`')? + 1;
    let end = start + message[start..].find('`')?;
    Some(message[start..end].to_string())
}

pub fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("configuration types serialize to TOML")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_simulate_config() {
        let c: RunConfig = parse_toml("q = 0.05\n[simulate]\nn = 10\n").unwrap();
        assert_eq!(c.q, 0.05);
        assert_eq!(c.simulate.as_ref().unwrap().n, 10);
        c.validate().unwrap();
        assert_eq!(c.pipeline().procedures.len(), 2);
    }

    #[test]
    fn unknown_key_names_field() {
        let err = parse_toml::<RunConfig>("qq = 0.1\n").unwrap_err();
        match err {
            CliError::Config { field, .. } => assert_eq!(field.as_deref(), Some("qq")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation_errors() {
        let c = RunConfig::default();
        assert!(c.validate().is_err());
        let mut c = RunConfig {
            simulate: Some(SimulateConfig::default()),
            ..RunConfig::default()
        };
        c.q = 1.5;
        assert!(matches!(c.validate(), Err(CliError::Config { .. })));
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig {
            simulate: Some(SimulateConfig::default()),
            threads: Some(2),
            ..RunConfig::default()
        };
        let back: RunConfig = parse_toml(&to_toml(&c)).unwrap();
        assert_eq!(back, c);
    }
}
