use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;
use varfdr::bootstrap::write_null_csv;
use varfdr::debias::SeVariant;
use varfdr::evaluation::{run_monte_carlo, run_stability_experiment, McConfig, McReport, StabilityReport};
use varfdr::lasso::{select_lambda, Penalty};
use varfdr::model::{
    build_sigma_u, default_burn_in, simulate_var, CoefficientDesign, CoefficientMatrix, VarDims,
};
use varfdr::pipeline::analyze_with_penalty;
use varfdr::rng::{self, stage};
use varfdr::testing::{export_network, Procedure, ThresholdRule};

use crate::config::{RunConfig, SimulateConfig};
use crate::error::{CliError, CliResult};
use crate::export::{edges_to_csv, export_dot, EdgeRecord};
use crate::ingest::{ingest_csv, write_table, IngestOptions};

/// Simulated series (`N x (K + T)`) and the coefficients that produced them.
pub fn simulate_series(sim: &SimulateConfig, lag_order: usize, seed: u64) -> CliResult<(DMatrix<f64>, CoefficientMatrix)> {
    let phi1 = if sim.zero_coefficients {
        CoefficientMatrix::zeros(sim.n, 1)
    } else {
        CoefficientDesign {
            spectral_cap: sim.spectral_cap,
            ..CoefficientDesign::new(sim.n, sim.m, sim.rho)
        }
        .draw(&mut rng::stream(seed, &[stage::COEFFICIENTS]))?
    };
    let mut values = DMatrix::zeros(sim.n, sim.n * lag_order);
    values.columns_mut(0, sim.n).copy_from(phi1.values());
    let phi = CoefficientMatrix::new(values, lag_order)?;
    let spec = build_sigma_u(sim.n, sim.sigma_u_kind, &mut rng::stream(seed, &[stage::SIGMA_U]))?
        .with_distribution(sim.error_dist)?;
    let panel = simulate_var(
        &phi,
        &spec,
        sim.t,
        default_burn_in(lag_order),
        &mut rng::stream(seed, &[stage::ERRORS]),
    )?;
    let k = lag_order;
    let n = sim.n;
    // rebuild the raw series: the first K design columns hold the presample
    let x = panel.design();
    let y = panel.observations();
    let series = DMatrix::from_fn(n, k + sim.t, |i, s| {
        if s < k {
            x[(i + (k - 1 - s) * n, 0)]
        } else {
            y[(i, s - k)]
        }
    });
    Ok((series, phi))
}

pub fn series_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("y{i}")).collect()
}

#[derive(Debug, Serialize)]
pub struct OutcomeReport {
    pub procedure: Procedure,
    pub se_variant: SeVariant,
    pub t0: f64,
    pub t_bar: f64,
    pub rule: ThresholdRule,
    pub q: f64,
    pub n_hypotheses: usize,
    pub n_discoveries: usize,
    pub n_edges: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap_draws: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped_draws: Option<Vec<usize>>,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub config: RunConfig,
    pub seed: u64,
    pub dims: VarDims,
    pub series: Vec<String>,
    pub lambda: Penalty,
    pub lambda1: f64,
    pub lasso_support: usize,
    pub lasso_kkt_violation: f64,
    pub clime_constraint_violation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_support: Option<usize>,
    pub outcomes: Vec<OutcomeReport>,
    pub outputs: Vec<PathBuf>,
    pub timings_secs: BTreeMap<String, f64>,
}

/// One-line JSON echo of the resolved configuration embedded in artifacts.
pub fn config_echo(config: &impl Serialize) -> String {
    format!("varfdr config: {}", serde_json::to_string(config).expect("config serializes"))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn discover(config: &RunConfig) -> CliResult<RunReport> {
    config.validate()?;
    let mut timings = BTreeMap::new();
    let start = Instant::now();
    let (panel, names, truth) = match (&config.input, &config.simulate) {
        (Some(input), _) => {
            let opts = IngestOptions {
                header: input.header,
                delimiter: u8::try_from(input.delimiter)
                    .map_err(|_| CliError::config("input.delimiter must be a single ASCII character"))?,
                demean: input.demean,
                standardize: input.standardize,
            };
            let ing = ingest_csv(&input.path, config.lag_order, &opts)?;
            (ing.panel, ing.names, None)
        }
        (None, Some(sim)) => {
            let (series, phi) = simulate_series(sim, config.lag_order, config.seed)?;
            let panel = varfdr::model::PanelData::from_series(&series, config.lag_order)?;
            (panel, series_names(sim.n), Some(phi))
        }
        (None, None) => unreachable!("validated"),
    };
    timings.insert("data".to_string(), start.elapsed().as_secs_f64());

    let pipeline = config.pipeline();
    let t = Instant::now();
    let penalty = select_lambda(&panel, &pipeline.lambda, &pipeline.lasso)?;
    timings.insert("lambda_selection".to_string(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    let analysis = analyze_with_penalty(&panel, &penalty, &pipeline)?;
    timings.insert("analysis".to_string(), t.elapsed().as_secs_f64());

    let dims = panel.dims();
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let echo = config_echo(config);
    let mut all_edges = Vec::new();
    let mut outcomes = Vec::new();
    let mut outputs = Vec::new();
    for o in &analysis.outcomes {
        let network = export_network(&o.discoveries, dims, config.include_self_lags);
        let records = EdgeRecord::from_network(&network, &names, &o.discoveries, o.se_variant);
        let dot_path = dir.join(format!("network_{}.dot", o.procedure.name()));
        write_file(&dot_path, &export_dot(&names, &records, &config.groups, Some(&echo)))?;
        outputs.push(dot_path);
        let th = &o.discoveries.threshold;
        let null = (o.procedure == Procedure::Bootstrap).then(|| &analysis.nulls[0]);
        outcomes.push(OutcomeReport {
            procedure: o.procedure,
            se_variant: o.se_variant,
            t0: th.t0,
            t_bar: th.search_cap,
            rule: th.rule,
            q: th.q_level,
            n_hypotheses: th.n_hypotheses,
            n_discoveries: o.discoveries.len(),
            n_edges: records.len(),
            bootstrap_draws: null.map(|n| n.b_draws),
            skipped_draws: null.map(|n| n.skipped_draws.clone()),
        });
        all_edges.extend(records);
    }
    let edges_path = dir.join("edges.csv");
    write_file(&edges_path, &edges_to_csv(&all_edges, Some(&echo)))?;
    outputs.insert(0, edges_path);
    if config.dump_null {
        if let Some(null) = analysis.nulls.first() {
            let path = dir.join("bootstrap_null.csv");
            let mut buf = Vec::new();
            write_null_csv(null, &mut buf).map_err(|e| CliError::io(&path, e))?;
            std::fs::write(&path, buf).map_err(|e| CliError::io(&path, e))?;
            outputs.push(path);
        }
    }
    let report_path = dir.join("report.json");
    outputs.push(report_path.clone());
    timings.insert("total".to_string(), start.elapsed().as_secs_f64());
    let report = RunReport {
        version: env!("CARGO_PKG_VERSION"),
        config: config.clone(),
        seed: config.seed,
        dims,
        series: names,
        lambda: penalty,
        lambda1: analysis.precision.lambda1,
        lasso_support: analysis.fit.active_sets.len(),
        lasso_kkt_violation: analysis.fit.kkt_violation,
        clime_constraint_violation: analysis.precision.constraint_violation,
        true_support: truth.map(|p| p.sparsity().len()),
        outcomes,
        outputs,
        timings_secs: timings,
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    write_file(&report_path, &(json + "\n"))?;
    Ok(report)
}

/// Table-style CSV: one row per configuration, percentages per cell.
pub fn montecarlo_table(report: &McReport) -> String {
    let c = &report.config;
    let mut header = vec!["n", "t", "k", "m", "rho", "q", "n_reps", "failed"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    let mut row = vec![
        c.n.to_string(),
        c.t.to_string(),
        c.k.to_string(),
        c.m.to_string(),
        format!("{:?}", c.rho),
        format!("{:?}", c.pipeline.q),
        c.n_reps.to_string(),
        report.failures.len().to_string(),
    ];
    for s in &report.summaries {
        let tag = format!("{}_{}", s.procedure.name(), s.se_variant.name());
        for (name, v) in [
            ("dfdr", s.dfdr),
            ("dfdr_se", s.dfdr_se),
            ("pwr", s.dpower),
            ("pwr_se", s.dpower_se),
            ("dfwer", s.dfwer),
        ] {
            header.push(format!("{tag}_{name}"));
            row.push(format!("{:.2}", 100.0 * v));
        }
    }
    header.push("wall_time_secs".into());
    row.push(format!("{:.1}", report.wall_time_secs));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("write to memory");
    w.write_record(&row).expect("write to memory");
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

pub fn stability_table(report: &StabilityReport) -> String {
    let mut s = String::from("method,row,col,truth,frequency\n");
    for (method, m) in [("lasso", &report.lasso), ("multiple_test", &report.multiple_test)] {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let _ = writeln!(s, "{method},{i},{j},{:?},{:?}", report.truth.values()[(i, j)], m[(i, j)]);
            }
        }
    }
    s
}

pub fn montecarlo(config: &McConfig, output: &Path, stability: bool) -> CliResult<String> {
    config.validate().map_err(|e| CliError::config(e.to_string()))?;
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let (table, summary) = if stability {
        let r = run_stability_experiment(config)?;
        let summary = format!(
            "stability: {} replications, false-positive frequency lasso {:.4}, multiple test {:.4}\n",
            r.n_reps,
            r.false_positive_rate(&r.lasso),
            r.false_positive_rate(&r.multiple_test)
        );
        (stability_table(&r), summary)
    } else {
        let r = run_monte_carlo(config)?;
        let json_path = output.with_extension("json");
        let json = serde_json::to_string_pretty(&r).expect("report serializes");
        write_file(&json_path, &(json + "\n"))?;
        let mut summary = String::new();
        for s in &r.summaries {
            let _ = writeln!(
                summary,
                "{:<10} {:<9} dFDR {:5.2} ({:.2})  power {:6.2} ({:.2})",
                s.procedure.name(),
                s.se_variant.name(),
                100.0 * s.dfdr,
                100.0 * s.dfdr_se,
                100.0 * s.dpower,
                100.0 * s.dpower_se
            );
        }
        (montecarlo_table(&r), summary)
    };
    write_file(output, &table)?;
    Ok(summary)
}

pub fn simulate(sim: &SimulateConfig, lag_order: usize, seed: u64, output: &Path, truth: Option<&Path>) -> CliResult<()> {
    if sim.n == 0 || sim.t == 0 || lag_order == 0 {
        return Err(CliError::config("need n, t and lag order of at least 1"));
    }
    let (series, phi) = simulate_series(sim, lag_order, seed)?;
    let echo = format!(
        "{}\nseed = {seed}, lag_order = {lag_order}; the first {lag_order} rows are presample",
        config_echo(sim)
    );
    write_table(output, &series, &series_names(sim.n), Some(&echo))?;
    if let Some(path) = truth {
        let names: Vec<String> = (1..=lag_order)
            .flat_map(|k| (1..=sim.n).map(move |i| format!("y{i}_lag{k}")))
            .collect();
        write_table(path, &phi.values().transpose(), &names, None)?;
    }
    Ok(())
}
