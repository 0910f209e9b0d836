use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use varfdr::evaluation::McConfig;
use varfdr::model::{ErrorDistribution, MixtureParams, SigmaUKind};
use varfdr::par::with_thread_budget;
use varfdr_cli::commands;
use varfdr_cli::config::{load_toml, to_toml, RunConfig, SimulateConfig};
use varfdr_cli::export::{export_dot, read_edges_csv};
use varfdr_cli::{CliError, CliResult, THREADS_ENV};

#[derive(Parser)]
#[command(name = "varfdr", version, about = "Granger-causal network discovery for sparse VAR models with directional FDR control")]
struct Cli {
    /// Worker thread budget; defaults to the VARFDR_THREADS environment variable.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the network from a CSV panel or simulated data.
    Discover {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Print the resolved configuration and exit.
        #[arg(long)]
        dry_run: bool,
    },
    /// Run a Monte Carlo experiment and write a results table.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "montecarlo.csv")]
        output: PathBuf,
        #[arg(long)]
        dry_run: bool,
        /// Selection-frequency experiment instead of the dFDR table.
        #[arg(long)]
        stability: bool,
    },
    /// Write a simulated panel as CSV (rows are time points).
    Simulate {
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        t: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 0.4)]
        rho: f64,
        #[arg(long, default_value_t = 1)]
        lag_order: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = SigmaArg::Diagonal)]
        sigma_u: SigmaArg,
        /// Standardized mixture-normal errors instead of Gaussian.
        #[arg(long)]
        mixture: bool,
        /// All coefficients zero.
        #[arg(long)]
        zero: bool,
        #[arg(long)]
        output: PathBuf,
        /// Also write the true coefficient matrix.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Convert an edge-list CSV into a DOT graph.
    Export {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Keep only edges from this procedure.
        #[arg(long)]
        procedure: Option<String>,
        /// TOML table mapping series names to group labels.
        #[arg(long)]
        groups: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SigmaArg {
    Diagonal,
    Banded,
}

fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| CliError::config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let env_threads = threads_from_env()?;
    match cli.command {
        Command::Discover {
            config,
            output_dir,
            dry_run,
        } => {
            let mut cfg: RunConfig = load_toml(&config)?;
            if let Some(dir) = output_dir {
                cfg.output_dir = dir;
            }
            cfg.validate()?;
            if dry_run {
                print!("{}", to_toml(&cfg));
                return Ok(());
            }
            let threads = cli.threads.or(cfg.threads).or(env_threads);
            let report = with_thread_budget(threads, || commands::discover(&cfg))?;
            for o in &report.outcomes {
                println!(
                    "{:<10} t0 = {:.4} ({:?}, t_bar = {:.4}), {} discoveries, {} edges",
                    o.procedure.name(),
                    o.t0,
                    o.rule,
                    o.t_bar,
                    o.n_discoveries,
                    o.n_edges
                );
            }
            println!("outputs written to {}", cfg.output_dir.display());
        }
        Command::Montecarlo {
            config,
            output,
            dry_run,
            stability,
        } => {
            let cfg: McConfig = load_toml(&config)?;
            cfg.validate().map_err(|e| CliError::config(e.to_string()))?;
            if dry_run {
                print!("{}", to_toml(&cfg));
                return Ok(());
            }
            let threads = cli.threads.or(env_threads);
            let summary = with_thread_budget(threads, || commands::montecarlo(&cfg, &output, stability))?;
            print!("{summary}");
            println!("results written to {}", output.display());
        }
        Command::Simulate {
            n,
            t,
            m,
            rho,
            lag_order,
            seed,
            sigma_u,
            mixture,
            zero,
            output,
            truth,
        } => {
            let sim = SimulateConfig {
                n,
                t,
                m,
                rho,
                sigma_u_kind: match sigma_u {
                    SigmaArg::Diagonal => SigmaUKind::Diagonal,
                    SigmaArg::Banded => SigmaUKind::Banded,
                },
                error_dist: if mixture {
                    ErrorDistribution::MixtureNormal(MixtureParams::default())
                } else {
                    ErrorDistribution::StandardNormal
                },
                zero_coefficients: zero,
                ..SimulateConfig::default()
            };
            commands::simulate(&sim, lag_order, seed, &output, truth.as_deref())?;
        }
        Command::Export {
            edges,
            output,
            procedure,
            groups,
        } => {
            let mut records = read_edges_csv(&edges)?;
            if let Some(p) = procedure {
                records.retain(|e| e.procedure.name() == p);
            }
            let groups: BTreeMap<String, String> = match groups {
                Some(path) => load_toml(&path)?,
                None => BTreeMap::new(),
            };
            let mut nodes: Vec<String> = Vec::new();
            for e in &records {
                for name in [&e.source, &e.target] {
                    if !nodes.contains(name) {
                        nodes.push(name.clone());
                    }
                }
            }
            let dot = export_dot(&nodes, &records, &groups, None);
            std::fs::write(&output, dot).map_err(|e| CliError::io(&output, e))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
