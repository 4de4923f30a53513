use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use cheapboot::problems::ProblemKind;
use cheapboot_harness::config::{MethodSpec, PartialConfig};
use cheapboot_harness::report::{emit_report, Format};
use cheapboot_harness::selftest::run_selftest;
use cheapboot_harness::sweep::{default_eta_grid, sensitivity_sweep};
use cheapboot_harness::table::{format_table, run_table, table_grid, table_methods, EtaDefaults, TableScale};
use cheapboot_harness::{run_cell, ExperimentReport};

/// Confidence intervals for SGD: coverage experiments.
#[derive(Parser, Debug)]
#[command(name = "cheapboot", version)]
struct Cli {
    /// Worker threads for trials (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment cell.
    Run(CellArgs),
    /// Reproduce the method × covariance-family grid.
    Table(TableArgs),
    /// Step-size sensitivity of one or more methods.
    Sweep(SweepArgs),
    /// Fast invariant checks.
    Selftest,
}

#[derive(Args, Debug, Clone)]
struct CellArgs {
    /// TOML file with cell settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// linear or logistic.
    #[arg(long)]
    problem: Option<String>,
    /// cofb-asgd, cofb-sgd, conb, delta, bm, ob, higrad.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// identity, toeplitz or equicorr.
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Initial step size.
    #[arg(long)]
    eta: Option<f64>,
    /// Step decay exponent (default 0.501; last-iterate COfB always uses 1).
    #[arg(long)]
    alpha: Option<f64>,
    /// Replicate count (batch count for bm).
    #[arg(long = "B")]
    replicates: Option<usize>,
    /// Nominal coverage (default 0.95).
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

impl CellArgs {
    fn partial(&self) -> Result<PartialConfig> {
        let flags = PartialConfig {
            problem: self.problem.clone(),
            method: self.method.clone(),
            replicates: self.replicates,
            d: self.d,
            n: self.n,
            sigma: self.sigma.clone(),
            noise_sd: self.noise_sd,
            eta: self.eta,
            alpha: self.alpha,
            level: self.level,
            trials: self.trials,
            seed: self.seed,
        };
        Ok(match &self.config {
            Some(path) => flags.over(PartialConfig::from_toml_file(path)?),
            None => flags,
        })
    }
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    /// Write records to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: Format,
}

#[derive(Args, Debug)]
struct TableArgs {
    #[arg(long, default_value = "linear")]
    problem: ProblemKind,
    /// n = 1e5, 500 trials, d in {5, 20, 200} instead of the desk scale.
    #[arg(long)]
    full: bool,
    /// Comma-separated subset of methods (all B values of each are kept).
    #[arg(long, value_delimiter = ',')]
    method: Vec<String>,
    /// Override the scale's dimensions.
    #[arg(long, value_delimiter = ',')]
    d: Vec<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Step-size file in the shape of the bundled defaults.toml.
    #[arg(long)]
    defaults: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    cell: CellArgs,
    /// Comma-separated step sizes (default 0.2,0.3,...,0.7).
    #[arg(long, value_delimiter = ',')]
    eta_grid: Vec<f64>,
    /// Additional comma-separated methods swept alongside --method.
    #[arg(long, value_delimiter = ',')]
    also: Vec<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Run(args) => {
            let cfg = args.partial()?.resolve()?;
            let report = run_cell(&cfg)?;
            print_summary(std::slice::from_ref(&report));
            write_out(&args.output, &[report])?;
        }
        Command::Table(args) => {
            let mut scale = if args.full { TableScale::full() } else { TableScale::desk() };
            if !args.d.is_empty() {
                scale.dims = args.d.clone();
            }
            scale.n = args.n.unwrap_or(scale.n);
            scale.trials = args.trials.unwrap_or(scale.trials);
            let defaults = match &args.defaults {
                Some(p) => EtaDefaults::parse(
                    &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
                )?,
                None => EtaDefaults::bundled(),
            };
            let mut methods = table_methods();
            if !args.method.is_empty() {
                let wanted: Vec<&str> = args
                    .method
                    .iter()
                    .map(|m| MethodSpec::parse(m, None).map(|s| s.name()))
                    .collect::<Result<_>>()?;
                methods.retain(|m| wanted.contains(&m.name()));
            }
            let grid = table_grid(args.problem, &scale, &methods, &defaults, args.seed, args.level)?;
            info!("running {} cells", grid.len());
            let reports = run_table(&grid)?;
            print!("{}", format_table(&reports));
            write_out(&args.output, &reports)?;
        }
        Command::Sweep(args) => {
            let base = args.cell.partial()?;
            let grid = if args.eta_grid.is_empty() { default_eta_grid() } else { args.eta_grid.clone() };
            let mut names = vec![base.method.clone().unwrap_or_else(|| "cofb-asgd".into())];
            names.extend(args.also.iter().cloned());
            let mut reports = Vec::new();
            for name in names {
                let cfg = PartialConfig {
                    method: Some(name),
                    ..base.clone()
                }
                .resolve()?;
                reports.extend(sensitivity_sweep(&cfg, &grid)?);
            }
            println!("{:<16} {:>6} {:>10} {:>12}", "method", "eta", "coverage", "length");
            for r in &reports {
                println!(
                    "{:<16} {:>6.3} {:>10.4} {:>12.4e}",
                    r.config.method.label(),
                    r.config.eta,
                    r.coverage_mean,
                    r.mean_length
                );
            }
            write_out(&args.cell.output, &reports)?;
        }
        Command::Selftest => {
            let checks = run_selftest()?;
            let mut ok = true;
            for c in &checks {
                println!("{} {}{}", if c.passed { "PASS" } else { "FAIL" }, c.name, if c.detail.is_empty() { String::new() } else { format!(" ({})", c.detail) });
                ok &= c.passed;
            }
            return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn print_summary(reports: &[ExperimentReport]) {
    for r in reports {
        let c = &r.config;
        println!(
            "{} {} d={} n={} sigma={} eta={} alpha={}: coverage {:.4} (se {:.4}), mean length {:.4e} (se {:.2e}), {:.2}s",
            c.problem,
            c.method.label(),
            c.d,
            c.n,
            c.sigma,
            c.eta,
            c.effective_alpha(),
            r.coverage_mean,
            r.coverage_se,
            r.mean_length,
            r.length_se,
            r.wall_time_s
        );
        let per: Vec<String> = r.per_coordinate_coverage.iter().map(|p| format!("{p:.3}")).collect();
        println!("  per-coordinate coverage: [{}]", per.join(", "));
    }
}

fn write_out(output: &OutputArgs, reports: &[ExperimentReport]) -> Result<()> {
    if let Some(path) = &output.out {
        emit_report(reports, output.format, path)?;
        info!("wrote {} records to {}", reports.len(), path.display());
    }
    Ok(())
}
