mod commands;
mod config;
mod render;

use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use copula_risk::copulas::CopulaSpec;
use copula_risk::error::Error;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "copula-risk", version, about = "Realized-GARCH margins, GAS copulas and portfolio tail risk")]
struct Cli {
    /// TOML configuration file; flags take precedence over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Holiday calendar, one ISO date per line.
    #[arg(long, global = true)]
    holidays: Option<PathBuf>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the daily panel from two intraday bar files.
    Ingest {
        #[arg(long)]
        asset1: Option<PathBuf>,
        #[arg(long)]
        asset2: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the summary as JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Estimate margins and copulas on the estimation sample.
    Fit {
        #[command(flatten)]
        panel: PanelArg,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated specs, e.g. `normal,normal_gas`.
        #[arg(long, value_delimiter = ',')]
        copulas: Option<Vec<String>>,
        #[arg(long)]
        ar_max: Option<usize>,
        /// Fixed AR orders `p1,p2` (skips order selection).
        #[arg(long, value_delimiter = ',')]
        ar_orders: Option<Vec<usize>>,
        /// `parametric` or `semiparametric`.
        #[arg(long)]
        margin_mode: Option<String>,
        #[arg(long)]
        margin_starts: Option<usize>,
        /// Last in-sample date.
        #[arg(long)]
        split_date: Option<NaiveDate>,
        /// Block-bootstrap replicates for standard errors (0 disables).
        #[arg(long)]
        bootstrap: Option<usize>,
    },
    /// Out-of-sample comparison and VaR backtests of fitted models.
    Evaluate {
        #[command(flatten)]
        panel: PanelArg,
        /// One or more fit files sharing the same estimation window.
        #[arg(long, required = true, num_args = 1..)]
        models: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        benchmark: Option<String>,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long)]
        dq_sims: Option<usize>,
        /// Directory for per-model risk CSVs.
        #[arg(long)]
        risk_dir: Option<PathBuf>,
    },
    /// Conditional diversification benefit path and constant-dependence band.
    Cdb {
        #[command(flatten)]
        panel: PanelArg,
        #[arg(long)]
        model: PathBuf,
        /// Model label within the fit file (defaults to the first GAS model).
        #[arg(long)]
        label: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        band: PathBuf,
        #[arg(long)]
        draws: Option<usize>,
        #[arg(long)]
        band_sims: Option<usize>,
    },
    /// Simulate a panel from the reference process.
    Simulate {
        /// Copula spec, e.g. `normal_gas` or `rotated_gumbel`.
        #[arg(long, default_value = "normal_gas")]
        copula: String,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write the true parameter path as JSON.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct PanelArg {
    /// Panel CSV written by `ingest` or `simulate`.
    #[arg(long)]
    panel: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Input(_) | Error::InsufficientData { .. } | Error::Io(_) | Error::Csv(_) => 1,
        Error::NonConvergence { .. } | Error::ReplicateFailures { .. } => 2,
        _ => 3,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let mut flags = RunConfig {
        seed: cli.seed,
        threads: cli.threads,
        holidays: cli.holidays.clone(),
        ..RunConfig::default()
    };
    match &cli.command {
        Command::Ingest { asset1, asset2, .. } => {
            flags.asset1 = asset1.clone();
            flags.asset2 = asset2.clone();
        }
        Command::Fit {
            panel,
            copulas,
            ar_max,
            ar_orders,
            margin_mode,
            margin_starts,
            split_date,
            bootstrap,
            ..
        } => {
            flags.panel = panel.panel.clone();
            flags.copulas = copulas.clone();
            flags.ar_max = *ar_max;
            flags.ar_orders = match ar_orders.as_deref() {
                None => None,
                Some(&[a, b]) => Some([a, b]),
                Some(_) => return Err(Error::Input("--ar-orders takes exactly two values".into())),
            };
            flags.margin_mode = margin_mode.clone();
            flags.margin_starts = *margin_starts;
            flags.split_date = *split_date;
            flags.bootstrap = *bootstrap;
        }
        Command::Evaluate {
            panel,
            benchmark,
            draws,
            alphas,
            dq_sims,
            ..
        } => {
            flags.panel = panel.panel.clone();
            flags.benchmark = benchmark.clone();
            flags.draws = *draws;
            flags.alphas = alphas.clone();
            flags.dq_sims = *dq_sims;
        }
        Command::Cdb {
            panel,
            draws,
            band_sims,
            ..
        } => {
            flags.panel = panel.panel.clone();
            flags.draws = *draws;
            flags.band_sims = *band_sims;
        }
        Command::Simulate { .. } => {}
    }
    let cfg = file.merge(flags);
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Domain(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Ingest { out, summary, .. } => commands::ingest(&cfg, &out, summary.as_deref()),
        Command::Fit { out, .. } => commands::fit(&cfg, &out).map(drop),
        Command::Evaluate {
            models, out, risk_dir, ..
        } => commands::evaluate(&cfg, &models, &out, risk_dir.as_deref()).map(drop),
        Command::Cdb {
            model, label, out, band, ..
        } => commands::cdb(&cfg, &model, label.as_deref(), &out, &band).map(drop),
        Command::Simulate { copula, n, out, truth } => {
            let spec: CopulaSpec = copula.parse()?;
            commands::simulate(&cfg, spec, n, &out, truth.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Input("x".into())), 1);
        assert_eq!(exit_code(&Error::InsufficientData { needed: 2, have: 1 }), 1);
        assert_eq!(exit_code(&Error::ReplicateFailures { failed: 3, total: 10 }), 2);
        assert_eq!(exit_code(&Error::Domain("x".into())), 3);
    }

    #[test]
    fn parses_subcommands() {
        let c = Cli::try_parse_from(["copula-risk", "--seed", "3", "fit", "--panel", "p.csv", "--out", "m.json", "--copulas", "normal,normal_gas"]).unwrap();
        assert_eq!(c.seed, Some(3));
        assert!(matches!(c.command, Command::Fit { .. }));
        assert!(Cli::try_parse_from(["copula-risk", "bogus"]).is_err());
    }
}
