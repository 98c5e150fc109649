use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use resonator_core::Complex64;

mod cache;
mod checkpoint;
mod commands;
mod config;
mod error;
mod output;

use config::{RepSelector, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "resonator", version, about = "Resonances of Schottky surfaces and their finite covers")]
struct Cli {
    /// Run configuration (JSON, or TOML by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// JSON-lines checkpoint for resumable scans.
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    /// Directory for reports and CSV grids.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Chebyshev nodes per disk.
    #[arg(long, global = true)]
    nodes: Option<usize>,
    /// Zero location tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Representation selector: trivial, regular, all-nontrivial, irrep:K or character:T1,T2,...
    #[arg(long, global = true)]
    rep: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hausdorff dimension with the bracket trace and a pressure curve.
    Dimension,
    /// Determinant and log-derivative at one point, with a resolution table.
    ZetaEval {
        /// Point as RE,IM.
        #[arg(long, allow_hyphen_values = true)]
        s: String,
    },
    /// Zeros in the configured rectangle.
    Scan,
    /// New zeros of a cover over all nontrivial irreps, with ε and η.
    CoverScan,
    /// Expansion constant and nontrivial averaging spectrum as CSV.
    Expansion,
    /// Word-operator norms per length as CSV.
    Wordnorm {
        #[arg(long, default_value_t = 8)]
        nmax: usize,
    },
    /// Invariant suite; exits with status 2 when a check fails.
    Verify,
}

fn parse_point(text: &str) -> Result<Complex64, CliError> {
    let bad = || CliError::Usage(format!("expected RE,IM for --s, got '{text}'"));
    let (a, b) = text.split_once(',').ok_or_else(bad)?;
    let re = a.trim().parse().map_err(|_| bad())?;
    let im = b.trim().parse().map_err(|_| bad())?;
    Ok(Complex64::new(re, im))
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    if let Some(p) = &cli.checkpoint {
        cfg.checkpoint = Some(p.clone());
    }
    if let Some(p) = &cli.out {
        cfg.out = Some(p.clone());
    }
    if let Some(n) = cli.nodes {
        cfg.nodes = n;
    }
    if let Some(t) = cli.tol {
        cfg.tol = t;
    }
    if let Some(r) = &cli.rep {
        cfg.rep = r.parse::<RepSelector>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve(cli)?;
    if let Some(w) = cfg.workers {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let (outcome, ok) = match &cli.command {
        Command::Dimension => (commands::dimension(&cfg)?, true),
        Command::ZetaEval { s } => (commands::zeta_eval(&cfg, parse_point(s)?)?, true),
        Command::Scan => (commands::scan(&cfg)?, true),
        Command::CoverScan => (commands::cover_scan(&cfg)?, true),
        Command::Expansion => (commands::expansion(&cfg)?, true),
        Command::Wordnorm { nmax } => (commands::wordnorm(&cfg, *nmax)?, true),
        Command::Verify => commands::verify(&cfg)?,
    };
    outcome.persist(&cfg)?;
    std::io::stdout().lock().write_all(outcome.stdout.as_bytes())?;
    if ok {
        Ok(())
    } else {
        Err(CliError::SuiteFailed("see the report for failing checks".into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = serde_json::json!({"error": "usage", "message": e.render().to_string().trim_end()});
            eprintln!("{msg}");
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = serde_json::json!({"error": e.code(), "message": e.to_string()});
            eprintln!("{msg}");
            e.exit_code()
        }
    }
}
