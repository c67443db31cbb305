//! `semireg`: runs moduli estimates, certificates, covering checks, Newton
//! solves and suites from a JSON config, writing one JSON report per check.
//!
//! Exit status: 0 when nothing failed, 1 when a check failed, 2 on a config
//! or I/O error.

mod commands;
mod config;
mod report;
mod suite;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde_json::json;

use semireg::certify::CertifyOptions;
use semireg::moduli::LiminfSchedule;
use semireg::newton::{InexactnessModel, NewtonOptions};
use semireg::{NormKind, Settings};

use config::{Command, ConfigError, ConfigResult, ExperimentConfig, SuiteName};
use report::Writer;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum NormArg {
    Euclidean,
    Max,
}

impl From<NormArg> for NormKind {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::Euclidean => NormKind::Euclidean,
            NormArg::Max => NormKind::Max,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "semireg", version, about = "Regularity moduli, covering checks and Newton runs for set-valued maps")]
struct Cli {
    /// JSON experiment config.
    #[arg(long, conflicts_with = "suite")]
    config: Option<PathBuf>,
    /// Run a suite with default settings: acceptance, moduli, solve or corpus.
    #[arg(long)]
    suite: Option<SuiteName>,
    /// Overrides the config seed (and every seed inside it).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    norm: Option<NormArg>,
    /// Report directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Threads for suite entries.
    #[arg(long)]
    workers: Option<usize>,
    /// Print nothing but errors.
    #[arg(long)]
    quiet: bool,
    /// Add runtime_ms to reports; reports are then no longer reproducible byte for byte.
    #[arg(long)]
    timing: bool,
    /// Check the config and exit without running anything.
    #[arg(long)]
    validate: bool,
    /// Print the embedded defaults as JSON and exit.
    #[arg(long)]
    print_defaults: bool,
}

fn defaults() -> serde_json::Value {
    json!({
        "seed": semireg::rng::DEFAULT_SEED,
        "norm": NormKind::default(),
        "out": "out",
        "settings": Settings::default(),
        "moduli": { "kinds": config::default_kinds(), "schedule": LiminfSchedule::default() },
        "certify": { "oracle": "diagonal", "options": CertifyOptions::default() },
        "solve": { "model": InexactnessModel::default(), "options": NewtonOptions::default() },
        "suite": { "workers": 1, "map": "two_branch", "problem": "abs_newton" },
    })
}

fn load(cli: &Cli) -> ConfigResult<ExperimentConfig> {
    let mut cfg = match (&cli.config, cli.suite) {
        (Some(path), _) => ExperimentConfig::from_path(path)?,
        (None, Some(name)) => ExperimentConfig::for_suite(name),
        (None, None) => return Err(ConfigError::Schema("pass --config <path> or --suite <name>".into())),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(norm) = cli.norm {
        cfg.norm = Some(norm.into());
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let (Some(w), Some(s)) = (cli.workers, cfg.suite.as_mut()) {
        s.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Returns the number of failed checks.
fn execute(cfg: &ExperimentConfig, quiet: bool, timing: bool) -> ConfigResult<usize> {
    let settings = cfg.effective_settings();
    let writer = Writer::new(&cfg.out, quiet)?;
    let seed = cfg.seed;
    let section = || ConfigError::Schema("missing section".into());
    if cfg.command == Command::Suite {
        suite::run(cfg.suite.as_ref().ok_or_else(section)?, seed, &settings, &writer, timing)?;
    } else {
        let start = Instant::now();
        let outs = match cfg.command {
            Command::Moduli => commands::moduli(cfg.moduli.as_ref().ok_or_else(section)?, seed, &settings)?,
            Command::Certify => commands::certify(cfg.certify.as_ref().ok_or_else(section)?, seed, &settings)?,
            Command::Cover => commands::cover(cfg.cover.as_ref().ok_or_else(section)?, seed, &settings)?,
            Command::Solve => commands::solve(cfg.solve.as_ref().ok_or_else(section)?, seed, &settings)?,
            Command::Suite => unreachable!("handled above"),
        };
        let ms = start.elapsed().as_millis() as u64;
        for (mut r, files) in outs {
            if timing {
                r.runtime_ms = Some(ms);
            }
            writer.write(&r, &files)?;
        }
    }
    let (total, failed) = writer.finish()?;
    if !quiet {
        let _ = writeln!(std::io::stdout(), "{} of {total} checks passed or informational, {failed} failed", total - failed);
    }
    Ok(failed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_defaults {
        println!("{}", serde_json::to_string_pretty(&defaults()).expect("defaults serialize"));
        return ExitCode::SUCCESS;
    }
    let outcome = load(&cli).and_then(|cfg| if cli.validate { Ok(0) } else { execute(&cfg, cli.quiet, cli.timing) });
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("semireg: {e}");
            ExitCode::from(2)
        }
    }
}
