//! Seeded batch runner for the qsep experiments.
//!
//! `qsep <command> [--config PATH] [--seed N] [--threads N] [--out DIR] [--format json|csv|both]`
//!
//! Exit codes: 0 when every verdict passes, 1 on a failed verdict or runtime
//! error, 2 on a parse or validation error, 3 when a capacity limit is hit.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};

pub mod commands;
pub mod config;
pub mod report;

pub use config::ExperimentConfig;
pub use report::{ExperimentReport, Table, Verdict};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] qsep::Error),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use qsep::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_capacity() => 3,
            CliError::Core(
                E::InvalidParameter(_)
                | E::Parse { .. }
                | E::NotDeferred(_)
                | E::UnknownKey(_)
                | E::MissingSpec(_)
                | E::OracleArity { .. },
            ) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    QefidSd,
    QefidYao,
    StatisticalLemma,
    EmulateBound,
    ProjectReflect,
    Copygen,
    GentleSearchBench,
    ShadowBench,
    OwsgAttack,
    MoneyForge,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::QefidSd => "qefid-sd",
            Command::QefidYao => "qefid-yao",
            Command::StatisticalLemma => "statistical-lemma",
            Command::EmulateBound => "emulate-bound",
            Command::ProjectReflect => "project-reflect",
            Command::Copygen => "copygen",
            Command::GentleSearchBench => "gentle-search-bench",
            Command::ShadowBench => "shadow-bench",
            Command::OwsgAttack => "owsg-attack",
            Command::MoneyForge => "money-forge",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Parser)]
#[command(name = "qsep", version, about = "Run one seeded experiment and write its report")]
pub struct Cli {
    pub command: Command,
    /// Flat key = value file; `seed` is required here or via --seed.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config file's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

/// Runs `command` on `cfg` in the current rayon pool. The wall clock covers
/// the experiment only.
pub fn run_experiment(command: Command, cfg: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    let seed = cfg.seed()?;
    let report = ExperimentReport::new(command.name(), seed, cfg.echo());
    let start = Instant::now();
    let mut report = match command {
        Command::QefidSd => commands::qefid_sd(cfg, report),
        Command::QefidYao => commands::qefid_yao(cfg, report),
        Command::StatisticalLemma => commands::statistical_lemma(cfg, report),
        Command::EmulateBound => commands::emulate_bound(cfg, report),
        Command::ProjectReflect => commands::project_reflect(cfg, report),
        Command::Copygen => commands::copygen(cfg, report),
        Command::GentleSearchBench => commands::gentle_search_bench(cfg, report),
        Command::ShadowBench => commands::shadow_bench(cfg, report),
        Command::OwsgAttack => commands::owsg_attack(cfg, report),
        Command::MoneyForge => commands::money_forge(cfg, report),
    }?;
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

fn execute(cli: &Cli) -> Result<ExperimentReport, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.set("seed", s);
    }
    cfg.seed()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    let report = pool.install(|| run_experiment(cli.command, &cfg))?;
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::Io(format!("{}: {e}", cli.out.display())))?;
    if matches!(cli.format, Format::Json | Format::Both) {
        report.write_json(&cli.out)?;
    }
    if matches!(cli.format, Format::Csv | Format::Both) {
        report.write_csv(&cli.out)?;
    }
    Ok(report)
}

/// Full command-line entry point; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(report) => {
            // a closed stdout must not turn a finished run into a panic
            let mut out = std::io::stdout().lock();
            for v in &report.verdicts {
                let _ = writeln!(out, "{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.formula);
            }
            let _ = writeln!(
                out,
                "{} {} in {:.3}s",
                report.experiment,
                if report.pass { "passed" } else { "failed" },
                report.wall_clock_seconds
            );
            if report.pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("qsep {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
