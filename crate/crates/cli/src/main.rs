use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use qci::{run, RunConfig, RunError};

#[derive(Parser)]
#[command(
    name = "qci",
    version,
    about = "Numerical experiments on quantum completely integrable systems"
)]
struct Cli {
    #[command(subcommand)]
    command: KindArgs,
}

/// Each subcommand runs the experiment of the same kind from `--config`.
#[derive(Subcommand)]
enum KindArgs {
    /// Joint eigenvalues in a window with residuals and global sup norms.
    Spectrum(Args),
    /// Largest sup norm per h and region, with scaling fits.
    SupnormSweep(Args),
    /// Pointwise -h log|u| against the Agmon action.
    Decay(Args),
    /// Agmon action at points, along a line, or near a caustic.
    Action(Args),
    /// Lagrangian projection class of joint energies.
    Classify(Args),
    /// Phase-space concentration of the FBI transform.
    Fbi(Args),
    /// Separated spectrum against the brute-force 2D discretization.
    OracleCompare(Args),
}

#[derive(clap::Args)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `output`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_enum, default_value_t = LogLevel::Warn)]
    log: LogLevel,
}

#[derive(Clone, Copy, ValueEnum)]
enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

impl KindArgs {
    fn split(&self) -> (&'static str, &Args) {
        match self {
            KindArgs::Spectrum(a) => ("spectrum", a),
            KindArgs::SupnormSweep(a) => ("supnorm-sweep", a),
            KindArgs::Decay(a) => ("decay", a),
            KindArgs::Action(a) => ("action", a),
            KindArgs::Classify(a) => ("classify", a),
            KindArgs::Fbi(a) => ("fbi", a),
            KindArgs::OracleCompare(a) => ("oracle-compare", a),
        }
    }
}

fn execute(kind: &str, args: &Args) -> Result<i32, RunError> {
    let cfg = RunConfig::load(&args.config)?;
    if cfg.experiment.name() != kind {
        return Err(RunError::Config {
            path: "experiment.kind".into(),
            message: format!(
                "config describes `{}` but the subcommand is `{kind}`",
                cfg.experiment.name()
            ),
        });
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("qci-out"));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.jobs {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build().map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    let report = pool.install(|| run(&cfg, &out))?;
    if report.error_rows > 0 {
        log::warn!(
            "{} item(s) failed; see {}",
            report.error_rows,
            out.join(qci::output::ERRORS).display()
        );
    }
    println!("{}", out.join(qci::output::MANIFEST).display());
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = cli.command.split();
    let level = match args.log {
        LogLevel::Error => "error",
        LogLevel::Warn => "warn",
        LogLevel::Info => "info",
        LogLevel::Debug => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(name, args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("qci: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
