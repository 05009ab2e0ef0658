use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cocycle::diophantine::Omega;
use cocycle::experiments::{run_experiment, ExperimentConfig, ExperimentKind};
use cocycle::Error;

#[derive(Parser)]
#[command(name = "cocycle", version, about = "Finite-scale Lyapunov exponent experiments for quasiperiodic cocycles")]
struct Cli {
    /// Number of worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate L_N and its doubled-scale extrapolation at one energy.
    Estimate(CommonArgs),
    /// Scan the extrapolated exponent over an energy window.
    ScanEnergy(CommonArgs),
    /// Track L along continued-fraction approximants of the frequency.
    ScanOmega(CommonArgs),
    /// Measure the set where L_N(x) deviates from its mean, per scale.
    Deviation(CommonArgs),
    /// Fuzz the avalanche principle on random hyperbolic sequences.
    Avalanche(CommonArgs),
    /// Build the multiscale induction schedule and optionally verify steps.
    Schedule(CommonArgs),
    /// Compute the periodic-approximant spectrum of the almost Mathieu operator.
    AmoSpectrum(CommonArgs),
    /// Check the closed-form exponent at spectral probes (large coupling).
    Corollary2(CommonArgs),
    /// Check the uniform-in-x upper bound against the extrapolated exponent.
    UniformBound(CommonArgs),
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Estimate(_) => ExperimentKind::Estimate,
            Command::ScanEnergy(_) => ExperimentKind::EnergyScan,
            Command::ScanOmega(_) => ExperimentKind::OmegaContinuity,
            Command::Deviation(_) => ExperimentKind::DeviationDecay,
            Command::Avalanche(_) => ExperimentKind::AvalancheFuzz,
            Command::Schedule(_) => ExperimentKind::ScheduleTrace,
            Command::AmoSpectrum(_) => ExperimentKind::AmoSpectrum,
            Command::Corollary2(_) => ExperimentKind::Corollary2,
            Command::UniformBound(_) => ExperimentKind::UniformBound,
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Estimate(a)
            | Command::ScanEnergy(a)
            | Command::ScanOmega(a)
            | Command::Deviation(a)
            | Command::Avalanche(a)
            | Command::Schedule(a)
            | Command::AmoSpectrum(a)
            | Command::Corollary2(a)
            | Command::UniformBound(a) => a,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Frequency: `golden`, `sqrt2m1`, `p/q`, or a decimal in (0,1).
    #[arg(long)]
    omega: Option<String>,
    /// Almost Mathieu coupling (potential v(x) = lambda cos(2 pi x)).
    #[arg(long)]
    lambda: Option<f64>,
    /// Energy E.
    #[arg(long)]
    energy: Option<f64>,
    #[arg(long)]
    e_min: Option<f64>,
    #[arg(long)]
    e_max: Option<f64>,
    #[arg(long)]
    e_step: Option<f64>,
    /// Deviation threshold kappa in (0,1).
    #[arg(long)]
    kappa: Option<f64>,
    /// Base scale N.
    #[arg(long)]
    scale_n: Option<u64>,
    /// Phase-grid size M.
    #[arg(long)]
    grid_m: Option<usize>,
    /// Convergent denominator used as probe depth.
    #[arg(long)]
    q_probe: Option<u64>,
    /// Number of energy probes.
    #[arg(long)]
    n_energies: Option<usize>,
    /// Random trials per ensemble.
    #[arg(long)]
    trials: Option<usize>,
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Matrix-step budget for schedule verification.
    #[arg(long)]
    budget_n: Option<u64>,
    /// Verify the first K schedule steps numerically.
    #[arg(long)]
    verify_levels: Option<usize>,
    /// Maximum schedule depth.
    #[arg(long)]
    level_budget: Option<usize>,
    /// Stop the schedule once ln q exceeds this.
    #[arg(long)]
    q_budget_log: Option<f64>,
    /// Output directory (default: $COCYCLE_OUT_DIR or ./cocycle-out).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_omega(text: &str) -> Result<Omega, Error> {
    match text {
        "golden" | "golden-mean" => return Ok(Omega::GoldenMean),
        "sqrt2m1" | "sqrt2-1" => return Ok(Omega::Sqrt2MinusOne),
        _ => {}
    }
    if let Some((p, q)) = text.split_once('/') {
        let p: u64 = p
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad rational frequency `{text}`")))?;
        let q: u64 = q
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad rational frequency `{text}`")))?;
        return Ok(Omega::Rational { p, q });
    }
    let value: f64 = text
        .parse()
        .map_err(|_| Error::Config(format!("bad frequency `{text}`")))?;
    Ok(Omega::Decimal { value })
}

fn build_config(command: &Command) -> Result<ExperimentConfig, Error> {
    let args = command.args();
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let config = ExperimentConfig::from_json(&text)?;
            if config.kind != command.kind() {
                return Err(Error::Config(format!(
                    "config kind {:?} does not match the `{:?}` subcommand",
                    config.kind,
                    command.kind()
                )));
            }
            config
        }
        None => ExperimentConfig::new(command.kind()),
    };

    if let Some(text) = &args.omega {
        config.omega = Some(parse_omega(text)?);
    }
    macro_rules! override_field {
        ($($field:ident),*) => {
            $(if args.$field.is_some() {
                config.$field = args.$field.clone();
            })*
        };
    }
    override_field!(
        lambda, energy, e_min, e_max, e_step, kappa, scale_n, grid_m, q_probe, n_energies,
        trials, seed, budget_n, verify_levels, level_budget, q_budget_log
    );
    if args.out.is_some() {
        config.out_dir = args.out.clone();
    }
    Ok(config)
}

fn exit_code_for(err: &Error) -> ExitCode {
    match err {
        Error::Config(_) | Error::InvalidParam(_) => ExitCode::from(2),
        Error::BudgetExhausted { .. } => ExitCode::from(3),
        _ => ExitCode::from(1),
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    #[cfg(feature = "parallel")]
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = cli.threads;

    let config = build_config(&cli.command)?;
    let artifacts = run_experiment(&config)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&artifacts.summary).expect("summary serializes")
    );
    eprintln!("wrote {} files to {}", artifacts.files.len(), artifacts.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    }
}
