mod input;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use ftn_soav::harness::{
    self, parse_snr_range, read_experiment_config, DetectorKind, DetectorSpec, ExperimentConfig,
    TimingConfig,
};
use ftn_soav::selfcheck::{run_selfcheck, SelfCheckConfig, Suite};
use ftn_soav::soav::xi;
use ftn_soav::{Epsilon, Error, Lipschitz, Modulation, Result};

/// Binary and QPSK detection for underdetermined linear systems.
#[derive(Debug, Parser)]
#[command(name = "ftn-soav", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detect the ±1 vector behind one observation read from a file.
    Detect(DetectArgs),
    /// Run a BER-versus-SNR Monte Carlo sweep.
    Ber(BerArgs),
    /// Time single solves of each detector.
    Timing(TimingArgs),
    /// Print the scalar SOAV proximity operator.
    ProxCheck(ProxCheckArgs),
    /// Run the built-in property checks.
    Selfcheck(SelfcheckArgs),
}

#[derive(Debug, Args)]
struct DetectArgs {
    /// Input file: `rows cols`, the matrix in row-major order, `y:`, then y.
    input: PathBuf,
    /// Detector to run: soav, linf or ml.
    #[arg(long, default_value = "soav")]
    detector: String,
    /// SOAV weight λ on the data-fit term.
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    /// SOAV Lipschitz constant, or "power" to estimate 2λσ_max(H)².
    #[arg(long, default_value = "0.1")]
    lipschitz: String,
    /// SOAV iterations.
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    /// Noise level N0 used by the ℓ∞ residual bound.
    #[arg(long, default_value_t = 0.0)]
    n0: f64,
    /// Also print the relaxed solution z* on a second line.
    #[arg(long)]
    dump_z: bool,
}

#[derive(Debug, Args)]
struct BerArgs {
    /// Experiment file; flags given explicitly override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Complex symbols per channel use (N).
    #[arg(long, required_unless_present = "config")]
    n: Option<usize>,
    /// Signal-space dimensions (M).
    #[arg(long, required_unless_present = "config")]
    m: Option<usize>,
    /// qpsk or bpsk.
    #[arg(long, default_value = "qpsk")]
    modulation: String,
    /// SNR grid in dB: start:step:stop (stop inclusive) or a comma list.
    #[arg(long, default_value = "0:2:16")]
    snr: String,
    /// Matrix realizations per SNR point.
    #[arg(long, default_value_t = 1000)]
    realizations: usize,
    /// Symbol vectors sent per realization.
    #[arg(long, default_value_t = 900, conflicts_with = "bits")]
    vectors: usize,
    /// Bits per realization; must be a multiple of the bits per vector.
    #[arg(long)]
    bits: Option<usize>,
    /// Comma-separated detectors: soav, linf, ml.
    #[arg(long, default_value = "soav,linf")]
    detectors: String,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Results CSV.
    #[arg(long, required_unless_present = "config")]
    out: Option<PathBuf>,
    /// Plot data file (one `# detector` block of snr_db,ber rows per series).
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Fill mean_detect_time_s; makes the CSV non-reproducible.
    #[arg(long)]
    record_timing: bool,
}

#[derive(Debug, Args)]
struct TimingArgs {
    #[arg(long, default_value_t = 150)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    m: usize,
    #[arg(long, default_value = "qpsk")]
    modulation: String,
    /// Timed solves per detector (at least 10).
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value = "soav,linf")]
    detectors: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// SNR of the benchmark observations in dB.
    #[arg(long, default_value_t = 10.0)]
    snr: f64,
    /// Timing CSV.
    #[arg(long, default_value = "timing.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ProxCheckArgs {
    /// Step γ.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Points β to evaluate; defaults to -3..3 in steps of 0.5.
    #[arg(allow_negative_numbers = true)]
    beta: Vec<f64>,
}

#[derive(Debug, Args)]
struct SelfcheckArgs {
    /// Base sample count per check.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Restrict to one suite (repeatable): prox, grad, stacking,
    /// calibration, l1proj, ml, fista.
    #[arg(long)]
    suite: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Outcome of a subcommand that ran to completion.
enum Finished {
    Ok,
    ChecksFailed,
}

fn main() -> ExitCode {
    let matches = Cli::command().get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let sub = matches.subcommand().map(|(_, m)| m).expect("subcommand is required");
    let res = match cli.command {
        Command::Detect(a) => cmd_detect(a),
        Command::Ber(a) => cmd_ber(a, sub),
        Command::Timing(a) => cmd_timing(a),
        Command::ProxCheck(a) => cmd_prox_check(a),
        Command::Selfcheck(a) => cmd_selfcheck(a),
    };
    match res {
        Ok(Finished::Ok) => ExitCode::SUCCESS,
        Ok(Finished::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 1 })
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

fn cmd_detect(a: DetectArgs) -> Result<Finished> {
    let mut det = DetectorSpec::from_name(&a.detector)?;
    if let DetectorKind::Soav(c) = &mut det.kind {
        c.lambda = a.lambda;
        c.max_iter = a.max_iter;
        c.lipschitz = if a.lipschitz == "power" {
            Lipschitz::PowerIteration
        } else {
            Lipschitz::Fixed(a.lipschitz.parse().map_err(|_| {
                config_err(format!("--lipschitz expects a number or 'power', got '{}'", a.lipschitz))
            })?)
        };
    }
    if let DetectorKind::Linf(c) = &mut det.kind {
        c.epsilon = Epsilon::Discrepancy;
    }
    if !(a.n0 >= 0.0 && a.n0.is_finite()) {
        return Err(config_err(format!("--n0 must be finite and >= 0, got {}", a.n0)));
    }
    let (h, y) = input::read_system(&a.input)?;
    det.validate_for(h.ncols())?;
    let out = det.detect_parts(&h, &y, a.n0)?;
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{}", out.decisions);
    if a.dump_z {
        let z: Vec<String> = out.z_star.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(stdout, "{}", z.join(" "));
    }
    Ok(Finished::Ok)
}

fn from_cli(m: &ArgMatches, id: &str) -> bool {
    m.value_source(id) == Some(ValueSource::CommandLine)
}

fn cmd_ber(a: BerArgs, m: &ArgMatches) -> Result<Finished> {
    let (mut cfg, file_given) = match &a.config {
        Some(path) => (read_experiment_config(path)?, true),
        None => (ExperimentConfig::new(a.n.unwrap_or(0), a.m.unwrap_or(0)), false),
    };
    let set = |id: &str| !file_given || from_cli(m, id);
    let file_vectors = cfg.vectors_per_realization();
    if let Some(n) = a.n {
        cfg.n_symbols = n;
    }
    if let Some(mm) = a.m {
        cfg.n_dims = mm;
    }
    if set("modulation") {
        cfg.modulation = a.modulation.parse::<Modulation>()?;
    }
    if set("snr") {
        cfg.snr_grid_db = parse_snr_range(&a.snr)?;
    }
    if set("realizations") {
        cfg.realizations = a.realizations;
    }
    if set("detectors") {
        cfg.detectors = DetectorSpec::parse_list(&a.detectors)?;
    }
    if set("seed") {
        cfg.master_seed = a.seed;
    }
    if let Some(bits) = a.bits {
        cfg.bits_per_realization = bits;
    } else if set("vectors") || a.n.is_some() || a.m.is_some() || from_cli(m, "modulation") {
        // The bit count follows K whenever the dimensions may have changed.
        let vectors = if set("vectors") { a.vectors } else { file_vectors };
        cfg = cfg.with_vectors_per_realization(vectors);
    }
    if a.out.is_some() {
        cfg.output_path = a.out.clone();
    }
    if a.plot.is_some() {
        cfg.plot_path = a.plot.clone();
    }
    if a.record_timing {
        cfg.record_timing = true;
    }
    if cfg.output_path.is_none() {
        return Err(config_err("no output file: pass --out or set output_path in the config"));
    }
    let records = harness::run_ber_experiment(&cfg)?;
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{:<8} {:>8} {:>12} {:>12} {:>12}", "detector", "snr_db", "bit_errors", "bits", "ber");
    for r in &records {
        let _ = writeln!(
            stdout,
            "{:<8} {:>8} {:>12} {:>12} {:>12.4e}",
            r.detector, r.snr_db, r.bit_errors, r.bits_total, r.ber
        );
    }
    Ok(Finished::Ok)
}

fn cmd_timing(a: TimingArgs) -> Result<Finished> {
    let cfg = TimingConfig {
        n_symbols: a.n,
        n_dims: a.m,
        modulation: a.modulation.parse()?,
        trials: a.trials,
        detectors: DetectorSpec::parse_list(&a.detectors)?,
        seed: a.seed,
        snr_db: a.snr,
    };
    let records = harness::run_timing_benchmark(&cfg)?;
    harness::write_timing(&records, &a.out)?;
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(
        stdout,
        "N={} M={} {} trials={} snr={} dB",
        cfg.n_symbols, cfg.n_dims, cfg.modulation, cfg.trials, cfg.snr_db
    );
    let _ = writeln!(stdout, "{:<8} {:>12} {:>12} {:>12}", "detector", "mean_s", "p50_s", "p95_s");
    for r in &records {
        let _ = writeln!(
            stdout,
            "{:<8} {:>12.6} {:>12.6} {:>12.6}",
            r.detector, r.mean_seconds, r.p50_seconds, r.p95_seconds
        );
    }
    if let [first, .., last] = records.as_slice() {
        let _ = writeln!(stdout, "ratio {}/{}: {:.2}", last.detector, first.detector, last.mean_seconds / first.mean_seconds);
    }
    Ok(Finished::Ok)
}

fn cmd_prox_check(a: ProxCheckArgs) -> Result<Finished> {
    if !(a.gamma > 0.0 && a.gamma.is_finite()) {
        return Err(config_err(format!("--gamma must be positive, got {}", a.gamma)));
    }
    let betas = if a.beta.is_empty() {
        (-6..=6).map(|i| 0.5 * i as f64).collect()
    } else {
        a.beta
    };
    let mut stdout = std::io::stdout().lock();
    let _ = writeln!(stdout, "{:>10} {:>10}", "beta", "prox");
    for b in betas {
        let _ = writeln!(stdout, "{:>10} {:>10}", b, xi(b, a.gamma));
    }
    Ok(Finished::Ok)
}

fn cmd_selfcheck(a: SelfcheckArgs) -> Result<Finished> {
    let suites = if a.suite.is_empty() {
        Suite::ALL.to_vec()
    } else {
        a.suite.iter().map(|s| s.parse()).collect::<Result<_>>()?
    };
    let outcomes = run_selfcheck(&SelfCheckConfig {
        samples: a.samples,
        suites,
        seed: a.seed,
    })?;
    let mut stdout = std::io::stdout().lock();
    for c in &outcomes {
        let status = if c.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(stdout, "{status}  {:<12} {:<36} {}", c.suite, c.name, c.detail);
    }
    let failed = outcomes.iter().filter(|c| !c.passed).count();
    let _ = writeln!(stdout, "{} checks, {failed} failed", outcomes.len());
    Ok(if failed == 0 { Finished::Ok } else { Finished::ChecksFailed })
}
