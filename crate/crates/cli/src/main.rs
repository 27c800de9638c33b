//! Command-line surface: simulate datasets, certify the supported
//! dimension, and render stored reports.
//!
//! Exit codes: 0 on success with a certified dimension, 2 when no
//! dimension is supported by the data, 1 on any error (including usage
//! errors).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use rbcert::certify::{
    build_report, build_report_from_likelihoods, make_prior, CertificationReport, Prior, PriorKind,
};
use rbcert::io::{
    read_dataset, read_likelihoods, read_prior, write_dataset, write_text_atomic, DATASET_SCHEMA,
    LIKELIHOODS_SCHEMA,
};
use rbcert::mle::{sweep_dimensions, MlConfig};
use rbcert::polarimetry::{
    source_distribution, squeezing_db_to_r, PnrdModel, SourceKind, TwoModeSource,
};
use rbcert::quantum::Dataset;
use rbcert::simulate::{simulate_polarimetry, simulate_temporal, SimConfig};
use rbcert::xprec::{parse_decimal, render_decimal};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Default bias threshold for POVM fits; pass `--bias-threshold 0` to fit
/// unconstrained.
const DEFAULT_POVM_BIAS: f64 = 0.01;

/// Default mantissa digits for rendered reports.
const DEFAULT_DIGITS: usize = 64;

/// Hard cap on requested display digits.
const MAX_DIGITS: usize = 80;

#[derive(Parser)]
#[command(
    name = "rbcert",
    version,
    about = "Certify the smallest Hilbert-space dimension supported by measurement counts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset file.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Fit every candidate dimension and certify the supported one.
    Certify(CertifyArgs),
    /// Render a stored report as a table and optional CSV plot data.
    Report(ReportArgs),
}

#[derive(Subcommand)]
enum SimulateCommand {
    /// Random von-Neumann-basis tomography of a single-mode state.
    Temporal(TemporalArgs),
    /// Photon-pair counting through a pair of lossy number-resolving detectors.
    Polarimetry(PolarimetryArgs),
}

#[derive(Args)]
struct TemporalArgs {
    /// Mode index of the simulated pure state.
    #[arg(long)]
    mode_index: usize,
    /// Number of independently drawn measurement bases.
    #[arg(long)]
    bases: usize,
    /// Copies measured per basis.
    #[arg(long)]
    copies: u64,
    /// Hilbert-space dimension the simulation is embedded in.
    #[arg(long)]
    dmax: usize,
    /// Fraction of counts replaced by a uniform background.
    #[arg(long, default_value_t = 0.0)]
    dark_rate: f64,
    /// RNG seed (the dataset is a deterministic function of it).
    #[arg(long)]
    seed: u64,
    /// Output dataset path.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Bell,
    Tmsv,
}

#[derive(Args)]
struct PolarimetryArgs {
    /// Photon-pair source family.
    #[arg(long, value_enum)]
    source: SourceArg,
    /// Squeezing in dB (converted as r = dB ln(10)/20).
    #[arg(long)]
    squeezing_db: f64,
    /// Detection efficiency of each detector.
    #[arg(long)]
    eta: f64,
    /// Maximum resolved photon number per detector.
    #[arg(long)]
    n0: usize,
    /// Photon pairs sampled.
    #[arg(long)]
    copies: u64,
    /// RNG seed (the dataset is a deterministic function of it).
    #[arg(long)]
    seed: u64,
    /// Output dataset path.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct CertifyArgs {
    /// Dataset file (measurement counts) or likelihood fixture file.
    dataset: PathBuf,
    /// Prior over dimensions: "uniform", "gaussian:<center>", or "file:<path>".
    #[arg(long, default_value = "uniform")]
    prior: String,
    /// Plausible-interval widths to report.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    deltas: Vec<usize>,
    /// Bias threshold for POVM fits (diagonal-response fits ignore it).
    #[arg(long)]
    bias_threshold: Option<f64>,
    /// Mantissa digits in the rendered report.
    #[arg(long)]
    digits: Option<usize>,
    /// Seed for solver restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report output path.
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Report file written by `certify`.
    report: PathBuf,
    /// Mantissa digits in the rendered output.
    #[arg(long)]
    digits: Option<usize>,
    /// Also write per-dimension plot data to this CSV path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn main() -> ExitCode {
    // Die silently when a downstream pipe closes (e.g. `rbcert ... | head`)
    // instead of panicking on the failed write.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(error) => {
            let code = match error.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = error.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Simulate(SimulateCommand::Temporal(args)) => cmd_simulate_temporal(&args),
        Command::Simulate(SimulateCommand::Polarimetry(args)) => cmd_simulate_polarimetry(&args),
        Command::Certify(args) => cmd_certify(&args),
        Command::Report(args) => cmd_report(&args),
    }
}

fn cmd_simulate_temporal(args: &TemporalArgs) -> Result<u8> {
    let config = SimConfig {
        seed: args.seed,
        copies_per_basis: args.copies,
        num_bases: args.bases,
        dim_max: args.dmax,
        dark_rate: args.dark_rate,
    };
    let dataset = Dataset::Povm(simulate_temporal(args.mode_index, &config)?);
    let provenance = json!({
        "command": "simulate temporal",
        "mode_index": args.mode_index,
        "num_bases": args.bases,
        "copies_per_basis": args.copies,
        "dim_max": args.dmax,
        "dark_rate": args.dark_rate,
        "seed": args.seed,
    });
    write_dataset(&args.output, &dataset, Some(provenance))?;
    println!(
        "wrote {}: {} bases, {} total counts, dim_max {}",
        args.output.display(),
        args.bases,
        dataset.total_counts(),
        args.dmax
    );
    Ok(0)
}

fn cmd_simulate_polarimetry(args: &PolarimetryArgs) -> Result<u8> {
    let kind = match args.source {
        SourceArg::Bell => SourceKind::Bell,
        SourceArg::Tmsv => SourceKind::Tmsv,
    };
    let r = squeezing_db_to_r(args.squeezing_db)?;
    let source = TwoModeSource::new(kind, r)?;
    let model = PnrdModel::new(args.eta, args.n0)?;
    let mut rng = ChaCha12Rng::seed_from_u64(args.seed);
    let dataset = Dataset::Diagonal(simulate_polarimetry(&source, &model, args.copies, &mut rng)?);
    let cutoff = match &dataset {
        Dataset::Diagonal(diagonal) => diagonal.dim_max() - 1,
        Dataset::Povm(_) => unreachable!(),
    };
    let (_, tail) = source_distribution(&source, cutoff);
    let provenance = json!({
        "command": "simulate polarimetry",
        "source": kind.as_str(),
        "squeezing_db": args.squeezing_db,
        "squeezing_r": r,
        "eta": args.eta,
        "n0": args.n0,
        "copies": args.copies,
        "fock_cutoff": cutoff,
        "tail_mass": tail,
        "seed": args.seed,
    });
    write_dataset(&args.output, &dataset, Some(provenance))?;
    println!(
        "wrote {}: {} total counts, fock cutoff {}, tail mass {:.3e}",
        args.output.display(),
        dataset.total_counts(),
        cutoff,
        tail
    );
    Ok(0)
}

fn display_digits(requested: Option<usize>) -> Result<usize> {
    let digits = match requested {
        Some(digits) => digits,
        None => match std::env::var("RBCERT_PRECISION_DIGITS") {
            Ok(text) => text
                .parse::<usize>()
                .context("RBCERT_PRECISION_DIGITS must be a non-negative integer")?,
            Err(_) => DEFAULT_DIGITS,
        },
    };
    if digits == 0 || digits > MAX_DIGITS {
        bail!("display digits must lie in 1..={MAX_DIGITS}, got {digits}");
    }
    Ok(digits)
}

fn parse_prior_spec(spec: &str, d_min: usize, d_max: usize) -> Result<Prior> {
    if spec == "uniform" {
        return Ok(make_prior(PriorKind::Uniform, d_min, d_max)?);
    }
    if let Some(center) = spec.strip_prefix("gaussian:") {
        let center: i64 = center
            .parse()
            .with_context(|| format!("invalid gaussian prior center {center:?}"))?;
        return Ok(make_prior(PriorKind::Gaussian { center }, d_min, d_max)?);
    }
    if let Some(path) = spec.strip_prefix("file:") {
        return Ok(read_prior(Path::new(path))?);
    }
    bail!("prior must be \"uniform\", \"gaussian:<center>\", or \"file:<path>\", got {spec:?}")
}

fn peek_schema(path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("failed to read {}", path.display()))?;
    let value: Value =
        serde_json::from_str(&text).with_context(|| format!("{} is not JSON", path.display()))?;
    value
        .get("schema")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| anyhow!("{} has no \"schema\" field", path.display()))
}

fn cmd_certify(args: &CertifyArgs) -> Result<u8> {
    let digits = display_digits(args.digits)?;
    let schema = peek_schema(&args.dataset)?;
    let report: CertificationReport = if schema == LIKELIHOODS_SCHEMA {
        let fixture = read_likelihoods(&args.dataset)?;
        let d_max = fixture.d_min + fixture.likelihoods.len() - 1;
        let prior = parse_prior_spec(&args.prior, fixture.d_min, d_max)?;
        build_report_from_likelihoods(
            &fixture.likelihoods,
            &prior,
            &args.deltas,
            fixture.total_counts,
            fixture.kappa,
        )?
    } else if schema == DATASET_SCHEMA {
        let (dataset, _provenance) = read_dataset(&args.dataset)?;
        let d_max = dataset.dim_max();
        let prior = parse_prior_spec(&args.prior, 2, d_max)?;
        let config = match &dataset {
            Dataset::Povm(_) => {
                MlConfig::with_bias(args.bias_threshold.unwrap_or(DEFAULT_POVM_BIAS))
            }
            Dataset::Diagonal(_) => {
                if args.bias_threshold.is_some() {
                    eprintln!(
                        "note: --bias-threshold applies to POVM fits; diagonal-response fits ignore it"
                    );
                }
                MlConfig::for_diagonal()
            }
        };
        let fits = sweep_dimensions(&dataset, 2, d_max, &config, args.seed)?;
        build_report(&dataset, &fits, &prior, &args.deltas)?
    } else {
        bail!(
            "{} has unsupported schema {schema:?}",
            args.dataset.display()
        );
    };

    let rendered = serde_json::to_string_pretty(&report.to_json(digits)?)?;
    write_text_atomic(&args.out, &rendered)?;
    print!("{}", report.to_table(digits)?);
    println!("report written to {}", args.out.display());
    if let Some(warning) = &report.warning {
        eprintln!("warning: {warning}");
        return Ok(2);
    }
    Ok(0)
}

fn require_str(value: &Value, field: &str) -> Result<String> {
    value
        .get(field)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| anyhow!("report is missing string field {field:?}"))
}

fn require_u64(value: &Value, field: &str) -> Result<u64> {
    value
        .get(field)
        .and_then(Value::as_u64)
        .ok_or_else(|| anyhow!("report is missing integer field {field:?}"))
}

fn string_array(value: &Value, field: &str) -> Result<Vec<String>> {
    value
        .get(field)
        .and_then(Value::as_array)
        .map(|entries| {
            entries
                .iter()
                .map(|v| v.as_str().map(str::to_string))
                .collect::<Option<Vec<_>>>()
        })
        .and_then(|inner| inner)
        .ok_or_else(|| anyhow!("report is missing string array {field:?}"))
}

fn rerender(text: &str, digits: usize) -> Result<String> {
    let value = parse_decimal(text)?;
    Ok(render_decimal(&value, digits)?)
}

fn log_likelihood_text(value: &Value) -> String {
    match value {
        Value::Number(number) => format!("{}", number.as_f64().unwrap_or(f64::NAN)),
        Value::String(text) => text.clone(),
        other => other.to_string(),
    }
}

fn cmd_report(args: &ReportArgs) -> Result<u8> {
    let digits = display_digits(args.digits)?;
    let text = std::fs::read_to_string(&args.report)
        .with_context(|| format!("failed to read {}", args.report.display()))?;
    let value: Value = serde_json::from_str(&text)?;
    let d_min = require_u64(&value, "d_min")? as usize;
    let likelihoods = string_array(&value, "likelihoods")?;
    let posteriors = string_array(&value, "posteriors")?;
    let rb_ratios = string_array(&value, "rb_ratios")?;
    let log_likelihoods = value
        .get("log_likelihoods_nat")
        .and_then(Value::as_array)
        .ok_or_else(|| anyhow!("report is missing array \"log_likelihoods_nat\""))?;
    if likelihoods.len() != posteriors.len() || likelihoods.len() != rb_ratios.len() {
        bail!("report arrays have inconsistent lengths");
    }
    let d_rb = value.get("d_rb").and_then(Value::as_u64).map(|d| d as usize);

    let mut rows = Vec::with_capacity(likelihoods.len());
    for (offset, ((likelihood, posterior), rb)) in likelihoods
        .iter()
        .zip(&posteriors)
        .zip(&rb_ratios)
        .enumerate()
    {
        let d = d_min + offset;
        rows.push((
            d,
            rerender(likelihood, digits)?,
            rerender(posterior, digits)?,
            rerender(rb, digits)?,
        ));
    }

    let likelihood_width = rows.iter().map(|r| r.1.len()).max().unwrap_or(10).max(10);
    let posterior_width = rows.iter().map(|r| r.2.len()).max().unwrap_or(9).max(9);
    println!(
        "{:>3} {:>2} {:>likelihood_width$} {:>posterior_width$} {}",
        "", "d", "likelihood", "posterior", "rb_ratio"
    );
    for (d, likelihood, posterior, rb) in &rows {
        let marker = if Some(*d) == d_rb { "*" } else { "" };
        println!("{marker:>3} {d:>2} {likelihood:>likelihood_width$} {posterior:>posterior_width$} {rb}");
    }
    match d_rb {
        Some(d) => println!("d_rb = {d}"),
        None => println!("d_rb = none ({})", require_str(&value, "warning")?),
    }
    if let Some(intervals) = value.get("intervals").and_then(Value::as_array) {
        for interval in intervals {
            let delta = require_u64(interval, "delta")?;
            let d_upper = require_u64(interval, "d_upper")?;
            let credibility = rerender(&require_str(interval, "credibility")?, digits)?;
            println!("C(delta={delta}, up to d={d_upper}) = {credibility}");
        }
    }
    println!(
        "d_aic = {}, d_bic = {} (kappa: {})",
        require_u64(&value, "d_aic")?,
        require_u64(&value, "d_bic")?,
        require_str(&value, "kappa_kind")?
    );

    if let Some(csv_path) = &args.csv {
        let mut csv = String::from("d,log_likelihood_nat,rb_ratio,posterior\n");
        for ((d, _, posterior, rb), ll) in rows.iter().zip(log_likelihoods) {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                d,
                log_likelihood_text(ll),
                rb,
                posterior
            ));
        }
        if let Some(intervals) = value.get("intervals").and_then(Value::as_array) {
            if !intervals.is_empty() {
                csv.push_str("\ndelta,d_upper,credibility\n");
                for interval in intervals {
                    csv.push_str(&format!(
                        "{},{},{}\n",
                        require_u64(interval, "delta")?,
                        require_u64(interval, "d_upper")?,
                        rerender(&require_str(interval, "credibility")?, digits)?,
                    ));
                }
            }
        }
        write_text_atomic(csv_path, &csv)?;
        println!("plot data written to {}", csv_path.display());
    }
    Ok(0)
}
