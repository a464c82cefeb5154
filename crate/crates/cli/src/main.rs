//! `sparc` command-line tool.
//!
//! Exit status: 0 success, 1 usage or parameter error, 2 bad input data,
//! 3 internal failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use sparc::bench::{
    auto_sections, emit, oracle_compare, run_sweep, ExperimentConfig, Format, SweepPoint, DEFAULT_TRIALS,
};
use sparc::sources::{moments, parse_csv, parse_raw_f64, power, to_raw_f64, SourceKind, DEFAULT_RHO};
use sparc::stream::{decode_stream, encode_stream};
use sparc::theory::{d_star, ecsq_highrate, excess_bounds, BoundInputs};
use sparc::{coefficient_ladder, derive_params, SelectionRule, SparcParams};

#[derive(Parser)]
#[command(name = "sparc", version, about = "Sparse regression codes for lossy compression")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Derive and print code parameters.
    Params(CodeArgs),
    /// Compress a sample file into a SPARC container.
    Encode(EncodeArgs),
    /// Reconstruct samples from a SPARC container.
    Decode(DecodeArgs),
    /// Monte-Carlo distortion-rate sweep.
    Sweep(SweepArgs),
    /// Excess-distortion bound calculator.
    Bounds(BoundsArgs),
    /// Greedy versus exhaustive search on tiny random codes.
    OracleCompare(OracleArgs),
}

#[derive(Args, Clone)]
struct CodeArgs {
    /// Rate in bits per sample.
    #[arg(long, conflicts_with = "rate_nats", required_unless_present = "rate_nats")]
    rate_bits: Option<f64>,
    /// Rate in nats per sample.
    #[arg(long)]
    rate_nats: Option<f64>,
    /// Section size exponent, M = round(L^b).
    #[arg(long, default_value_t = 3.0)]
    b: f64,
    /// Number of sections; picked from the rate when omitted.
    #[arg(long = "L")]
    sections: Option<usize>,
    /// Explicit section size, overriding --b.
    #[arg(long = "M")]
    section_size: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Dictionary seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OutFormat::Json)]
    format: OutFormat,
}

impl CodeArgs {
    fn rate_nats(&self) -> f64 {
        match (self.rate_bits, self.rate_nats) {
            (Some(b), _) => b * std::f64::consts::LN_2,
            (None, Some(n)) => n,
            (None, None) => unreachable!("clap requires one rate flag"),
        }
    }

    fn params(&self, sigma2: f64) -> Result<SparcParams, Failure> {
        let rate = self.rate_nats();
        let l = self
            .sections
            .unwrap_or_else(|| auto_sections(rate / std::f64::consts::LN_2));
        let p = match self.section_size {
            Some(m) => SparcParams::with_section_size(rate, l, m, sigma2, self.seed),
            None => derive_params(rate, l, self.b, sigma2, self.seed),
        };
        p.map_err(Failure::usage)
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SampleFormat {
    Raw,
    Csv,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum RuleArg {
    #[value(name = "min-resid")]
    MinResid,
    #[value(name = "max-corr")]
    MaxCorr,
}

impl From<RuleArg> for SelectionRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::MinResid => SelectionRule::MinResidual,
            RuleArg::MaxCorr => SelectionRule::MaxCorrelation,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SourceArg {
    Gaussian,
    Laplacian,
    GaussMarkov,
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[arg(long, value_enum, default_value_t = RuleArg::MinResid)]
    rule: RuleArg,
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Sample file format; `.csv` files default to csv, everything else to raw f64.
    #[arg(long, value_enum)]
    input_format: Option<SampleFormat>,
    /// Use the sample second moment of the input instead of --sigma2 for the coefficients.
    #[arg(long)]
    estimate_variance: bool,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum)]
    output_format: Option<SampleFormat>,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON experiment config; point flags are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated rates in bits per sample.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.793, 1.803, 2.957])]
    rate_bits: Vec<f64>,
    #[arg(long, default_value_t = 3.0)]
    b: f64,
    #[arg(long = "L")]
    sections: Option<usize>,
    #[arg(long, value_enum, default_value_t = RuleArg::MinResid)]
    rule: RuleArg,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SourceArg::Gaussian)]
    source: SourceArg,
    #[arg(long, default_value_t = DEFAULT_RHO)]
    rho: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    #[arg(long)]
    jobs: Option<usize>,
    /// Give every trial its own dictionary.
    #[arg(long)]
    fresh_dictionary: bool,
    /// Include the wall-time column (breaks byte-for-byte reproducibility).
    #[arg(long)]
    timing: bool,
    /// Write here instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    code: CodeArgs,
    /// Block length override; the rate is recomputed from n, L and M.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    delta0: f64,
    #[arg(long)]
    delta1: f64,
    #[arg(long)]
    delta2: f64,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 16)]
    max_n: usize,
    #[arg(long, default_value_t = 4096)]
    max_codewords: u128,
}

/// An error with the exit status it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl Failure {
    fn usage(e: impl Into<anyhow::Error>) -> Self {
        Failure { code: 1, err: e.into() }
    }

    fn internal(e: impl Into<anyhow::Error>) -> Self {
        Failure { code: 3, err: e.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        let code = match err.downcast_ref::<sparc::Error>() {
            Some(sparc::Error::InvalidParams(_) | sparc::Error::SearchSpaceTooLarge { .. }) => 1,
            _ => 2,
        };
        Failure { code, err }
    }
}

impl From<sparc::Error> for Failure {
    fn from(e: sparc::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(3),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Params(a) => cmd_params(&a),
        Cmd::Encode(a) => cmd_encode(&a),
        Cmd::Decode(a) => cmd_decode(&a),
        Cmd::Sweep(a) => cmd_sweep(&a),
        Cmd::Bounds(a) => cmd_bounds(&a),
        Cmd::OracleCompare(a) => cmd_oracle(&a),
    }
}

fn params_json(p: &SparcParams) -> serde_json::Value {
    json!({
        "n": p.n(),
        "L": p.sections(),
        "M": p.section_size(),
        "b": p.exponent(),
        "rate_nats": p.rate(),
        "rate_bits": p.rate_bits(),
        "rate_bits_ceil": p.sections() as f64 * p.index_bits() as f64 / p.n() as f64,
        "index_bits": p.index_bits(),
        "sigma2": p.sigma2(),
        "seed": p.seed(),
        "d_star": d_star(p.rate(), p.sigma2()),
        "ecsq": p.sigma2() * ecsq_highrate(p.rate()),
    })
}

fn cmd_params(a: &CodeArgs) -> Result<(), Failure> {
    let p = a.params(a.sigma2)?;
    let ladder = coefficient_ladder(&p)?;
    let mut out = String::new();
    match a.format {
        OutFormat::Json => {
            let mut v = params_json(&p);
            v["coefficients"] = json!(ladder.values());
            out = serde_json::to_string_pretty(&v).map_err(Failure::internal)? + "\n";
        }
        OutFormat::Csv => {
            out.push_str("n,L,M,b,rate_nats,rate_bits,index_bits,sigma2,seed\n");
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                p.n(),
                p.sections(),
                p.section_size(),
                p.exponent().map(|b| b.to_string()).unwrap_or_default(),
                p.rate(),
                p.rate_bits(),
                p.index_bits(),
                p.sigma2(),
                p.seed()
            ));
        }
    }
    print!("{out}");
    Ok(())
}

fn sample_format(path: &Path, given: Option<SampleFormat>) -> SampleFormat {
    given.unwrap_or(match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => SampleFormat::Csv,
        _ => SampleFormat::Raw,
    })
}

fn cmd_encode(a: &EncodeArgs) -> Result<(), Failure> {
    let bytes = fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let samples = match sample_format(&a.input, a.input_format) {
        SampleFormat::Raw => parse_raw_f64(&bytes)?,
        SampleFormat::Csv => parse_csv(&bytes)?,
    };
    if samples.is_empty() {
        return Err(anyhow!("input holds no samples").into());
    }
    let (mean, var) = moments(&samples);
    let second_moment = power(&samples);
    let sigma2 = if a.estimate_variance { second_moment } else { a.code.sigma2 };
    let p = a.code.params(sigma2)?;
    let (container, report) = encode_stream(&p, &samples, a.rule.into())?;
    fs::write(&a.output, &container).with_context(|| format!("writing {}", a.output.display()))?;
    let v = json!({
        "params": params_json(&p),
        "rule": SelectionRule::from(a.rule).as_str(),
        "samples": report.samples,
        "blocks": report.blocks.len(),
        "padding": report.padding,
        "distortion": report.distortion,
        "rate_bits": report.rate_bits,
        "rate_bits_with_overhead": report.rate_bits_with_overhead,
        "input_mean": mean,
        "input_variance": var,
        "input_second_moment": second_moment,
        "sigma2_used": sigma2,
        "bytes": container.len(),
    });
    println!("{}", serde_json::to_string_pretty(&v).map_err(Failure::internal)?);
    Ok(())
}

fn cmd_decode(a: &DecodeArgs) -> Result<(), Failure> {
    let bytes = fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let samples = decode_stream(&bytes)?;
    let out = match sample_format(&a.output, a.output_format) {
        SampleFormat::Raw => to_raw_f64(&samples),
        SampleFormat::Csv => {
            let mut s = String::with_capacity(samples.len() * 20);
            for v in &samples {
                s.push_str(&format!("{v:?}\n"));
            }
            s.into_bytes()
        }
    };
    fs::write(&a.output, out).with_context(|| format!("writing {}", a.output.display()))?;
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), Failure> {
    let cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ExperimentConfig::from_json(&text).map_err(Failure::usage)?
        }
        None => {
            let source = match a.source {
                SourceArg::Gaussian => SourceKind::GaussianIid,
                SourceArg::Laplacian => SourceKind::LaplacianIid,
                SourceArg::GaussMarkov => SourceKind::GaussMarkov { rho: a.rho },
            };
            let points = a
                .rate_bits
                .iter()
                .map(|&r| {
                    let mut p = SweepPoint::new(r, a.b, source, a.rule.into(), a.trials, a.seed);
                    p.sections = a.sections;
                    p.sigma2 = a.sigma2;
                    p
                })
                .collect();
            ExperimentConfig {
                points,
                jobs: a.jobs,
                fresh_dictionary_per_trial: a.fresh_dictionary,
                ..Default::default()
            }
        }
    };
    if cfg.jobs == Some(0) || a.trials == 0 {
        return Err(Failure::usage(anyhow!("--jobs and --trials must be at least 1")));
    }
    let mut cfg = cfg;
    if a.jobs.is_some() {
        cfg.jobs = a.jobs;
    }
    let result = run_sweep(&cfg);
    let format = match a.format {
        OutFormat::Csv => Format::Csv,
        OutFormat::Json => Format::Json,
    };
    let text = emit(&result, format, a.timing)?;
    let mut targets: Vec<(PathBuf, Format)> = Vec::new();
    if let Some(o) = &a.output {
        targets.push((o.clone(), format));
    }
    if a.config.is_some() {
        if let Some(p) = &cfg.output.csv {
            targets.push((p.into(), Format::Csv));
        }
        if let Some(p) = &cfg.output.json {
            targets.push((p.into(), Format::Json));
        }
    }
    if targets.is_empty() {
        std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(Failure::internal)?;
    }
    for (path, f) in targets {
        let t = emit(&result, f, a.timing)?;
        fs::write(&path, t).with_context(|| format!("writing {}", path.display()))?;
    }
    let failed: Vec<_> = result.points.iter().filter(|p| !p.ok()).collect();
    for p in &failed {
        eprintln!(
            "point at {} bits failed: {}",
            p.point.rate_bits,
            p.error.as_deref().unwrap_or("")
        );
    }
    if !failed.is_empty() && failed.len() == result.points.len() {
        return Err(Failure::usage(anyhow!("every sweep point failed")));
    }
    Ok(())
}

fn cmd_bounds(a: &BoundsArgs) -> Result<(), Failure> {
    let p = a.code.params(a.code.sigma2)?;
    let p = match a.n {
        Some(n) => SparcParams::from_dims(n, p.sections(), p.section_size(), p.sigma2(), p.seed())
            .map_err(Failure::usage)?,
        None => p,
    };
    let b = excess_bounds(
        &p,
        &BoundInputs {
            delta0: a.delta0,
            delta1: a.delta1,
            delta2: a.delta2,
        },
    )
    .map_err(Failure::usage)?;
    let mut v = params_json(&p);
    v["bounds"] = serde_json::to_value(b).map_err(Failure::internal)?;
    v["bounds"]["total_gaussian"] = json!(b.total_gaussian());
    match a.code.format {
        OutFormat::Json => println!("{}", serde_json::to_string_pretty(&v).map_err(Failure::internal)?),
        OutFormat::Csv => {
            println!("n,L,M,rate_nats,big_delta,applicable,guaranteed_distortion,p0_gaussian,p1,p2,delta2_floor");
            println!(
                "{},{},{},{},{},{},{},{},{},{},{}",
                p.n(),
                p.sections(),
                p.section_size(),
                p.rate(),
                b.big_delta,
                b.applicable,
                b.guaranteed_distortion,
                b.p0_gaussian,
                b.p1,
                b.p2,
                b.delta2_floor
            );
        }
    }
    Ok(())
}

fn cmd_oracle(a: &OracleArgs) -> Result<(), Failure> {
    let r = oracle_compare(a.instances, a.seed, a.max_n, a.max_codewords).map_err(Failure::usage)?;
    let equal = r.cases.iter().filter(|c| c.same_indices).count();
    let v = json!({
        "instances": r.cases.len(),
        "greedy_optimal": equal,
        "dominance_violations": r.dominance_violations,
        "single_section_mismatches": r.single_section_mismatches,
        "mean_greedy": r.cases.iter().map(|c| c.greedy).sum::<f64>() / r.cases.len().max(1) as f64,
        "mean_exhaustive": r.cases.iter().map(|c| c.exhaustive).sum::<f64>() / r.cases.len().max(1) as f64,
    });
    println!("{}", serde_json::to_string_pretty(&v).map_err(Failure::internal)?);
    if r.dominance_violations > 0 || r.single_section_mismatches > 0 {
        return Err(Failure::internal(anyhow!("greedy/exhaustive invariants violated")));
    }
    Ok(())
}
