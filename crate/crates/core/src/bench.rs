//! Monte-Carlo distortion-rate sweeps and their plot-ready output.
//!
//! Every trial draws its source from a seed derived from the point's master
//! seed and the trial number, so a single trial can be re-run alone with
//! [`run_trial`]. By default all trials of a point share one dictionary
//! (also derived from the master seed); trials that share a code are encoded
//! together in one pass over the dictionary.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bitstream::pack;
use crate::codec::{encode, encode_batch, EncodeJob, SelectionRule};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::params::{derive_params, SparcParams};
use crate::rng::derive_seed;
use crate::sources::{SourceKind, SourceSpec};
use crate::theory::{d_star, ecsq_highrate};

/// `(rate in bits, L)` anchors of the complexity-balancing rule for choosing L.
pub const AUTO_L_ANCHORS: [(f64, f64); 4] = [(1.082, 46.0), (2.092, 66.0), (3.102, 81.0), (4.112, 97.0)];
pub const AUTO_L_RANGE: (usize, usize) = (40, 100);
pub const DEFAULT_TRIALS: usize = 70;

const DICTIONARY_LABEL: u64 = u64::MAX;

/// Number of sections for a rate: piecewise-linear in the rate through
/// [`AUTO_L_ANCHORS`] (extended linearly past the ends), rounded and
/// clamped to [`AUTO_L_RANGE`]. Keeps `n L^{b+1}` roughly level across rates.
pub fn auto_sections(rate_bits: f64) -> usize {
    let a = &AUTO_L_ANCHORS;
    let seg = if rate_bits <= a[1].0 {
        0
    } else if rate_bits >= a[a.len() - 2].0 {
        a.len() - 2
    } else {
        (0..a.len() - 1)
            .find(|&i| rate_bits <= a[i + 1].0)
            .unwrap_or(a.len() - 2)
    };
    let (r0, l0) = a[seg];
    let (r1, l1) = a[seg + 1];
    let l = l0 + (rate_bits - r0) * (l1 - l0) / (r1 - r0);
    (l.round().max(1.0) as usize).clamp(AUTO_L_RANGE.0, AUTO_L_RANGE.1)
}

fn one() -> f64 {
    1.0
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

/// One point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub rate_bits: f64,
    pub b: f64,
    /// Number of sections; chosen by [`auto_sections`] when absent.
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub sections: Option<usize>,
    /// Explicit section size, overriding `round(L^b)`.
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub section_size: Option<usize>,
    #[serde(default)]
    pub rule: SelectionRule,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub source: SourceKind,
    #[serde(default = "one")]
    pub sigma2: f64,
    pub master_seed: u64,
}

impl SweepPoint {
    pub fn new(rate_bits: f64, b: f64, source: SourceKind, rule: SelectionRule, trials: usize, master_seed: u64) -> Self {
        SweepPoint {
            rate_bits,
            b,
            sections: None,
            section_size: None,
            rule,
            trials,
            source,
            sigma2: 1.0,
            master_seed,
        }
    }

    /// Code parameters for this point, keyed by the shared dictionary seed.
    pub fn params(&self) -> Result<SparcParams> {
        if self.trials == 0 {
            return Err(Error::InvalidParams("trials must be at least 1".into()));
        }
        if !(self.rate_bits.is_finite() && self.rate_bits > 0.0) {
            return Err(Error::InvalidParams(format!("rate must be positive, got {}", self.rate_bits)));
        }
        let rate = self.rate_bits * std::f64::consts::LN_2;
        let l = self.sections.unwrap_or_else(|| auto_sections(self.rate_bits));
        let seed = derive_seed(self.master_seed, DICTIONARY_LABEL);
        match self.section_size {
            Some(m) => SparcParams::with_section_size(rate, l, m, self.sigma2, seed),
            None => derive_params(rate, l, self.b, self.sigma2, seed),
        }
    }

    pub fn source_spec(&self, trial: usize) -> SourceSpec {
        SourceSpec::new(self.source, self.sigma2, trial_seeds(self.master_seed, trial, false).source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub dictionary: u64,
    pub source: u64,
}

/// Seeds of trial `trial` under `master`. With `fresh_dictionary` each trial
/// also gets its own dictionary.
pub fn trial_seeds(master: u64, trial: usize, fresh_dictionary: bool) -> TrialSeeds {
    let shared = derive_seed(master, DICTIONARY_LABEL);
    TrialSeeds {
        dictionary: if fresh_dictionary {
            derive_seed(shared, trial as u64)
        } else {
            shared
        },
        source: derive_seed(master, trial as u64),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub points: Vec<SweepPoint>,
    #[serde(default)]
    pub output: OutputPaths,
    /// Worker threads; all available cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub fresh_dictionary_per_trial: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        for (i, p) in cfg.points.iter().enumerate() {
            if p.trials == 0 {
                return Err(Error::InvalidParams(format!("point {i}: trials must be at least 1")));
            }
        }
        if cfg.jobs == Some(0) {
            return Err(Error::InvalidParams("jobs must be at least 1".into()));
        }
        Ok(cfg)
    }
}

/// Outcome of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub point: SweepPoint,
    /// `None` when the point could not be run.
    pub params: Option<SparcParams>,
    /// Effective rate `L ln M / n` in bits per sample.
    pub rate_bits: Option<f64>,
    /// Stored index rate `L ceil(log2 M) / n`.
    pub rate_bits_ceil: Option<f64>,
    pub distortions: Vec<f64>,
    pub mean_distortion: Option<f64>,
    pub stderr: Option<f64>,
    pub d_star: Option<f64>,
    pub ecsq: Option<f64>,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

impl PointResult {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    fn failed(point: &SweepPoint, err: &Error) -> Self {
        PointResult {
            point: point.clone(),
            params: None,
            rate_bits: None,
            rate_bits_ceil: None,
            distortions: Vec::new(),
            mean_distortion: None,
            stderr: None,
            d_star: None,
            ecsq: None,
            wall_time_s: 0.0,
            error: Some(err.to_string()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<PointResult>,
}

/// Sample mean and standard error of the mean.
pub fn mean_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct Work {
    point: usize,
    trial: usize,
    params: SparcParams,
}

/// n, L, M, rate bits, sigma^2 bits, dictionary seed.
type CodeKey = (usize, usize, usize, u64, u64, u64);

/// (point, trial, distortion)
type TrialOutcome = (usize, usize, Result<f64>);

/// Runs every point of `cfg`. Points that fail are reported, not fatal.
pub fn run_sweep(cfg: &ExperimentConfig) -> SweepResult {
    let run = || run_sweep_inner(cfg);
    match cfg.jobs {
        Some(j) => match rayon::ThreadPoolBuilder::new().num_threads(j).build() {
            Ok(pool) => pool.install(run),
            Err(_) => run(),
        },
        None => run(),
    }
}

fn run_sweep_inner(cfg: &ExperimentConfig) -> SweepResult {
    let mut results: Vec<Option<PointResult>> = vec![None; cfg.points.len()];
    let mut work = Vec::new();
    let mut resolved = Vec::with_capacity(cfg.points.len());
    for (i, point) in cfg.points.iter().enumerate() {
        match point.params() {
            Ok(p) => {
                for trial in 0..point.trials {
                    let seeds = trial_seeds(point.master_seed, trial, cfg.fresh_dictionary_per_trial);
                    work.push(Work {
                        point: i,
                        trial,
                        params: p.with_seed(seeds.dictionary),
                    });
                }
                resolved.push(Some(p));
            }
            Err(e) => {
                results[i] = Some(PointResult::failed(point, &e));
                resolved.push(None);
            }
        }
    }

    // trials sharing an identical code are encoded in one batch
    let mut groups: BTreeMap<CodeKey, Vec<&Work>> = BTreeMap::new();
    for w in &work {
        let p = &w.params;
        let key = (p.n(), p.sections(), p.section_size(), p.rate().to_bits(), p.sigma2().to_bits(), p.seed());
        groups.entry(key).or_default().push(w);
    }
    let groups: Vec<Vec<&Work>> = groups.into_values().collect();

    let outcomes: Vec<(Vec<TrialOutcome>, f64)> = groups
        .par_iter()
        .map(|g| {
            let start = Instant::now();
            let out = run_group(cfg, g);
            (out, start.elapsed().as_secs_f64())
        })
        .collect();

    let mut per_point: Vec<Vec<Option<f64>>> = cfg.points.iter().map(|p| vec![None; p.trials]).collect();
    let mut errors: Vec<Option<String>> = vec![None; cfg.points.len()];
    let mut time: Vec<f64> = vec![0.0; cfg.points.len()];
    for (out, secs) in outcomes {
        let share = secs / out.len().max(1) as f64;
        for (point, trial, r) in out {
            time[point] += share;
            match r {
                Ok(d) => per_point[point][trial] = Some(d),
                Err(e) => errors[point] = Some(e.to_string()),
            }
        }
    }

    for (i, point) in cfg.points.iter().enumerate() {
        if results[i].is_some() {
            continue;
        }
        let p = resolved[i].expect("resolved params for runnable point");
        if let Some(e) = &errors[i] {
            let mut r = PointResult::failed(point, &Error::InvalidParams(e.clone()));
            r.params = Some(p);
            results[i] = Some(r);
            continue;
        }
        let distortions: Vec<f64> = per_point[i].iter().map(|d| d.expect("every trial ran")).collect();
        let (mean, se) = mean_stderr(&distortions);
        results[i] = Some(PointResult {
            point: point.clone(),
            params: Some(p),
            rate_bits: Some(p.rate_bits()),
            rate_bits_ceil: Some(p.sections() as f64 * p.index_bits() as f64 / p.n() as f64),
            distortions,
            mean_distortion: Some(mean),
            stderr: Some(se),
            d_star: Some(d_star(p.rate(), p.sigma2())),
            ecsq: Some(p.sigma2() * ecsq_highrate(p.rate())),
            wall_time_s: time[i],
            error: None,
        });
    }
    SweepResult {
        points: results.into_iter().map(|r| r.expect("every point resolved")).collect(),
    }
}

fn run_group(cfg: &ExperimentConfig, group: &[&Work]) -> Vec<TrialOutcome> {
    let params = group[0].params;
    let dict = Dictionary::new(&params);
    let sources: Vec<Result<Vec<f64>>> = group
        .iter()
        .map(|w| cfg.points[w.point].source_spec(w.trial).generate(params.n()))
        .collect();
    let mut out: Vec<TrialOutcome> = Vec::with_capacity(group.len());
    let mut jobs = Vec::new();
    let mut slots = Vec::new();
    for (w, s) in group.iter().zip(&sources) {
        match s {
            Ok(s) => {
                jobs.push(EncodeJob {
                    source: s,
                    rule: cfg.points[w.point].rule,
                });
                slots.push((w.point, w.trial));
            }
            Err(e) => out.push((w.point, w.trial, Err(e.clone()))),
        }
    }
    match encode_batch(&params, &dict, &jobs) {
        Ok(enc) => {
            for ((point, trial), (_, trace)) in slots.into_iter().zip(enc) {
                out.push((point, trial, Ok(trace.final_distortion())));
            }
        }
        Err(e) => {
            for (point, trial) in slots {
                out.push((point, trial, Err(e.clone())));
            }
        }
    }
    out
}

/// Re-runs a single trial of a point on its own and returns its distortion.
pub fn run_trial(point: &SweepPoint, trial: usize, fresh_dictionary: bool) -> Result<f64> {
    let seeds = trial_seeds(point.master_seed, trial, fresh_dictionary);
    let p = point.params()?.with_seed(seeds.dictionary);
    let dict = Dictionary::new(&p);
    let s = point.source_spec(trial).generate(p.n())?;
    let (idx, trace) = encode(&p, &dict, &s, point.rule)?;
    // the index set must also be representable on the wire
    pack(&p, &idx)?;
    Ok(trace.final_distortion())
}

/// Flat, plot-ready row. The first eleven columns are the stable schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rate_bits: Option<f64>,
    pub mean_distortion: Option<f64>,
    pub stderr: Option<f64>,
    pub d_star: Option<f64>,
    pub ecsq: Option<f64>,
    pub b: Option<f64>,
    #[serde(rename = "L")]
    pub sections: Option<usize>,
    pub n: Option<usize>,
    pub rule: SelectionRule,
    pub trials: usize,
    pub seed: u64,
    pub rate_bits_ceil: Option<f64>,
    pub target_rate_bits: f64,
    #[serde(rename = "M")]
    pub section_size: Option<usize>,
    pub source: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

pub fn rows(result: &SweepResult, timing: bool) -> Vec<SweepRow> {
    result
        .points
        .iter()
        .map(|r| SweepRow {
            rate_bits: r.rate_bits,
            mean_distortion: r.mean_distortion,
            stderr: r.stderr,
            d_star: r.d_star,
            ecsq: r.ecsq,
            b: r.params.and_then(|p| p.exponent()).or(if r.point.section_size.is_none() { Some(r.point.b) } else { None }),
            sections: r.params.map(|p| p.sections()),
            n: r.params.map(|p| p.n()),
            rule: r.point.rule,
            trials: r.point.trials,
            seed: r.point.master_seed,
            rate_bits_ceil: r.rate_bits_ceil,
            target_rate_bits: r.point.rate_bits,
            section_size: r.params.map(|p| p.section_size()),
            source: r.point.source.name().to_string(),
            status: match &r.error {
                None => "ok".into(),
                Some(e) => format!("failed: {e}"),
            },
            wall_time_s: if timing { Some(r.wall_time_s) } else { None },
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Parse(format!("unknown format {other:?}"))),
        }
    }
}

const CSV_COLUMNS: [&str; 17] = [
    "rate_bits",
    "mean_distortion",
    "stderr",
    "d_star",
    "ecsq",
    "b",
    "L",
    "n",
    "rule",
    "trials",
    "seed",
    "rate_bits_ceil",
    "target_rate_bits",
    "M",
    "source",
    "status",
    "wall_time_s",
];

/// CSV text of `rows`. The timing column is written only when `timing` is set,
/// so repeated runs can be compared byte for byte.
pub fn rows_to_csv(rows: &[SweepRow], timing: bool) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let cols = if timing { &CSV_COLUMNS[..] } else { &CSV_COLUMNS[..16] };
    w.write_record(cols).map_err(|e| Error::Parse(e.to_string()))?;
    for r in rows {
        let mut r = r.clone();
        if !timing {
            r.wall_time_s = None;
        } else if r.wall_time_s.is_none() {
            r.wall_time_s = Some(0.0);
        }
        w.serialize(&r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Parse(e.to_string())))
        .collect()
}

/// Serializes a sweep in the requested format.
pub fn emit(result: &SweepResult, format: Format, timing: bool) -> Result<String> {
    match format {
        Format::Csv => rows_to_csv(&rows(result, timing), timing),
        Format::Json => serde_json::to_string_pretty(result).map_err(|e| Error::Parse(e.to_string())),
    }
}

pub fn result_from_json(text: &str) -> Result<SweepResult> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

/// Greedy against exhaustive search on one tiny random code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCase {
    pub n: usize,
    #[serde(rename = "L")]
    pub sections: usize,
    #[serde(rename = "M")]
    pub section_size: usize,
    pub rule: SelectionRule,
    pub greedy: f64,
    pub exhaustive: f64,
    pub same_indices: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub cases: Vec<OracleCase>,
    /// Cases where exhaustive search did worse than greedy (should be none).
    pub dominance_violations: usize,
    /// Single-section MinResidual cases where the two disagree (should be none).
    pub single_section_mismatches: usize,
}

/// Runs `instances` random codes with `n <= max_n` and `M^L <= max_codewords`,
/// alternating the two rules.
pub fn oracle_compare(instances: usize, seed: u64, max_n: usize, max_codewords: u128) -> Result<OracleReport> {
    use crate::codec::exhaustive::encode_exhaustive_capped;
    use crate::rng::{domain, CounterStream};

    if max_n < 2 || max_codewords < 2 {
        return Err(Error::InvalidParams("oracle instances need n >= 2 and at least 2 codewords".into()));
    }
    let mut rng = CounterStream::new(seed, domain::SEEDS, 0);
    let mut draw = |lo: usize, hi: usize| lo + (rng.next_u64() % (hi - lo + 1) as u64) as usize;
    let mut cases = Vec::with_capacity(instances);
    let (mut violations, mut mismatches) = (0, 0);
    while cases.len() < instances {
        let k = cases.len();
        let n = draw(2, max_n);
        let l = draw(1, 4);
        let m = draw(2, 64);
        if (m as u128).checked_pow(l as u32).is_none_or(|c| c > max_codewords) {
            continue;
        }
        let Ok(p) = SparcParams::from_dims(n, l, m, 1.0, derive_seed(seed, 2 * k as u64)) else {
            continue;
        };
        let rule = if k % 2 == 0 { SelectionRule::MinResidual } else { SelectionRule::MaxCorrelation };
        let d = Dictionary::new(&p);
        let s = SourceSpec::new(SourceKind::GaussianIid, 1.0, derive_seed(seed, 2 * k as u64 + 1)).generate(n)?;
        let (gi, trace) = encode(&p, &d, &s, rule)?;
        let (ei, ed) = encode_exhaustive_capped(&p, &d, &s, max_codewords)?;
        let greedy = trace.final_distortion();
        if ed > greedy * (1.0 + 1e-12) + 1e-15 {
            violations += 1;
        }
        if l == 1 && rule == SelectionRule::MinResidual && (ei != gi || ed.to_bits() != greedy.to_bits()) {
            mismatches += 1;
        }
        cases.push(OracleCase {
            n,
            sections: l,
            section_size: m,
            rule,
            greedy,
            exhaustive: ed,
            same_indices: ei == gi,
        });
    }
    Ok(OracleReport {
        cases,
        dominance_violations: violations,
        single_section_mismatches: mismatches,
    })
}
