//! Successive-approximation encoder and the matching decoder.
//!
//! Stage `i` scans the `M` columns of section `i`, picks the column that
//! best matches the current residual under the [`SelectionRule`], and
//! subtracts `c_i` times that column from the residual. The chosen indices
//! are the codeword; decoding sums `c_i A_{m_i}`.

pub mod exhaustive;
mod trace;

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use exhaustive::{encode_exhaustive, encode_exhaustive_capped, DEFAULT_EXHAUSTIVE_CAP};
pub use trace::EncodeTrace;

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::kernel::{dots_against_rows, norm2};
use crate::params::{coefficient_ladder, SparcParams};

/// Column selection rule for each stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum SelectionRule {
    /// `argmax_j <A_j, R_{i-1}>`: the rule the convergence analysis covers.
    #[serde(rename = "max-corr")]
    MaxCorrelation,
    /// `argmin_j ||R_{i-1} - c_i A_j||^2`, computed as
    /// `argmax_j 2 c_i <R_{i-1}, A_j> - c_i^2 ||A_j||^2`. Accounts for the
    /// column norm ("gain") and does slightly better in practice.
    #[default]
    #[serde(rename = "min-resid")]
    MinResidual,
}

impl SelectionRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectionRule::MaxCorrelation => "max-corr",
            SelectionRule::MinResidual => "min-resid",
        }
    }
}

impl std::fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SelectionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max-corr" | "max-correlation" => Ok(SelectionRule::MaxCorrelation),
            "min-resid" | "min-residual" => Ok(SelectionRule::MinResidual),
            other => Err(Error::Parse(format!("unknown selection rule {other:?}"))),
        }
    }
}

/// The codeword: one global column index per section.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BetaIndices {
    m: Vec<usize>,
}

impl BetaIndices {
    /// Validates global indices against the section layout of `p`.
    pub fn new(p: &SparcParams, m: Vec<usize>) -> Result<Self> {
        if m.len() != p.sections() {
            return Err(Error::DimensionMismatch {
                expected: p.sections(),
                got: m.len(),
            });
        }
        let size = p.section_size();
        for (i, &j) in m.iter().enumerate() {
            if j / size != i {
                return Err(Error::IndexOutOfRange {
                    index: j as u64,
                    len: p.total_columns() as u64,
                });
            }
        }
        Ok(BetaIndices { m })
    }

    /// Builds the codeword from section-local offsets `0 <= v < M`.
    pub fn from_local(p: &SparcParams, local: &[u64]) -> Result<Self> {
        let size = p.section_size() as u64;
        let m = local
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if v >= size {
                    Err(Error::IndexOutOfRange { index: v, len: size })
                } else {
                    Ok(i * p.section_size() + v as usize)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(p, m)
    }

    /// Global column indices, section order.
    pub fn indices(&self) -> &[usize] {
        &self.m
    }

    /// Section-local offsets `m_i - (i - 1) M`.
    pub fn local(&self, section_size: usize) -> Vec<u64> {
        self.m
            .iter()
            .enumerate()
            .map(|(i, &j)| (j - i * section_size) as u64)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }
}

/// One source to encode within a batch.
#[derive(Debug, Clone, Copy)]
pub struct EncodeJob<'a> {
    pub source: &'a [f64],
    pub rule: SelectionRule,
}

#[derive(Debug, Clone, Copy)]
struct Best {
    index: usize,
    stat: f64,
    dot: f64,
}

impl Best {
    const NONE: Best = Best {
        index: usize::MAX,
        stat: f64::NEG_INFINITY,
        dot: 0.0,
    };
}

#[inline]
fn rule_stat(rule: SelectionRule, c: f64, dot: f64, norm2: f64) -> f64 {
    match rule {
        SelectionRule::MaxCorrelation => dot,
        SelectionRule::MinResidual => 2.0 * c * dot - c * c * norm2,
    }
}

const COLUMN_BLOCK: usize = 4;
const CHUNK_COLUMNS: usize = 512;

// Scans `range` in ascending column order; a column replaces the current
// best only on a strictly larger statistic, so ties go to the lowest index.
fn scan_chunk(
    dict: &Dictionary,
    range: Range<usize>,
    residuals: &[Vec<f64>],
    rules: &[SelectionRule],
    c: f64,
    need_norms: bool,
) -> Vec<Best> {
    let n = dict.n();
    let k = residuals.len();
    let mut best = vec![Best::NONE; k];
    let mut buf = vec![0.0; COLUMN_BLOCK * n];
    let mut dots = vec![0.0; COLUMN_BLOCK * k];
    let mut norms = [0.0; COLUMN_BLOCK];

    let mut update = |j: usize, dots: &[f64], norms: &[f64], width: usize| {
        for t in 0..k {
            for cidx in 0..width {
                let d = dots[t * width + cidx];
                let s = rule_stat(rules[t], c, d, norms[cidx]);
                if s > best[t].stat {
                    best[t] = Best {
                        index: j + cidx,
                        stat: s,
                        dot: d,
                    };
                }
            }
        }
    };

    let mut j = range.start;
    while j + COLUMN_BLOCK <= range.end {
        for (cidx, col) in buf.chunks_exact_mut(n).enumerate() {
            dict.fill_column_unchecked(j + cidx, col);
            if need_norms {
                norms[cidx] = norm2(col);
            }
        }
        let (c0, rest) = buf.split_at(n);
        let (c1, rest) = rest.split_at(n);
        let (c2, c3) = rest.split_at(n);
        dots_against_rows([c0, c1, c2, c3], residuals, &mut dots);
        update(j, &dots, &norms, COLUMN_BLOCK);
        j += COLUMN_BLOCK;
    }
    while j < range.end {
        let col = &mut buf[..n];
        dict.fill_column_unchecked(j, col);
        if need_norms {
            norms[0] = norm2(col);
        }
        dots_against_rows([&buf[..n]], residuals, &mut dots[..k]);
        update(j, &dots[..k], &norms[..1], 1);
        j += 1;
    }
    best
}

fn scan_section(
    dict: &Dictionary,
    range: Range<usize>,
    residuals: &[Vec<f64>],
    rules: &[SelectionRule],
    c: f64,
) -> Vec<Best> {
    let need_norms = rules.contains(&SelectionRule::MinResidual);
    let len = range.len();
    if len <= CHUNK_COLUMNS || rayon::current_num_threads() == 1 {
        return scan_chunk(dict, range, residuals, rules, c, need_norms);
    }
    let chunks = len.div_ceil(CHUNK_COLUMNS);
    let partial: Vec<Vec<Best>> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let lo = range.start + ci * CHUNK_COLUMNS;
            let hi = (lo + CHUNK_COLUMNS).min(range.end);
            scan_chunk(dict, lo..hi, residuals, rules, c, need_norms)
        })
        .collect();
    // chunks are merged in ascending order with the same strict comparison
    let mut best = vec![Best::NONE; residuals.len()];
    for part in partial {
        for (b, p) in best.iter_mut().zip(part) {
            if p.stat > b.stat {
                *b = p;
            }
        }
    }
    best
}

fn check_source(p: &SparcParams, s: &[f64]) -> Result<()> {
    if s.len() != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            got: s.len(),
        });
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    Ok(())
}

fn check_dictionary(p: &SparcParams, d: &Dictionary) -> Result<()> {
    if d.n() != p.n() || d.sections() != p.sections() || d.section_size() != p.section_size() {
        return Err(Error::InvalidParams(format!(
            "dictionary shape n={} L={} M={} does not match params n={} L={} M={}",
            d.n(),
            d.sections(),
            d.section_size(),
            p.n(),
            p.sections(),
            p.section_size()
        )));
    }
    Ok(())
}

/// Selects the section-`section` (1-based) column for `residual`.
///
/// Returns the global index and the rule statistic: the normalized
/// correlation `<A_j, R/||R||>` for [`SelectionRule::MaxCorrelation`] (0 for
/// a zero residual), `2c<R, A_j> - c^2||A_j||^2` for
/// [`SelectionRule::MinResidual`].
pub fn select_column(
    d: &Dictionary,
    section: usize,
    residual: &[f64],
    c: f64,
    rule: SelectionRule,
) -> Result<(usize, f64)> {
    let range = d.section_bounds(section)?;
    if residual.len() != d.n() {
        return Err(Error::DimensionMismatch {
            expected: d.n(),
            got: residual.len(),
        });
    }
    if residual.iter().any(|v| !v.is_finite()) || !c.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    let rows = [residual.to_vec()];
    let best = scan_section(d, range, &rows, &[rule], c)[0];
    let stat = match rule {
        SelectionRule::MaxCorrelation => {
            let norm = norm2(residual).sqrt();
            if norm > 0.0 {
                best.dot / norm
            } else {
                0.0
            }
        }
        SelectionRule::MinResidual => best.stat,
    };
    Ok((best.index, stat))
}

/// Encodes one source block.
pub fn encode(
    p: &SparcParams,
    d: &Dictionary,
    s: &[f64],
    rule: SelectionRule,
) -> Result<(BetaIndices, EncodeTrace)> {
    let mut out = encode_batch(p, d, &[EncodeJob { source: s, rule }])?;
    Ok(out.pop().expect("one job in, one result out"))
}

/// Encodes several sources against the same dictionary in one pass.
///
/// Each dictionary column is generated once per batch and correlated with
/// every job's residual. Results are bit-identical to encoding each job on
/// its own.
pub fn encode_batch(
    p: &SparcParams,
    d: &Dictionary,
    jobs: &[EncodeJob<'_>],
) -> Result<Vec<(BetaIndices, EncodeTrace)>> {
    check_dictionary(p, d)?;
    for job in jobs {
        check_source(p, job.source)?;
    }
    let ladder = coefficient_ladder(p)?;
    let n = p.n();
    let nf = n as f64;
    let sections = p.sections();
    let sigma2 = p.sigma2();
    let ratio = p.ladder_ratio();
    let max_norm = (2.0 * (p.section_size() as f64).ln()).sqrt();
    let stage_shrink = (-2.0 * p.rate() / sections as f64).exp();
    let rules: Vec<SelectionRule> = jobs.iter().map(|j| j.rule).collect();

    let mut residuals: Vec<Vec<f64>> = jobs.iter().map(|j| j.source.to_vec()).collect();
    let mut chosen: Vec<Vec<usize>> = vec![Vec::with_capacity(sections); jobs.len()];
    let mut traces: Vec<EncodeTrace> = residuals
        .iter()
        .map(|r| {
            let r0 = norm2(r) / nf;
            let mut t = EncodeTrace {
                residual_norm2: Vec::with_capacity(sections + 1),
                delta: Vec::with_capacity(sections + 1),
                typical_residual: Vec::with_capacity(sections + 1),
                ..EncodeTrace::default()
            };
            t.residual_norm2.push(r0);
            t.typical_residual.push(sigma2);
            t.delta.push((r0 / sigma2).sqrt() - 1.0);
            t
        })
        .collect();

    let mut col = vec![0.0; n];
    for i in 1..=sections {
        let c = ladder[i - 1];
        let range = d.section_bounds(i)?;
        let best = scan_section(d, range, &residuals, &rules, c);
        let typical = sigma2 * ratio.powi(i as i32);
        for (t, b) in best.iter().enumerate() {
            d.fill_column_unchecked(b.index, &mut col);
            let prev = traces[t].residual_norm2[i - 1];
            let prev_norm = (prev * nf).sqrt();
            let stat = if prev_norm > 0.0 { b.dot / prev_norm } else { 0.0 };
            let r = &mut residuals[t];
            for (rk, ak) in r.iter_mut().zip(&col) {
                *rk -= c * ak;
            }
            let now = norm2(r) / nf;
            let tr = &mut traces[t];
            tr.gamma.push(norm2(&col) / nf - 1.0);
            tr.selected_dot.push(b.dot);
            tr.selected_stat.push(stat);
            tr.eps.push(if max_norm > 0.0 { stat / max_norm - 1.0 } else { f64::NAN });
            tr.refinement_target.push(prev * stage_shrink);
            tr.residual_norm2.push(now);
            tr.typical_residual.push(typical);
            tr.delta.push((now / typical).sqrt() - 1.0);
            chosen[t].push(b.index);
        }
    }
    Ok(chosen
        .into_iter()
        .zip(traces)
        .map(|(m, t)| (BetaIndices { m }, t))
        .collect())
}

/// Reconstruction `sum_i c_i A_{m_i}`.
pub fn decode(p: &SparcParams, d: &Dictionary, idx: &BetaIndices) -> Result<Vec<f64>> {
    check_dictionary(p, d)?;
    let idx = BetaIndices::new(p, idx.m.clone())?;
    let ladder = coefficient_ladder(p)?;
    let mut shat = vec![0.0; p.n()];
    let mut col = vec![0.0; p.n()];
    for (i, &j) in idx.m.iter().enumerate() {
        d.fill_column(j, &mut col)?;
        let c = ladder[i];
        for (x, a) in shat.iter_mut().zip(&col) {
            *x += c * a;
        }
    }
    Ok(shat)
}

/// Normalized squared error `(1/n) sum (s_k - shat_k)^2`.
pub fn distortion(s: &[f64], shat: &[f64]) -> Result<f64> {
    if s.len() != shat.len() {
        return Err(Error::DimensionMismatch {
            expected: s.len(),
            got: shat.len(),
        });
    }
    if s.is_empty() {
        return Ok(0.0);
    }
    let diff: Vec<f64> = s.iter().zip(shat).map(|(a, b)| a - b).collect();
    Ok(norm2(&diff) / s.len() as f64)
}

/// Re-scans section `i` and returns the largest rule statistic found, for
/// checking greedy maximality after the fact.
pub fn section_max_stat(
    d: &Dictionary,
    section: usize,
    residual: &[f64],
    c: f64,
    rule: SelectionRule,
) -> Result<(usize, f64)> {
    let range = d.section_bounds(section)?;
    let rows = [residual.to_vec()];
    let b = scan_section(d, range, &rows, &[rule], c)[0];
    Ok((b.index, b.stat))
}

#[cfg(test)]
pub(crate) fn stage_stat(rule: SelectionRule, c: f64, column: &[f64], residual: &[f64]) -> f64 {
    rule_stat(rule, c, crate::kernel::dot(column, residual), norm2(column))
}
