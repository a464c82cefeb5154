//! Seeded benchmark sources and readers for external sample files.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{domain, CounterStream};

/// Default correlation of the Gauss-Markov source.
pub const DEFAULT_RHO: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SourceKind {
    #[serde(rename = "gaussian")]
    GaussianIid,
    #[serde(rename = "laplacian")]
    LaplacianIid,
    /// Stationary AR(1): `X_k = rho X_{k-1} + sqrt(1 - rho^2) sigma Z_k`.
    GaussMarkov { rho: f64 },
}

impl SourceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SourceKind::GaussianIid => "gaussian",
            SourceKind::LaplacianIid => "laplacian",
            SourceKind::GaussMarkov { .. } => "gauss-markov",
        }
    }
}

/// A zero-mean source with population variance `sigma2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub sigma2: f64,
    pub seed: u64,
}

impl SourceSpec {
    pub fn new(kind: SourceKind, sigma2: f64, seed: u64) -> Self {
        SourceSpec { kind, sigma2, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::InvalidParams(format!(
                "source variance must be positive, got {}",
                self.sigma2
            )));
        }
        if let SourceKind::GaussMarkov { rho } = self.kind {
            if !(rho.is_finite() && rho.abs() < 1.0) {
                return Err(Error::InvalidParams(format!("|rho| must be below 1, got {rho}")));
            }
        }
        Ok(())
    }

    /// `n` samples, deterministic in `(self, n)`.
    pub fn generate(&self, n: usize) -> Result<Vec<f64>> {
        self.validate()?;
        if n == 0 {
            return Err(Error::InvalidParams("source length must be at least 1".into()));
        }
        let sigma = self.sigma2.sqrt();
        let mut rng = CounterStream::new(self.seed, domain::SOURCE, 0);
        let out = match self.kind {
            SourceKind::GaussianIid => (0..n).map(|_| sigma * rng.next_normal()).collect(),
            SourceKind::LaplacianIid => {
                // scale sigma / sqrt(2) gives variance sigma^2
                let b = sigma / std::f64::consts::SQRT_2;
                (0..n)
                    .map(|_| {
                        let u = rng.next_open01();
                        if u < 0.5 {
                            b * (2.0 * u).ln()
                        } else {
                            -b * (2.0 * (1.0 - u)).ln()
                        }
                    })
                    .collect()
            }
            SourceKind::GaussMarkov { rho } => {
                let innovation = sigma * (1.0 - rho * rho).sqrt();
                let mut x = Vec::with_capacity(n);
                let mut prev = sigma * rng.next_normal();
                x.push(prev);
                for _ in 1..n {
                    prev = rho * prev + innovation * rng.next_normal();
                    x.push(prev);
                }
                x
            }
        };
        Ok(out)
    }
}

/// Sample mean and (biased) variance.
pub fn moments(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Second moment about zero, the quantity the codec treats as `sigma^2`.
pub fn power(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Parses raw little-endian f64 samples.
pub fn parse_raw_f64(bytes: &[u8]) -> Result<Vec<f64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Parse(format!(
            "raw f64 input length {} is not a multiple of 8",
            bytes.len()
        )));
    }
    let v: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    Ok(v)
}

pub fn to_raw_f64(samples: &[f64]) -> Vec<u8> {
    samples.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Parses a single-column CSV of samples. A non-numeric first row is taken
/// as a header; blank lines are skipped.
pub fn parse_csv(text: &[u8]) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text);
    let mut out = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.len() != 1 {
            return Err(Error::Parse(format!(
                "row {} has {} columns, expected 1",
                row + 1,
                rec.len()
            )));
        }
        let field = &rec[0];
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(_) => return Err(Error::NonFiniteInput),
            Err(_) if row == 0 => continue,
            Err(_) => {
                return Err(Error::Parse(format!("row {}: {field:?} is not a number", row + 1)))
            }
        }
    }
    Ok(out)
}
