//! Closed-form reference curves and the excess-distortion bound calculator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::SparcParams;

/// Gaussian distortion-rate function `sigma^2 e^{-2R}` (R in nats).
pub fn d_star(rate: f64, sigma2: f64) -> f64 {
    sigma2 * (-2.0 * rate).exp()
}

/// High-rate distortion of an entropy-coded uniform scalar quantizer on a
/// unit-variance source, `(pi e / 6) e^{-2R}`.
pub fn ecsq_highrate(rate: f64) -> f64 {
    std::f64::consts::PI * std::f64::consts::E / 6.0 * (-2.0 * rate).exp()
}

/// Typical residual variance after `i` stages, `sigma^2 (1 - 2R/L)^i`.
pub fn typical_residual(p: &SparcParams, i: usize) -> Result<f64> {
    if i > p.sections() {
        return Err(Error::InvalidParams(format!(
            "stage {i} exceeds L = {}",
            p.sections()
        )));
    }
    Ok(p.sigma2() * p.ladder_ratio().powi(i as i32))
}

/// Deviation budgets `delta_0, delta_1, delta_2` of the excess-distortion bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub delta0: f64,
    pub delta1: f64,
    pub delta2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessBounds {
    /// `delta_0 + 5R(delta_1 + delta_2)`.
    pub big_delta: f64,
    /// True when `big_delta < 1/2`, the regime the bound covers.
    pub applicable: bool,
    /// `sigma^2 e^{-2R} (1 + e^R Delta)^2`.
    pub guaranteed_distortion: f64,
    /// `2 M L exp(-n delta_1^2 / 8)`.
    pub p1: f64,
    /// `(M^{2 delta_2} / (8 ln M))^{-L}`.
    pub p2: f64,
    /// Chernoff bound on `p0` for an i.i.d. Gaussian source, `2 exp(-3 n delta_0^2 / 4)`.
    pub p0_gaussian: f64,
    /// Smallest `delta_2` for which `p2` shrinks with L:
    /// `ln ln M / (2 ln M) + ln 8 / (2 ln M)`.
    pub delta2_floor: f64,
}

impl ExcessBounds {
    /// `p0 + p1 + p2` with the Gaussian `p0`.
    pub fn total_gaussian(&self) -> f64 {
        self.p0_gaussian + self.p1 + self.p2
    }
}

pub fn excess_bounds(p: &SparcParams, d: &BoundInputs) -> Result<ExcessBounds> {
    for (name, v) in [("delta0", d.delta0), ("delta1", d.delta1), ("delta2", d.delta2)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
        }
    }
    if p.section_size() <= 1 {
        return Err(Error::InvalidParams("bounds need M > 1".into()));
    }
    let n = p.n() as f64;
    let l = p.sections() as f64;
    let m = p.section_size() as f64;
    let r = p.rate();
    let ln_m = m.ln();

    let big_delta = d.delta0 + 5.0 * r * (d.delta1 + d.delta2);
    let g = 1.0 + r.exp() * big_delta;
    Ok(ExcessBounds {
        big_delta,
        applicable: big_delta < 0.5,
        guaranteed_distortion: d_star(r, p.sigma2()) * g * g,
        p1: 2.0 * m * l * (-n * d.delta1 * d.delta1 / 8.0).exp(),
        p2: (m.powf(2.0 * d.delta2) / (8.0 * ln_m)).powf(-l),
        p0_gaussian: 2.0 * (-3.0 * n * d.delta0 * d.delta0 / 4.0).exp(),
        delta2_floor: (ln_m.ln() + 8f64.ln()) / (2.0 * ln_m),
    })
}
