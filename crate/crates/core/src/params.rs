//! Code parameters and the per-section coefficient ladder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of a sparse regression code.
///
/// `n` is the block length, `sections` (L) the number of sections and
/// `section_size` (M) the number of columns per section. The stored rate is
/// always the effective rate `L ln M / n` in nats per sample, so the rate
/// identity `M^L = e^{nR}` holds up to floating-point rounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparcParams {
    n: usize,
    sections: usize,
    section_size: usize,
    exponent: Option<f64>,
    rate: f64,
    sigma2: f64,
    seed: u64,
}

/// Derives code parameters from a target rate with `M = round(L^b)`.
///
/// `n` is `round(L ln M / R)` and the stored rate is recomputed from the
/// rounded integers.
pub fn derive_params(
    rate_nats: f64,
    sections: usize,
    exponent: f64,
    sigma2: f64,
    seed: u64,
) -> Result<SparcParams> {
    if !(exponent.is_finite() && exponent > 0.0) {
        return Err(Error::InvalidParams(format!(
            "section-size exponent must be positive, got {exponent}"
        )));
    }
    if sections == 0 {
        return Err(Error::InvalidParams("L must be at least 1".into()));
    }
    let m = (sections as f64).powf(exponent).round();
    if !(m.is_finite() && m < u32::MAX as f64) {
        return Err(Error::InvalidParams(format!("M = L^b = {m} is too large")));
    }
    let mut p = SparcParams::with_section_size(rate_nats, sections, m as usize, sigma2, seed)?;
    p.exponent = Some(exponent);
    Ok(p)
}

impl SparcParams {
    /// Parameters for an explicit section size; `n` follows from the rate.
    pub fn with_section_size(
        rate_nats: f64,
        sections: usize,
        section_size: usize,
        sigma2: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(rate_nats.is_finite() && rate_nats > 0.0) {
            return Err(Error::InvalidParams(format!(
                "rate must be positive, got {rate_nats}"
            )));
        }
        if sections == 0 {
            return Err(Error::InvalidParams("L must be at least 1".into()));
        }
        if section_size < 2 {
            return Err(Error::InvalidParams(format!(
                "M must be at least 2 for a positive rate, got {section_size}"
            )));
        }
        let n = (sections as f64 * (section_size as f64).ln() / rate_nats).round();
        if n < 1.0 {
            return Err(Error::InvalidParams(format!(
                "block length rounds to {n} at rate {rate_nats}"
            )));
        }
        if n > u32::MAX as f64 {
            return Err(Error::InvalidParams(format!("block length {n} is too large")));
        }
        Self::from_dims(n as usize, sections, section_size, sigma2, seed)
    }

    /// Parameters from explicit integer dimensions; the rate is `L ln M / n`.
    ///
    /// `M = 1` is accepted (rate zero, all coefficients zero) for degenerate
    /// test instances.
    pub fn from_dims(
        n: usize,
        sections: usize,
        section_size: usize,
        sigma2: f64,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 || sections == 0 || section_size == 0 {
            return Err(Error::InvalidParams(format!(
                "n, L, M must all be at least 1 (got n={n}, L={sections}, M={section_size})"
            )));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidParams(format!(
                "source variance must be positive, got {sigma2}"
            )));
        }
        if sections.checked_mul(section_size).is_none() {
            return Err(Error::InvalidParams("M * L overflows".into()));
        }
        let rate = sections as f64 * (section_size as f64).ln() / n as f64;
        let p = SparcParams {
            n,
            sections,
            section_size,
            exponent: None,
            rate,
            sigma2,
            seed,
        };
        p.check_ladder()?;
        Ok(p)
    }

    /// Same code with a different dictionary seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Same code with a different declared source variance.
    pub fn with_sigma2(mut self, sigma2: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidParams(format!(
                "source variance must be positive, got {sigma2}"
            )));
        }
        self.sigma2 = sigma2;
        Ok(self)
    }

    // With L >= 2 every factor (1 - 2R/L) must be positive. A single section
    // only uses c_1 = sqrt(2 R sigma^2), which is real for any rate.
    fn check_ladder(&self) -> Result<()> {
        if self.sections > 1 && self.ladder_ratio() <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "2R/L = {} must be below 1",
                2.0 * self.rate / self.sections as f64
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of sections, L.
    pub fn sections(&self) -> usize {
        self.sections
    }

    /// Columns per section, M.
    pub fn section_size(&self) -> usize {
        self.section_size
    }

    /// The exponent b when the params were derived with `M = round(L^b)`.
    pub fn exponent(&self) -> Option<f64> {
        self.exponent
    }

    /// Effective rate in nats per sample.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn rate_bits(&self) -> f64 {
        self.rate / std::f64::consts::LN_2
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Dictionary seed.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Total number of dictionary columns, M * L.
    pub fn total_columns(&self) -> usize {
        self.sections * self.section_size
    }

    /// Per-stage shrink factor of the typical residual, `1 - 2R/L`.
    pub fn ladder_ratio(&self) -> f64 {
        1.0 - 2.0 * self.rate / self.sections as f64
    }

    /// Equal up to the derivation exponent, which is not part of the code.
    pub fn same_code(&self, other: &SparcParams) -> bool {
        self.n == other.n
            && self.sections == other.sections
            && self.section_size == other.section_size
            && self.rate.to_bits() == other.rate.to_bits()
            && self.sigma2.to_bits() == other.sigma2.to_bits()
            && self.seed == other.seed
    }

    /// Bits per stored index: `max(1, ceil(log2 M))`.
    pub fn index_bits(&self) -> u32 {
        index_bits(self.section_size as u64)
    }
}

/// `max(1, ceil(log2 m))`.
pub fn index_bits(m: u64) -> u32 {
    if m <= 2 {
        1
    } else {
        64 - (m - 1).leading_zeros()
    }
}

/// The fixed nonzero value of the codeword in every section.
///
/// `c_i = sqrt((2 R sigma^2 / L) (1 - 2R/L)^(i-1))`, stored 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientLadder {
    c: Vec<f64>,
}

impl CoefficientLadder {
    /// Ladder for a rate in nats, a source variance and `sections` sections.
    pub fn new(rate: f64, sigma2: f64, sections: usize) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0 && sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidParams(format!(
                "ladder needs rate >= 0 and sigma^2 > 0, got R={rate}, sigma^2={sigma2}"
            )));
        }
        if sections == 0 {
            return Err(Error::InvalidParams("L must be at least 1".into()));
        }
        let l = sections as f64;
        let ratio = 1.0 - 2.0 * rate / l;
        if sections > 1 && ratio <= 0.0 {
            return Err(Error::InvalidParams(format!("2R/L = {} must be below 1", 2.0 * rate / l)));
        }
        let scale = 2.0 * rate * sigma2 / l;
        let c = (0..sections)
            .map(|i| (scale * ratio.powi(i as i32)).sqrt())
            .collect();
        Ok(CoefficientLadder { c })
    }

    pub fn values(&self) -> &[f64] {
        &self.c
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// Sum of squared coefficients, i.e. the codeword power.
    pub fn power(&self) -> f64 {
        self.c.iter().map(|c| c * c).sum()
    }
}

impl std::ops::Index<usize> for CoefficientLadder {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.c[i]
    }
}

pub fn coefficient_ladder(p: &SparcParams) -> Result<CoefficientLadder> {
    CoefficientLadder::new(p.rate, p.sigma2, p.sections)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn published_block_lengths_within_one() {
        // (rate bits, L, n for b=3, n for b=2)
        let table = [
            (1.082, 46, 705, 470),
            (2.092, 66, 573, 382),
            (3.102, 81, 497, 331),
            (4.112, 97, 468, 312),
        ];
        for (bits, l, n3, n2) in table {
            let p3 = derive_params(bits * LN2, l, 3.0, 1.0, 0).unwrap();
            let p2 = derive_params(bits * LN2, l, 2.0, 1.0, 0).unwrap();
            assert!(p3.n().abs_diff(n3) <= 1, "b=3 L={l}: {} vs {n3}", p3.n());
            assert!(p2.n().abs_diff(n2) <= 1, "b=2 L={l}: {} vs {n2}", p2.n());
            assert_eq!(p3.section_size(), l * l * l);
            assert_eq!(p2.section_size(), l * l);
        }
    }

    #[test]
    fn single_section_one_bit() {
        let p = SparcParams::with_section_size(LN2, 1, 2, 1.0, 0).unwrap();
        assert_eq!(p.n(), 1);
        assert_eq!(p.section_size(), 2);
        assert!((p.rate() - LN2).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(derive_params(0.0, 10, 2.0, 1.0, 0).is_err());
        assert!(derive_params(1.0, 0, 2.0, 1.0, 0).is_err());
        assert!(derive_params(1.0, 10, 0.0, 1.0, 0).is_err());
        assert!(derive_params(1.0, 10, 2.0, 0.0, 0).is_err());
        assert!(derive_params(1.0, 10, 2.0, f64::NAN, 0).is_err());
        // L = 1 gives M = 1 for any b
        assert!(derive_params(1.0, 1, 3.0, 1.0, 0).is_err());
        // n rounds to zero
        assert!(SparcParams::with_section_size(100.0, 1, 2, 1.0, 0).is_err());
        // 2R/L >= 1
        assert!(SparcParams::from_dims(2, 2, 8, 1.0, 0).is_err());
        assert!(SparcParams::from_dims(0, 2, 8, 1.0, 0).is_err());
    }

    #[test]
    fn ladder_examples() {
        let p = SparcParams::from_dims(1, 1, 2, 1.0, 0).unwrap();
        // R = ln 2, L = 1: c_1 = sqrt(2 ln 2)
        let c = coefficient_ladder(&p).unwrap();
        assert!((c[0] - (2.0 * LN2).sqrt()).abs() < 1e-15);

        // n = 4, L = 2, M = 2: R = ln 2 / 2 ... use n = 2 for R = ln 2, L = 2
        let p = SparcParams::from_dims(2, 2, 2, 1.0, 0).unwrap();
        assert!((p.rate() - LN2).abs() < 1e-15);
        let c = coefficient_ladder(&p).unwrap();
        // high-precision values of sqrt(ln 2) and sqrt(ln 2 (1 - ln 2))
        assert!((c[0] - 0.832_554_611_157_697_8).abs() < 1e-12);
        assert!((c[1] - 0.461_187_778_070_650_8).abs() < 1e-12);

        let p4 = p.with_sigma2(4.0).unwrap();
        let c4 = coefficient_ladder(&p4).unwrap();
        for (a, b) in c.values().iter().zip(c4.values()) {
            assert!((2.0 * a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn ladder_with_half_nat_single_section() {
        let c = CoefficientLadder::new(0.5, 1.0, 1).unwrap();
        assert_eq!(c.values(), &[1.0]);
        assert!(CoefficientLadder::new(1.0, 1.0, 2).is_err());
        assert!(CoefficientLadder::new(1.0, 0.0, 3).is_err());
    }

    #[test]
    fn index_bit_widths() {
        assert_eq!(index_bits(1), 1);
        assert_eq!(index_bits(2), 1);
        assert_eq!(index_bits(3), 2);
        assert_eq!(index_bits(4), 2);
        assert_eq!(index_bits(5), 3);
        assert_eq!(index_bits(97_336), 17);
        assert_eq!(index_bits(1 << 20), 20);
    }

    #[test]
    fn ladder_power_matches_geometric_sum() {
        // fixed-seed draws of (sigma^2, R, L) with 2R/L < 1
        let mut state = 0x9e37_79b9_7f4a_7c15u64;
        let mut uniform = || {
            state = crate::rng::mix64(state);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..1000 {
            let sigma2 = 0.01 + 100.0 * uniform();
            let l = 1 + (uniform() * 200.0) as usize;
            let rate = uniform() * 0.499 * l as f64;
            let c = CoefficientLadder::new(rate, sigma2, l).unwrap();
            let closed = sigma2 * (1.0 - (1.0 - 2.0 * rate / l as f64).powi(l as i32));
            let rel = (c.power() - closed).abs() / closed.max(f64::MIN_POSITIVE);
            assert!(rel <= 1e-9, "sigma2={sigma2} R={rate} L={l}: {rel}");
        }
    }

    proptest! {
        #[test]
        fn rate_identity_holds(rate in 0.05f64..3.0, l in 2usize..120, b in 0.5f64..3.5) {
            if let Ok(p) = derive_params(rate, l, b, 1.0, 0) {
                let lhs = p.sections() as f64 * (p.section_size() as f64).ln();
                let rhs = p.n() as f64 * p.rate();
                prop_assert!((lhs - rhs).abs() / rhs <= 1e-9);
                prop_assert!(p.ladder_ratio() > 0.0);
            }
        }

        #[test]
        fn ladder_strictly_decreasing(n in 20usize..2000, l in 2usize..100, m in 2usize..5000, s2 in 0.1f64..10.0) {
            if let Ok(p) = SparcParams::from_dims(n, l, m, s2, 0) {
                let c = coefficient_ladder(&p).unwrap();
                prop_assert_eq!(c.len(), l);
                for w in c.values().windows(2) {
                    prop_assert!(w[1] < w[0]);
                }
            }
        }
    }
}
