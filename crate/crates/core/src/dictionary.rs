//! Seed-driven design matrix.
//!
//! Column `j` of the `n x ML` matrix is the first `n` normals of the counter
//! stream keyed by `(seed, j)` (see [`crate::rng`]). Columns are regenerated
//! on demand, so neither side of the codec ever stores the matrix.

use std::ops::Range;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::params::SparcParams;
use crate::rng::{domain, CounterStream, SCHEME_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dictionary {
    n: usize,
    sections: usize,
    section_size: usize,
    seed: u64,
    scheme: u8,
}

impl Dictionary {
    /// Dictionary for `params`, keyed by `params.seed()`.
    pub fn new(params: &SparcParams) -> Self {
        Dictionary {
            n: params.n(),
            sections: params.sections(),
            section_size: params.section_size(),
            seed: params.seed(),
            scheme: SCHEME_VERSION,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sections(&self) -> usize {
        self.sections
    }

    pub fn section_size(&self) -> usize {
        self.section_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn scheme(&self) -> u8 {
        self.scheme
    }

    pub fn total_columns(&self) -> usize {
        self.sections * self.section_size
    }

    /// True when this dictionary has the shape and seed of `params`.
    pub fn matches(&self, params: &SparcParams) -> bool {
        self.n == params.n()
            && self.sections == params.sections()
            && self.section_size == params.section_size()
            && self.seed == params.seed()
    }

    /// Writes column `j` into `out` (length `n`).
    pub fn fill_column(&self, j: usize, out: &mut [f64]) -> Result<()> {
        if j >= self.total_columns() {
            return Err(Error::IndexOutOfRange {
                index: j as u64,
                len: self.total_columns() as u64,
            });
        }
        if out.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: out.len(),
            });
        }
        self.fill_column_unchecked(j, out);
        Ok(())
    }

    #[inline]
    pub(crate) fn fill_column_unchecked(&self, j: usize, out: &mut [f64]) {
        CounterStream::new(self.seed, domain::DICTIONARY, j as u64).fill_normal(out);
    }

    pub fn column(&self, j: usize) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.n];
        self.fill_column(j, &mut v)?;
        Ok(v)
    }

    /// Half-open global column range of section `i` (1-based).
    pub fn section_bounds(&self, i: usize) -> Result<Range<usize>> {
        if i == 0 || i > self.sections {
            return Err(Error::IndexOutOfRange {
                index: i as u64,
                len: self.sections as u64,
            });
        }
        let lo = (i - 1) * self.section_size;
        Ok(lo..lo + self.section_size)
    }

    /// Dense `n x ML` matrix, refusing anything larger than `cap_bytes`.
    pub fn materialize(&self, cap_bytes: usize) -> Result<Array2<f64>> {
        let requested = self.n as u128 * self.total_columns() as u128 * 8;
        if requested > cap_bytes as u128 {
            return Err(Error::MemoryCapExceeded {
                requested,
                cap: cap_bytes as u128,
            });
        }
        let mut a = Array2::<f64>::zeros((self.n, self.total_columns()));
        let mut col = vec![0.0; self.n];
        for j in 0..self.total_columns() {
            self.fill_column_unchecked(j, &mut col);
            a.column_mut(j).iter_mut().zip(&col).for_each(|(d, s)| *d = *s);
        }
        Ok(a)
    }
}
