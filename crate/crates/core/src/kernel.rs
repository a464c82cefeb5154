//! Inner-product kernels for the encoder's hot loop.
//!
//! Every inner product in the crate goes through the same accumulation
//! order: element `k` is fused-multiply-added into lane `k % LANES`, lanes are
//! combined by a fixed pairwise tree. The blocked kernel computes many
//! products at once but performs exactly the same operations per product, so
//! `block_dots` and `dot` agree bit for bit and results do not depend on how
//! work is batched or split across threads.

pub const LANES: usize = 8;

#[inline(always)]
fn reduce(acc: &[f64; LANES]) -> f64 {
    ((acc[0] + acc[4]) + (acc[2] + acc[6])) + ((acc[1] + acc[5]) + (acc[3] + acc[7]))
}

/// Inner product `<a, b>`; panics if the lengths differ.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; LANES];
    let mut ca = a.chunks_exact(LANES);
    let mut cb = b.chunks_exact(LANES);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for l in 0..LANES {
            acc[l] = x[l].mul_add(y[l], acc[l]);
        }
    }
    for (l, (x, y)) in ca.remainder().iter().zip(cb.remainder()).enumerate() {
        acc[l] = x.mul_add(*y, acc[l]);
    }
    reduce(&acc)
}

/// Squared Euclidean norm, `dot(a, a)`.
#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a)
}

/// `out[c][t] = dot(cols[c], rows[t])` for a `C x T` block.
///
/// All slices must have the same length.
#[inline]
pub fn block_dots<const C: usize, const T: usize>(
    cols: [&[f64]; C],
    rows: [&[f64]; T],
) -> [[f64; T]; C] {
    let n = cols[0].len();
    for c in &cols {
        assert_eq!(c.len(), n);
    }
    for r in &rows {
        assert_eq!(r.len(), n);
    }
    let full = n - n % LANES;
    let mut acc = full_chunks::<C, T>(&cols, &rows, full / LANES);
    for (l, k) in (full..n).enumerate() {
        for c in 0..C {
            for t in 0..T {
                acc[c][t][l] = cols[c][k].mul_add(rows[t][k], acc[c][t][l]);
            }
        }
    }
    let mut out = [[0.0f64; T]; C];
    for c in 0..C {
        for t in 0..T {
            out[c][t] = reduce(&acc[c][t]);
        }
    }
    out
}

type Acc<const C: usize, const T: usize> = [[[f64; LANES]; T]; C];

/// Lane accumulators over the first `chunks * LANES` elements.
#[inline]
fn full_chunks<const C: usize, const T: usize>(cols: &[&[f64]; C], rows: &[&[f64]; T], chunks: usize) -> Acc<C, T> {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            // SAFETY: the feature was detected and every slice holds at least `chunks * LANES` values
            return unsafe { x86::chunks_avx512(cols, rows, chunks) };
        }
        if std::arch::is_x86_feature_detected!("avx") && std::arch::is_x86_feature_detected!("fma") {
            // SAFETY: as above
            return unsafe { x86::chunks_avx2(cols, rows, chunks) };
        }
    }
    chunks_portable(cols, rows, chunks)
}

fn chunks_portable<const C: usize, const T: usize>(cols: &[&[f64]; C], rows: &[&[f64]; T], chunks: usize) -> Acc<C, T> {
    let mut acc = [[[0.0f64; LANES]; T]; C];
    for k in 0..chunks {
        for t in 0..T {
            let r = &rows[t][k * LANES..(k + 1) * LANES];
            for c in 0..C {
                let x = &cols[c][k * LANES..(k + 1) * LANES];
                for l in 0..LANES {
                    acc[c][t][l] = x[l].mul_add(r[l], acc[c][t][l]);
                }
            }
        }
    }
    acc
}

// Each vector lane carries one accumulator lane of the portable loop and
// uses a fused multiply-add, so all three paths agree bit for bit.
#[cfg(target_arch = "x86_64")]
mod x86 {
    use super::{Acc, LANES};
    use std::arch::x86_64::*;

    #[target_feature(enable = "avx512f")]
    pub(super) unsafe fn chunks_avx512<const C: usize, const T: usize>(
        cols: &[&[f64]; C],
        rows: &[&[f64]; T],
        chunks: usize,
    ) -> Acc<C, T> {
        let mut acc = [[_mm512_setzero_pd(); T]; C];
        for k in 0..chunks {
            let off = k * LANES;
            let mut x = [_mm512_setzero_pd(); C];
            for c in 0..C {
                x[c] = _mm512_loadu_pd(cols[c].as_ptr().add(off));
            }
            for t in 0..T {
                let r = _mm512_loadu_pd(rows[t].as_ptr().add(off));
                for c in 0..C {
                    acc[c][t] = _mm512_fmadd_pd(x[c], r, acc[c][t]);
                }
            }
        }
        let mut out = [[[0.0f64; LANES]; T]; C];
        for c in 0..C {
            for t in 0..T {
                _mm512_storeu_pd(out[c][t].as_mut_ptr(), acc[c][t]);
            }
        }
        out
    }

    /// Two passes, one per half of the lanes, to stay within 16 registers.
    #[target_feature(enable = "avx,fma")]
    pub(super) unsafe fn chunks_avx2<const C: usize, const T: usize>(
        cols: &[&[f64]; C],
        rows: &[&[f64]; T],
        chunks: usize,
    ) -> Acc<C, T> {
        let mut out = [[[0.0f64; LANES]; T]; C];
        for half in [0, 4] {
            let mut acc = [[_mm256_setzero_pd(); T]; C];
            for k in 0..chunks {
                let off = k * LANES + half;
                let mut x = [_mm256_setzero_pd(); C];
                for c in 0..C {
                    x[c] = _mm256_loadu_pd(cols[c].as_ptr().add(off));
                }
                for t in 0..T {
                    let r = _mm256_loadu_pd(rows[t].as_ptr().add(off));
                    for c in 0..C {
                        acc[c][t] = _mm256_fmadd_pd(x[c], r, acc[c][t]);
                    }
                }
            }
            for c in 0..C {
                for t in 0..T {
                    _mm256_storeu_pd(out[c][t].as_mut_ptr().add(half), acc[c][t]);
                }
            }
        }
        out
    }
}

/// Inner products of `C` columns against every row in `rows`.
///
/// `out[t * C + c] = dot(cols[c], rows[t])`.
pub fn dots_against_rows<const C: usize>(cols: [&[f64]; C], rows: &[Vec<f64>], out: &mut [f64]) {
    debug_assert_eq!(out.len(), rows.len() * C);
    const T: usize = 5;
    let mut t = 0;
    while t + T <= rows.len() {
        let r = block_dots::<C, T>(cols, std::array::from_fn(|i| &rows[t + i][..]));
        for dt in 0..T {
            for c in 0..C {
                out[(t + dt) * C + c] = r[c][dt];
            }
        }
        t += T;
    }
    while t < rows.len() {
        let r = block_dots::<C, 1>(cols, [&rows[t][..]]);
        for c in 0..C {
            out[t * C + c] = r[c][0];
        }
        t += 1;
    }
}
