//! Counter-based keyed random streams and the normal sampler used by the
//! dictionary and the source generators.
//!
//! Scheme 1 (the only scheme so far):
//!
//! * A stream is keyed by `(seed, domain, stream id)`:
//!   `key = mix64(seed ^ mix64(domain ^ mix64(stream)))`.
//! * Draw `k` (0-based) of the stream is `mix64(key + (k + 1) * GOLDEN)`, where
//!   `mix64` is the SplitMix64 finalizer. Each stream is therefore a SplitMix64
//!   sequence and any draw can be computed from its counter alone.
//! * Normals come from a 128-layer ziggurat (Marsaglia and Tsang, in Doornik's
//!   formulation). One draw supplies both the layer (low 7 bits) and the
//!   abscissa (high 53 bits); rejections consume further draws.
//!
//! Changing any of the above requires bumping [`SCHEME_VERSION`].

use std::sync::OnceLock;

/// Version of the column generation scheme, recorded in every bitstream.
pub const SCHEME_VERSION: u8 = 1;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Domain tags keep dictionary columns, sources and seed derivation apart
/// even when the same numeric seed is reused.
pub mod domain {
    pub const DICTIONARY: u64 = 0x6469_6374_0000_0001;
    pub const SOURCE: u64 = 0x736f_7572_0000_0002;
    pub const SEEDS: u64 = 0x7365_6564_0000_0003;
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent 64-bit seed from a parent seed and a label.
pub fn derive_seed(parent: u64, label: u64) -> u64 {
    mix64(parent ^ mix64(domain::SEEDS ^ mix64(label)))
}

#[derive(Debug, Clone)]
pub struct CounterStream {
    key: u64,
    counter: u64,
}

impl CounterStream {
    pub fn new(seed: u64, domain: u64, stream: u64) -> Self {
        CounterStream {
            key: mix64(seed ^ mix64(domain ^ mix64(stream))),
            counter: 0,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
    }

    /// Standard normal variate.
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        let bits = self.next_u64();
        match fast_normal(tables(), bits) {
            Some(x) => x,
            None => self.normal_slow(bits),
        }
    }

    /// Rejection branch of the ziggurat for a first draw `bits` that missed
    /// the fast path.
    #[cold]
    fn normal_slow(&mut self, mut bits: u64) -> f64 {
        let t = tables();
        loop {
            let layer = (bits & 0x7f) as usize;
            let u = uniform_pm1(bits);
            if layer == 0 {
                return self.tail(u < 0.0);
            }
            let x = u * t.x[layer];
            let f0 = (-0.5 * (t.x[layer] * t.x[layer] - x * x)).exp();
            let f1 = (-0.5 * (t.x[layer + 1] * t.x[layer + 1] - x * x)).exp();
            if f1 + self.next_open01() * (f0 - f1) < 1.0 {
                return x;
            }
            bits = self.next_u64();
            if let Some(x) = fast_normal(t, bits) {
                return x;
            }
        }
    }

    fn tail(&mut self, negative: bool) -> f64 {
        loop {
            let x = self.next_open01().ln() / ZIG_R;
            let y = self.next_open01().ln();
            if -2.0 * y >= x * x {
                return if negative { x - ZIG_R } else { ZIG_R - x };
            }
        }
    }

    /// Fills `out` with the same values as repeated [`next_normal`](Self::next_normal) calls.
    pub fn fill_normal(&mut self, out: &mut [f64]) {
        // raw draws are produced a block at a time; on the rare slow path the
        // unused part of the block is handed back so the sequence is unchanged
        const BLOCK: usize = 16;
        let t = tables();
        let mut buf = [0u64; BLOCK];
        let mut pos = BLOCK;
        for v in out.iter_mut() {
            if pos == BLOCK {
                for b in buf.iter_mut() {
                    self.counter = self.counter.wrapping_add(1);
                    *b = mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)));
                }
                pos = 0;
            }
            let bits = buf[pos];
            pos += 1;
            *v = match fast_normal(t, bits) {
                Some(x) => x,
                None => {
                    self.counter = self.counter.wrapping_sub((BLOCK - pos) as u64);
                    pos = BLOCK;
                    self.normal_slow(bits)
                }
            };
        }
        self.counter = self.counter.wrapping_sub((BLOCK - pos) as u64);
    }
}

/// Uniform in [-1, 1) from the top 53 bits.
#[inline(always)]
fn uniform_pm1(bits: u64) -> f64 {
    (bits >> 11) as f64 * (2.0 / (1u64 << 53) as f64) - 1.0
}

#[inline(always)]
fn fast_normal(t: &ZigguratTables, bits: u64) -> Option<f64> {
    let layer = (bits & 0x7f) as usize;
    let u = uniform_pm1(bits);
    if u.abs() < t.ratio[layer] {
        Some(u * t.x[layer])
    } else {
        None
    }
}

const ZIG_LAYERS: usize = 128;
const ZIG_R: f64 = 3.442_619_855_899;
const ZIG_V: f64 = 9.912_563_035_262_17e-3;

struct ZigguratTables {
    x: [f64; ZIG_LAYERS + 1],
    ratio: [f64; ZIG_LAYERS],
}

fn tables() -> &'static ZigguratTables {
    static TABLES: OnceLock<ZigguratTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut x = [0.0; ZIG_LAYERS + 1];
        let mut f = (-0.5 * ZIG_R * ZIG_R).exp();
        x[0] = ZIG_V / f;
        x[1] = ZIG_R;
        for i in 2..ZIG_LAYERS {
            x[i] = (-2.0 * (ZIG_V / x[i - 1] + f).ln()).sqrt();
            f = (-0.5 * x[i] * x[i]).exp();
        }
        x[ZIG_LAYERS] = 0.0;
        let mut ratio = [0.0; ZIG_LAYERS];
        for i in 0..ZIG_LAYERS {
            ratio[i] = x[i + 1] / x[i];
        }
        ZigguratTables { x, ratio }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = CounterStream::new(5, domain::DICTIONARY, 9);
        let mut b = CounterStream::new(5, domain::DICTIONARY, 9);
        let mut c = CounterStream::new(5, domain::DICTIONARY, 10);
        let mut d = CounterStream::new(5, domain::SOURCE, 9);
        let xa: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        let xc: Vec<u64> = (0..16).map(|_| c.next_u64()).collect();
        let xd: Vec<u64> = (0..16).map(|_| d.next_u64()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
        assert_ne!(xa, xd);
    }

    #[test]
    fn open_uniform_stays_inside() {
        let mut s = CounterStream::new(1, 2, 3);
        for _ in 0..100_000 {
            let u = s.next_open01();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn fill_matches_single_draws() {
        for len in [0, 1, 15, 16, 17, 1000, 4099] {
            let mut a = CounterStream::new(7, domain::DICTIONARY, len as u64);
            let mut b = a.clone();
            let mut v = vec![0.0; len];
            a.fill_normal(&mut v);
            let w: Vec<f64> = (0..len).map(|_| b.next_normal()).collect();
            assert_eq!(v, w);
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn ziggurat_table_closes() {
        let t = tables();
        // the top layer ends at (nearly) zero width; x is decreasing
        assert!(t.x[ZIG_LAYERS - 1] > 0.0 && t.x[ZIG_LAYERS - 1] < 0.3);
        for w in t.x[1..].windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn normal_moments() {
        let mut s = CounterStream::new(42, domain::SOURCE, 0);
        let n = 400_000;
        let (mut m1, mut m2, mut m4, mut tail) = (0.0, 0.0, 0.0, 0usize);
        for _ in 0..n {
            let x = s.next_normal();
            m1 += x;
            m2 += x * x;
            m4 += x * x * x * x;
            if x.abs() > 3.0 {
                tail += 1;
            }
        }
        let nf = n as f64;
        assert!((m1 / nf).abs() < 0.01);
        assert!((m2 / nf - 1.0).abs() < 0.01);
        assert!((m4 / nf - 3.0).abs() < 0.08);
        // P(|X| > 3) = 0.0026998
        let p = tail as f64 / nf;
        assert!((p - 0.0027).abs() < 0.0004, "{p}");
    }
}
