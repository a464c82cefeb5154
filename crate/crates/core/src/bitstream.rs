//! Compressed block format.
//!
//! ```text
//! offset size  field
//!      0    4  magic "SPRC"
//!      4    1  format version (1)
//!      5    1  dictionary scheme version
//!      6    4  n        u32 LE
//!     10    4  L        u32 LE
//!     14    4  M        u32 LE
//!     18    8  R (nats) f64 LE
//!     26    8  sigma^2  f64 LE
//!     34    8  seed     u64 LE
//!     42    .  payload: L fields of max(1, ceil(log2 M)) bits, MSB first,
//!              section order, zero-padded to a byte boundary
//! ```
//!
//! Fields hold section-local offsets `m_i - (i - 1) M`.

use crate::codec::BetaIndices;
use crate::error::{Error, Result};
use crate::params::{index_bits, SparcParams};
use crate::rng::SCHEME_VERSION;

pub const MAGIC: [u8; 4] = *b"SPRC";
pub const FORMAT_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 42;

/// One encoded block: parameters, seed and packed indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedBlock {
    pub format_version: u8,
    pub scheme_version: u8,
    pub n: u32,
    pub sections: u32,
    pub section_size: u32,
    pub rate_nats: f64,
    pub sigma2: f64,
    pub seed: u64,
    pub payload: Vec<u8>,
}

fn payload_len(sections: u64, width: u32) -> usize {
    (sections * width as u64).div_ceil(8) as usize
}

/// Packs a codeword. Indices must already be valid for `p`.
pub fn pack(p: &SparcParams, idx: &BetaIndices) -> Result<CompressedBlock> {
    let n = u32::try_from(p.n()).map_err(|_| Error::InvalidParams("n exceeds u32".into()))?;
    let sections =
        u32::try_from(p.sections()).map_err(|_| Error::InvalidParams("L exceeds u32".into()))?;
    let section_size = u32::try_from(p.section_size())
        .map_err(|_| Error::InvalidParams("M exceeds u32".into()))?;
    let idx = BetaIndices::new(p, idx.indices().to_vec())?;
    let width = p.index_bits();
    let mut writer = BitWriter::with_capacity(payload_len(sections as u64, width));
    for v in idx.local(p.section_size()) {
        writer.write(v, width);
    }
    Ok(CompressedBlock {
        format_version: FORMAT_VERSION,
        scheme_version: SCHEME_VERSION,
        n,
        sections,
        section_size,
        rate_nats: p.rate(),
        sigma2: p.sigma2(),
        seed: p.seed(),
        payload: writer.finish(),
    })
}

/// Recovers parameters and codeword, validating every field.
pub fn unpack(block: &CompressedBlock) -> Result<(SparcParams, BetaIndices)> {
    block.check_header()?;
    let params = block.params()?;
    let width = params.index_bits();
    let expected = payload_len(block.sections as u64, width);
    if block.payload.len() < expected {
        return Err(Error::TruncatedPayload {
            needed: expected,
            available: block.payload.len(),
        });
    }
    if block.payload.len() > expected {
        return Err(Error::CorruptPayload(format!(
            "payload has {} bytes, expected {expected}",
            block.payload.len()
        )));
    }
    let mut reader = BitReader::new(&block.payload);
    let mut local = Vec::with_capacity(block.sections as usize);
    for i in 0..block.sections {
        let v = reader.read(width);
        if v >= block.section_size as u64 {
            return Err(Error::CorruptPayload(format!(
                "section {} index {v} is not below M = {}",
                i + 1,
                block.section_size
            )));
        }
        local.push(v);
    }
    if reader.rest_nonzero() {
        return Err(Error::CorruptPayload("nonzero padding bits".into()));
    }
    let idx = BetaIndices::from_local(&params, &local)?;
    Ok((params, idx))
}

/// Realized index rate `L ceil(log2 M) / n` in bits per sample, header excluded.
pub fn compressed_rate(block: &CompressedBlock) -> f64 {
    block.sections as f64 * index_bits(block.section_size as u64) as f64 / block.n as f64
}

impl CompressedBlock {
    fn check_header(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                what: "format",
                version: self.format_version,
            });
        }
        if self.scheme_version != SCHEME_VERSION {
            return Err(Error::UnsupportedVersion {
                what: "dictionary scheme",
                version: self.scheme_version,
            });
        }
        Ok(())
    }

    /// Parameters described by the header.
    pub fn params(&self) -> Result<SparcParams> {
        let p = SparcParams::from_dims(
            self.n as usize,
            self.sections as usize,
            self.section_size as usize,
            self.sigma2,
            self.seed,
        )
        .map_err(|e| Error::InvalidHeader(e.to_string()))?;
        let tol = 1e-9 * p.rate().max(1.0);
        let diff = (self.rate_nats - p.rate()).abs();
        if diff.is_nan() || diff > tol {
            return Err(Error::InvalidHeader(format!(
                "stored rate {} does not match L ln M / n = {}",
                self.rate_nats,
                p.rate()
            )));
        }
        Ok(p)
    }

    /// Rate including the header, in bits per sample.
    pub fn rate_with_header(&self) -> f64 {
        ((HEADER_LEN + self.payload.len()) * 8) as f64 / self.n as f64
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.write_to(&mut out);
        out
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.push(self.format_version);
        out.push(self.scheme_version);
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(&self.sections.to_le_bytes());
        out.extend_from_slice(&self.section_size.to_le_bytes());
        out.extend_from_slice(&self.rate_nats.to_le_bytes());
        out.extend_from_slice(&self.sigma2.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.payload);
    }

    /// Parses one block from the front of `bytes`, returning it with the
    /// number of bytes consumed. Header fields are checked here; index
    /// ranges are checked by [`unpack`].
    pub fn parse(bytes: &[u8]) -> Result<(CompressedBlock, usize)> {
        if bytes.len() < HEADER_LEN {
            if bytes.len() >= 4 && bytes[..4] != MAGIC {
                return Err(Error::BadMagic);
            }
            return Err(Error::TruncatedPayload {
                needed: HEADER_LEN,
                available: bytes.len(),
            });
        }
        if bytes[..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().expect("8 bytes"));
        let mut block = CompressedBlock {
            format_version: bytes[4],
            scheme_version: bytes[5],
            n: u32_at(6),
            sections: u32_at(10),
            section_size: u32_at(14),
            rate_nats: f64::from_bits(u64_at(18)),
            sigma2: f64::from_bits(u64_at(26)),
            seed: u64_at(34),
            payload: Vec::new(),
        };
        block.check_header()?;
        let params = block.params()?;
        let len = payload_len(block.sections as u64, params.index_bits());
        let available = bytes.len() - HEADER_LEN;
        if available < len {
            return Err(Error::TruncatedPayload {
                needed: len,
                available,
            });
        }
        block.payload = bytes[HEADER_LEN..HEADER_LEN + len].to_vec();
        Ok((block, HEADER_LEN + len))
    }

    /// Parses a buffer holding exactly one block.
    pub fn from_bytes(bytes: &[u8]) -> Result<CompressedBlock> {
        let (block, used) = Self::parse(bytes)?;
        if used != bytes.len() {
            return Err(Error::CorruptPayload(format!(
                "{} trailing bytes after block",
                bytes.len() - used
            )));
        }
        Ok(block)
    }
}

struct BitWriter {
    out: Vec<u8>,
    acc: u64,
    bits: u32,
}

impl BitWriter {
    fn with_capacity(n: usize) -> Self {
        BitWriter {
            out: Vec::with_capacity(n),
            acc: 0,
            bits: 0,
        }
    }

    // width <= 32 since M fits in u32
    fn write(&mut self, value: u64, width: u32) {
        self.acc = (self.acc << width) | (value & ((1u64 << width) - 1));
        self.bits += width;
        while self.bits >= 8 {
            self.bits -= 8;
            self.out.push((self.acc >> self.bits) as u8);
        }
        self.acc &= (1u64 << self.bits) - 1;
    }

    fn finish(mut self) -> Vec<u8> {
        if self.bits > 0 {
            self.out.push((self.acc << (8 - self.bits)) as u8);
        }
        self.out
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        BitReader { bytes, pos: 0 }
    }

    fn bit(&self, at: usize) -> u64 {
        ((self.bytes[at / 8] >> (7 - at % 8)) & 1) as u64
    }

    fn read(&mut self, width: u32) -> u64 {
        let mut v = 0;
        for _ in 0..width {
            v = (v << 1) | self.bit(self.pos);
            self.pos += 1;
        }
        v
    }

    fn rest_nonzero(&self) -> bool {
        (self.pos..self.bytes.len() * 8).any(|at| self.bit(at) != 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(n: usize, l: usize, m: usize) -> SparcParams {
        SparcParams::from_dims(n, l, m, 1.0, 0xdead_beef).unwrap()
    }

    #[test]
    fn hand_packed_example() {
        let p = params(16, 2, 4);
        let idx = BetaIndices::from_local(&p, &[3, 1]).unwrap();
        let block = pack(&p, &idx).unwrap();
        assert_eq!(block.payload, vec![0xD0]);
        let bytes = block.to_bytes();
        assert_eq!(bytes.len(), HEADER_LEN + 1);
        assert_eq!(&bytes[..4], b"SPRC");
        assert_eq!(bytes[4], 1);
        assert_eq!(bytes[5], SCHEME_VERSION);
        assert_eq!(&bytes[6..10], &16u32.to_le_bytes());
        assert_eq!(&bytes[34..42], &0xdead_beefu64.to_le_bytes());
    }

    #[test]
    fn single_column_sections_use_one_bit() {
        let p = params(4, 3, 1);
        let idx = BetaIndices::from_local(&p, &[0, 0, 0]).unwrap();
        let block = pack(&p, &idx).unwrap();
        assert_eq!(block.payload, vec![0]);
        let (_, back) = unpack(&block).unwrap();
        assert_eq!(back, idx);
    }

    #[test]
    fn rate_accounting() {
        let p = SparcParams::from_dims(705, 46, 97_336, 1.0, 0).unwrap();
        let idx = BetaIndices::from_local(&p, &vec![0; 46]).unwrap();
        let block = pack(&p, &idx).unwrap();
        assert!((compressed_rate(&block) - 46.0 * 17.0 / 705.0).abs() < 1e-15);
        assert!(compressed_rate(&block) >= p.rate_bits());
        assert!(block.rate_with_header() > compressed_rate(&block));

        let p = SparcParams::from_dims(1, 1, 2, 1.0, 0).unwrap();
        let block = pack(&p, &BetaIndices::from_local(&p, &[1]).unwrap()).unwrap();
        assert_eq!(compressed_rate(&block), 1.0);
        assert_eq!(block.payload, vec![0x80]);
    }

    #[test]
    fn parse_errors() {
        let p = params(16, 2, 4);
        let good = pack(&p, &BetaIndices::from_local(&p, &[3, 1]).unwrap())
            .unwrap()
            .to_bytes();

        let mut bad = good.clone();
        bad[0] ^= 0xff;
        assert_eq!(CompressedBlock::from_bytes(&bad), Err(Error::BadMagic));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(
            CompressedBlock::from_bytes(&bad),
            Err(Error::UnsupportedVersion { what: "format", version: 2 })
        ));
        let mut bad = good.clone();
        bad[5] = 9;
        assert!(matches!(
            CompressedBlock::from_bytes(&bad),
            Err(Error::UnsupportedVersion { what: "dictionary scheme", .. })
        ));

        assert!(matches!(
            CompressedBlock::from_bytes(&good[..good.len() - 1]),
            Err(Error::TruncatedPayload { needed: 1, available: 0 })
        ));
        assert!(matches!(
            CompressedBlock::from_bytes(&good[..10]),
            Err(Error::TruncatedPayload { .. })
        ));

        let mut bad = good.clone();
        bad[18..26].copy_from_slice(&5.0f64.to_le_bytes());
        assert!(matches!(CompressedBlock::from_bytes(&bad), Err(Error::InvalidHeader(_))));

        let mut bad = good.clone();
        bad[6..10].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(CompressedBlock::from_bytes(&bad), Err(Error::InvalidHeader(_))));

        let mut extra = good.clone();
        extra.push(0);
        assert!(matches!(CompressedBlock::from_bytes(&extra), Err(Error::CorruptPayload(_))));
    }

    #[test]
    fn corrupt_indices_and_padding() {
        let p = params(16, 2, 3);
        let mut block = pack(&p, &BetaIndices::from_local(&p, &[2, 1]).unwrap()).unwrap();
        assert_eq!(block.payload, vec![0b1001_0000]);
        block.payload = vec![0b1101_0000];
        assert!(matches!(unpack(&block), Err(Error::CorruptPayload(_))));
        block.payload = vec![0b1001_0001];
        assert!(matches!(unpack(&block), Err(Error::CorruptPayload(_))));
        block.payload = vec![];
        assert!(matches!(unpack(&block), Err(Error::TruncatedPayload { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn pack_unpack_roundtrip(
            l in 1usize..40,
            m in 1usize..5_000_000,
            n_extra in 0usize..500,
            sigma2 in 0.01f64..100.0,
            seed in any::<u64>(),
            raw in proptest::collection::vec(any::<u64>(), 40),
        ) {
            let n = (2.0 * l as f64 * (m as f64).ln() / l as f64).ceil() as usize + 1 + n_extra;
            let p = SparcParams::from_dims(n, l, m, sigma2, seed).unwrap();
            let local: Vec<u64> = raw[..l].iter().map(|v| v % m as u64).collect();
            let idx = BetaIndices::from_local(&p, &local).unwrap();
            let block = pack(&p, &idx).unwrap();
            prop_assert_eq!(block.payload.len(), (l * p.index_bits() as usize).div_ceil(8));
            let bytes = block.to_bytes();
            let parsed = CompressedBlock::from_bytes(&bytes).unwrap();
            prop_assert_eq!(&parsed, &block);
            let (q, back) = unpack(&parsed).unwrap();
            prop_assert_eq!(back, idx);
            prop_assert!(q.same_code(&p));
        }
    }
}
