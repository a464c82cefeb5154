//! Minimum-distance encoding by enumerating all `M^L` codewords.
//!
//! Only usable on tiny codes; it is the reference the greedy encoder is
//! checked against.

use crate::codec::{distortion, BetaIndices};
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::params::{coefficient_ladder, SparcParams};

pub const DEFAULT_EXHAUSTIVE_CAP: u128 = 1_000_000;

pub fn encode_exhaustive(
    p: &SparcParams,
    d: &Dictionary,
    s: &[f64],
) -> Result<(BetaIndices, f64)> {
    encode_exhaustive_capped(p, d, s, DEFAULT_EXHAUSTIVE_CAP)
}

/// Exhaustive search with an explicit cap on the number of codewords.
///
/// Codewords are visited in lexicographic index order and only a strictly
/// smaller distortion replaces the incumbent.
pub fn encode_exhaustive_capped(
    p: &SparcParams,
    d: &Dictionary,
    s: &[f64],
    cap: u128,
) -> Result<(BetaIndices, f64)> {
    super::check_dictionary(p, d)?;
    super::check_source(p, s)?;
    let size = (p.section_size() as u128)
        .checked_pow(p.sections() as u32)
        .unwrap_or(u128::MAX);
    if size > cap {
        return Err(Error::SearchSpaceTooLarge { size, cap });
    }
    let ladder = coefficient_ladder(p)?;
    let n = p.n();
    let m = p.section_size();
    let l = p.sections();

    // scaled columns c_i A_j, section-major
    let mut scaled = vec![0.0; n * p.total_columns()];
    for (j, col) in scaled.chunks_exact_mut(n).enumerate() {
        d.fill_column(j, col)?;
        let c = ladder[j / m];
        col.iter_mut().for_each(|v| *v *= c);
    }

    // partial[i] holds the reconstruction after sections 1..=i
    let mut partial = vec![vec![0.0; n]; l + 1];
    let mut choice = vec![0usize; l];
    let mut best = (Vec::new(), f64::INFINITY);
    let mut depth = 0;
    // iterative depth-first enumeration; choice[depth] is the next local
    // index to try at that depth
    loop {
        if choice[depth] == m {
            if depth == 0 {
                break;
            }
            choice[depth] = 0;
            depth -= 1;
            choice[depth] += 1;
            continue;
        }
        let j = depth * m + choice[depth];
        let col = &scaled[j * n..(j + 1) * n];
        let (head, tail) = partial.split_at_mut(depth + 1);
        for ((out, prev), a) in tail[0].iter_mut().zip(&head[depth]).zip(col) {
            *out = prev + a;
        }
        if depth + 1 == l {
            let dist = distortion(s, &partial[l])?;
            if dist < best.1 {
                best = (
                    choice.iter().enumerate().map(|(i, &v)| i * m + v).collect(),
                    dist,
                );
            }
            choice[depth] += 1;
        } else {
            depth += 1;
        }
    }
    Ok((BetaIndices::new(p, best.0)?, best.1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{decode, encode, SelectionRule};
    use crate::sources::{SourceKind, SourceSpec};

    #[test]
    fn cap_is_enforced() {
        let p = SparcParams::from_dims(64, 4, 64, 1.0, 0).unwrap();
        let d = Dictionary::new(&p);
        let s = vec![0.0; 64];
        assert!(matches!(
            encode_exhaustive(&p, &d, &s),
            Err(Error::SearchSpaceTooLarge { size: 16_777_216, .. })
        ));
        assert!(encode_exhaustive_capped(&p, &d, &s, 1 << 24).is_ok());
    }

    #[test]
    fn exhaustive_distortion_matches_decode() {
        let p = SparcParams::from_dims(12, 3, 5, 1.0, 4).unwrap();
        let d = Dictionary::new(&p);
        let s = SourceSpec::new(SourceKind::GaussianIid, 1.0, 8).generate(12).unwrap();
        let (idx, dist) = encode_exhaustive(&p, &d, &s).unwrap();
        let shat = decode(&p, &d, &idx).unwrap();
        assert!((distortion(&s, &shat).unwrap() - dist).abs() < 1e-12);
        let (_, trace) = encode(&p, &d, &s, SelectionRule::MinResidual).unwrap();
        assert!(dist <= trace.final_distortion() + 1e-12);
    }

    #[test]
    fn single_section_equals_min_residual() {
        let p = SparcParams::from_dims(16, 1, 32, 1.0, 0).unwrap();
        for seed in 0..100u64 {
            let d = Dictionary::new(&p.with_seed(seed));
            let s = SourceSpec::new(SourceKind::GaussianIid, 1.0, 1000 + seed)
                .generate(16)
                .unwrap();
            let (ei, ed) = encode_exhaustive(&p.with_seed(seed), &d, &s).unwrap();
            let (gi, gt) = encode(&p.with_seed(seed), &d, &s, SelectionRule::MinResidual).unwrap();
            assert_eq!(ei, gi);
            assert_eq!(ed.to_bits(), gt.final_distortion().to_bits());
        }
    }
}
