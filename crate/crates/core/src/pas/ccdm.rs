//! Constant-composition distribution matching by exact lexicographic
//! ranking of multiset permutations.
//!
//! The payload, read as an integer `k < 2^floor(log2 C)` where `C` is the
//! multinomial coefficient of the composition, selects the `k`-th sequence
//! in lexicographic order. Decoding ranks the sequence back.

use num_bigint::BigUint;
use std::ops::{Add, Div, Mul, Sub};

use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::entropy_bits;

/// Number of occurrences of every amplitude level in a block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Composition {
    counts: Vec<usize>,
}

impl Composition {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Matcher("composition needs at least one level".into()));
        }
        if counts.iter().sum::<usize>() == 0 {
            return Err(Error::Matcher("composition of an empty block".into()));
        }
        Ok(Self { counts })
    }

    /// Composition of length `u` closest to `probs`: floors of `u p` with the
    /// remainder handed to the largest fractional parts.
    pub fn from_probs(probs: &[f64], u: usize) -> Result<Self> {
        if u == 0 || probs.is_empty() || probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Matcher("need a positive block length and probabilities".into()));
        }
        let total: f64 = probs.iter().sum();
        let scaled: Vec<f64> = probs.iter().map(|p| p / total * u as f64).collect();
        let mut counts: Vec<usize> = scaled.iter().map(|s| s.floor() as usize).collect();
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|&a, &b| {
            let fa = scaled[a] - scaled[a].floor();
            let fb = scaled[b] - scaled[b].floor();
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        let missing = u - counts.iter().sum::<usize>();
        for &i in order.iter().take(missing) {
            counts[i] += 1;
        }
        Self::new(counts)
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn levels(&self) -> usize {
        self.counts.len()
    }

    pub fn block_len(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn probs(&self) -> Vec<f64> {
        let u = self.block_len() as f64;
        self.counts.iter().map(|&c| c as f64 / u).collect()
    }

    /// Multinomial coefficient `U! / prod n_i!`.
    pub fn num_sequences(&self) -> BigUint {
        let mut acc = BigUint::one();
        let mut placed = 0u64;
        for &c in &self.counts {
            for k in 1..=c as u64 {
                placed += 1;
                acc = acc * placed / k;
            }
        }
        acc
    }

    /// Payload length `floor(log2 C)` in bits.
    pub fn payload_bits(&self) -> usize {
        (self.num_sequences().bits() as usize).saturating_sub(1)
    }

    /// Matcher rate in bits per amplitude.
    pub fn rate(&self) -> f64 {
        self.payload_bits() as f64 / self.block_len() as f64
    }

    /// Entropy of the empirical amplitude distribution in bits.
    pub fn entropy_bits(&self) -> f64 {
        entropy_bits(&self.probs())
    }
}

/// Integer type able to hold sequence counts: `u128` when it cannot
/// overflow, `BigUint` otherwise.
trait Count:
    Clone + PartialOrd + Zero + One + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn from_usize(v: usize) -> Self;
}

impl Count for u128 {
    fn from_usize(v: usize) -> Self {
        v as u128
    }
}

impl Count for BigUint {
    fn from_usize(v: usize) -> Self {
        BigUint::from(v)
    }
}

fn bits_to_int<T: Count>(bits: &[u8]) -> T {
    let two = T::from_usize(2);
    bits.iter().fold(T::zero(), |acc, &b| acc * two.clone() + T::from_usize(usize::from(b & 1)))
}

fn int_to_bits(v: BigUint, len: usize) -> Vec<u8> {
    (0..len).rev().map(|k| u8::from(v.bit(k as u64))).collect()
}

fn unrank<T: Count>(counts: &[usize], mut index: T, mut total: T) -> Vec<usize> {
    let mut left = counts.to_vec();
    let mut rem: usize = counts.iter().sum();
    let mut out = Vec::with_capacity(rem);
    while rem > 0 {
        let r = T::from_usize(rem);
        let mut chosen = None;
        for (s, &n) in left.iter().enumerate() {
            if n == 0 {
                continue;
            }
            // sequences starting with s
            let with_s = total.clone() * T::from_usize(n) / r.clone();
            if index < with_s {
                chosen = Some((s, with_s));
                break;
            }
            index = index - with_s;
        }
        let (s, with_s) = chosen.expect("index below the multinomial count");
        out.push(s);
        left[s] -= 1;
        rem -= 1;
        total = with_s;
    }
    out
}

fn rank<T: Count>(counts: &[usize], seq: &[usize], mut total: T) -> T {
    let mut index = T::zero();
    let mut left = counts.to_vec();
    let mut rem = seq.len();
    for &s in seq {
        let r = T::from_usize(rem);
        for &n in left[..s].iter().filter(|&&n| n > 0) {
            index = index + total.clone() * T::from_usize(n) / r.clone();
        }
        total = total * T::from_usize(left[s]) / r;
        left[s] -= 1;
        rem -= 1;
    }
    index
}

/// Whether `total * U` fits in a `u128`.
fn fits_u128(total: &BigUint, u: usize) -> bool {
    total.bits() + u64::from(usize::BITS - u.leading_zeros()) < 128
}

/// Maps `payload_bits()` bits to an amplitude-index sequence of the composition.
pub fn ccdm_encode(bits: &[u8], comp: &Composition) -> Result<Vec<usize>> {
    let k = comp.payload_bits();
    if bits.len() != k {
        return Err(Error::Matcher(format!("payload of {} bits, composition carries {k}", bits.len())));
    }
    let total = comp.num_sequences();
    Ok(if fits_u128(&total, comp.block_len()) {
        let t = total.to_u128().expect("checked width");
        unrank::<u128>(&comp.counts, bits_to_int(bits), t)
    } else {
        unrank::<BigUint>(&comp.counts, bits_to_int(bits), total)
    })
}

/// Inverse of [`ccdm_encode`].
pub fn ccdm_decode(seq: &[usize], comp: &Composition) -> Result<Vec<u8>> {
    let mut seen = vec![0usize; comp.levels()];
    for &s in seq {
        if s >= comp.levels() {
            return Err(Error::Matcher(format!("amplitude index {s} outside {} levels", comp.levels())));
        }
        seen[s] += 1;
    }
    if seen != comp.counts {
        return Err(Error::Matcher("sequence does not match the composition".into()));
    }
    let total = comp.num_sequences();
    let index = if fits_u128(&total, comp.block_len()) {
        BigUint::from(rank::<u128>(&comp.counts, seq, total.to_u128().expect("checked width")))
    } else {
        rank::<BigUint>(&comp.counts, seq, total)
    };
    let k = comp.payload_bits();
    if index.bits() as usize > k {
        return Err(Error::Matcher("sequence lies outside the addressed range".into()));
    }
    Ok(int_to_bits(index, k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn small_composition_counts() {
        let c = Composition::new(vec![2, 0, 2, 0]).unwrap();
        assert_eq!(c.num_sequences(), BigUint::from(6u32));
        assert_eq!(c.payload_bits(), 2);
        let mut seen = HashSet::new();
        for v in 0..4u8 {
            let bits = vec![v >> 1 & 1, v & 1];
            let s = ccdm_encode(&bits, &c).unwrap();
            assert_eq!(s.iter().filter(|&&a| a == 0).count(), 2);
            assert!(seen.insert(s.clone()));
            assert_eq!(ccdm_decode(&s, &c).unwrap(), bits);
        }
    }

    #[test]
    fn first_and_last_payloads() {
        let c = Composition::new(vec![3, 2, 1]).unwrap();
        // 60 sequences, 5 bits
        assert_eq!(c.payload_bits(), 5);
        assert_eq!(ccdm_encode(&[0; 5], &c).unwrap(), vec![0, 0, 0, 1, 1, 2]);
        let top = ccdm_encode(&[1; 5], &c).unwrap();
        assert_eq!(ccdm_decode(&top, &c).unwrap(), vec![1; 5]);
    }

    #[test]
    fn ranks_are_lexicographic() {
        // exhaustive oracle: sort every permutation of the multiset
        let c = Composition::new(vec![2, 1, 2]).unwrap();
        let mut all = HashSet::new();
        let base = [0usize, 0, 1, 2, 2];
        let mut idx: Vec<usize> = (0..5).collect();
        permute(&mut idx, 0, &mut |p| {
            all.insert(p.iter().map(|&i| base[i]).collect::<Vec<_>>());
        });
        let mut sorted: Vec<_> = all.into_iter().collect();
        sorted.sort();
        assert_eq!(sorted.len(), 30);
        for (k, seq) in sorted.iter().take(1 << c.payload_bits()).enumerate() {
            let bits = int_to_bits(BigUint::from(k), c.payload_bits());
            assert_eq!(bits_to_int::<u128>(&bits), k as u128);
            assert_eq!(&ccdm_encode(&bits, &c).unwrap(), seq);
        }
    }

    fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == v.len() {
            f(v);
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permute(v, k + 1, f);
            v.swap(k, i);
        }
    }

    #[test]
    fn from_probs_sums_to_block() {
        let c = Composition::from_probs(&[0.1, 0.2, 0.3, 0.4], 37).unwrap();
        assert_eq!(c.block_len(), 37);
        assert_eq!(c.counts(), &[4, 7, 11, 15]);
    }

    #[test]
    fn wide_and_narrow_paths_agree() {
        let c = Composition::new(vec![12, 10, 8, 6]).unwrap();
        assert!(fits_u128(&c.num_sequences(), 36));
        let bits: Vec<u8> = (0..c.payload_bits()).map(|k| ((k * 7 + 3) % 5 % 2) as u8).collect();
        let total = c.num_sequences();
        let wide = unrank::<BigUint>(&c.counts, bits_to_int(&bits), total.clone());
        let narrow = unrank::<u128>(&c.counts, bits_to_int(&bits), total.to_u128().unwrap());
        assert_eq!(wide, narrow);
        assert_eq!(BigUint::from(rank::<u128>(&c.counts, &wide, total.to_u128().unwrap())), rank::<BigUint>(&c.counts, &wide, total));
        // a block too long for u128 still round trips
        let big = Composition::from_probs(&[0.4, 0.3, 0.2, 0.1], 200).unwrap();
        assert!(!fits_u128(&big.num_sequences(), 200));
        let bits: Vec<u8> = (0..big.payload_bits()).map(|k| (k % 3 == 0) as u8).collect();
        let seq = ccdm_encode(&bits, &big).unwrap();
        assert_eq!(ccdm_decode(&seq, &big).unwrap(), bits);
    }

    #[test]
    fn rejects_bad_inputs() {
        let c = Composition::new(vec![2, 2]).unwrap();
        assert!(ccdm_encode(&[0], &c).is_err());
        assert!(ccdm_decode(&[0, 0, 0, 1], &c).is_err());
        assert!(ccdm_decode(&[0, 0, 1, 5], &c).is_err());
        assert!(Composition::new(vec![0, 0]).is_err());
    }

    #[test]
    fn decode_rejects_unaddressed_sequence() {
        // 6 sequences, only the first 4 are reachable
        let c = Composition::new(vec![2, 2]).unwrap();
        assert!(ccdm_decode(&[1, 1, 0, 0], &c).is_err());
    }
}
