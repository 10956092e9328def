//! Stand-in systematic linear code: parity from a seeded dense random
//! generator matrix. Only the encoder side is modeled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Parity part `P` of a systematic generator `[I | P]` over GF(2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystematicCode {
    k: usize,
    rows: Vec<Vec<u64>>,
}

impl SystematicCode {
    /// Code with `k` information bits and `r` parity bits.
    pub fn new(k: usize, r: usize, seed: u64) -> Self {
        let words = k.div_ceil(64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..r)
            .map(|_| {
                let mut row: Vec<u64> = (0..words).map(|_| rng.random()).collect();
                if k % 64 != 0 {
                    if let Some(last) = row.last_mut() {
                        *last &= (1u64 << (k % 64)) - 1;
                    }
                }
                row
            })
            .collect();
        Self { k, rows }
    }

    pub fn info_len(&self) -> usize {
        self.k
    }

    pub fn parity_len(&self) -> usize {
        self.rows.len()
    }

    pub fn rate(&self) -> f64 {
        self.k as f64 / (self.k + self.rows.len()) as f64
    }
}

/// Parity bits of `bits` under `code`.
pub fn systematic_parity(bits: &[u8], code: &SystematicCode) -> Result<Vec<u8>> {
    if bits.len() != code.k {
        return Err(Error::LengthMismatch {
            expected: code.k,
            got: bits.len(),
        });
    }
    let mut packed = vec![0u64; code.k.div_ceil(64)];
    for (i, &b) in bits.iter().enumerate() {
        packed[i / 64] |= u64::from(b & 1) << (i % 64);
    }
    Ok(code
        .rows
        .iter()
        .map(|row| {
            let ones: u32 = row.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            (ones & 1) as u8
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
        (0..n).map(|_| rng.random_range(0..2u8)).collect()
    }

    #[test]
    fn zero_in_zero_out() {
        let code = SystematicCode::new(100, 30, 1);
        assert!(systematic_parity(&[0; 100], &code).unwrap().iter().all(|&b| b == 0));
    }

    #[test]
    fn linear() {
        let code = SystematicCode::new(130, 70, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a = random_bits(&mut rng, 130);
            let b = random_bits(&mut rng, 130);
            let x: Vec<u8> = a.iter().zip(&b).map(|(p, q)| p ^ q).collect();
            let pa = systematic_parity(&a, &code).unwrap();
            let pb = systematic_parity(&b, &code).unwrap();
            let px = systematic_parity(&x, &code).unwrap();
            assert!(pa.iter().zip(&pb).zip(&px).all(|((p, q), r)| p ^ q == *r));
        }
    }

    #[test]
    fn parity_is_balanced() {
        let code = SystematicCode::new(200, 64, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ones = 0usize;
        let trials = 500;
        for _ in 0..trials {
            ones += systematic_parity(&random_bits(&mut rng, 200), &code)
                .unwrap()
                .iter()
                .map(|&b| b as usize)
                .sum::<usize>();
        }
        let n = (trials * 64) as f64;
        assert!((ones as f64 / n - 0.5).abs() < 3.0 * (0.25 / n).sqrt());
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(systematic_parity(&[0; 5], &SystematicCode::new(6, 2, 0)).is_err());
    }
}
