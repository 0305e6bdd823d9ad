//! Block interleaver for one BPSK OFDM symbol (N_CBPS = 48).
//!
//! Coded bit k is transmitted at position i = 3·(k mod 16) + ⌊k/16⌋.

use super::CodecError;

const N_CBPS: usize = 48;

#[inline]
pub fn interleave_index(k: usize) -> usize {
    3 * (k % 16) + k / 16
}

pub fn interleave48(bits: &[u8]) -> Result<Vec<u8>, CodecError> {
    if bits.len() != N_CBPS {
        return Err(CodecError::BadInterleaveLength(bits.len()));
    }
    let mut out = vec![0u8; N_CBPS];
    for (k, &b) in bits.iter().enumerate() {
        out[interleave_index(k)] = b;
    }
    Ok(out)
}

pub fn deinterleave48(bits: &[u8]) -> Result<Vec<u8>, CodecError> {
    if bits.len() != N_CBPS {
        return Err(CodecError::BadInterleaveLength(bits.len()));
    }
    let mut out = vec![0u8; N_CBPS];
    for k in 0..N_CBPS {
        out[k] = bits[interleave_index(k)];
    }
    Ok(out)
}

/// Deinterleave soft values by the same permutation.
pub fn deinterleave48_soft(vals: &[f64]) -> Result<Vec<f64>, CodecError> {
    if vals.len() != N_CBPS {
        return Err(CodecError::BadInterleaveLength(vals.len()));
    }
    let mut out = vec![0.0; N_CBPS];
    for k in 0..N_CBPS {
        out[k] = vals[interleave_index(k)];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn formula_fixed_points() {
        assert_eq!(interleave_index(0), 0);
        assert_eq!(interleave_index(17), 4);
    }

    #[test]
    fn permutation_is_bijective_and_inverts() {
        let mut seen = [false; 48];
        for k in 0..48 {
            let i = interleave_index(k);
            assert!(!seen[i]);
            seen[i] = true;
        }
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(1);
        for _ in 0..100 {
            let bits: Vec<u8> = (0..48).map(|_| rng.random_range(0..2u8)).collect();
            let through = deinterleave48(&interleave48(&bits).unwrap()).unwrap();
            assert_eq!(through, bits);
        }
    }

    #[test]
    fn wrong_length_rejected() {
        assert!(interleave48(&[0u8; 47]).is_err());
        assert!(deinterleave48(&[0u8; 49]).is_err());
    }
}
