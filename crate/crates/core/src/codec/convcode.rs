//! Rate-1/2, constraint-length-7 convolutional code with the standard
//! generator pair (octal 133, 171) and a soft-input Viterbi decoder.

use super::CodecError;

const K: usize = 7;
const NUM_STATES: usize = 1 << (K - 1);
const G0: u32 = 0o133;
const G1: u32 = 0o171;

#[inline]
fn parity(v: u32) -> u8 {
    (v.count_ones() & 1) as u8
}

/// Encode `bits` at rate 1/2. Output length is `2 * bits.len()`; the
/// encoder starts in the all-zero state. Appending six zero tail bits to
/// the message terminates the trellis.
pub fn conv_encode(bits: &[u8]) -> Vec<u8> {
    // full register: bit K-1 is the current input, bit 0 the oldest.
    let mut state: u32 = 0;
    let mut out = Vec::with_capacity(bits.len() * 2);
    for &b in bits {
        let full = ((b as u32 & 1) << (K - 1)) | state;
        out.push(parity(full & G0));
        out.push(parity(full & G1));
        state = full >> 1;
    }
    out
}

/// Maximum-likelihood Viterbi decoding of soft inputs.
///
/// `llr[i] > 0` means coded bit `i` is more likely a one. Hard decisions
/// can be passed as ±1. When `terminated` is set the survivor ending in
/// the all-zero state is chosen (valid whenever the message carries six
/// zero tail bits); otherwise the best end state wins.
pub fn viterbi_decode_soft(llr: &[f64], terminated: bool) -> Result<Vec<u8>, CodecError> {
    if llr.len() % 2 != 0 {
        return Err(CodecError::OddCodedLength(llr.len()));
    }
    let n = llr.len() / 2;

    // Transition tables: from state s with input b.
    let mut out_a = [[0u8; 2]; NUM_STATES];
    let mut out_b = [[0u8; 2]; NUM_STATES];
    let mut next_state = [[0usize; 2]; NUM_STATES];
    for s in 0..NUM_STATES {
        for b in 0..2usize {
            let full = ((b as u32) << (K - 1)) | s as u32;
            out_a[s][b] = parity(full & G0);
            out_b[s][b] = parity(full & G1);
            next_state[s][b] = (full >> 1) as usize;
        }
    }

    let mut metrics = vec![f64::NEG_INFINITY; NUM_STATES];
    metrics[0] = 0.0;
    let mut next = vec![f64::NEG_INFINITY; NUM_STATES];
    // Survivor bookkeeping: predecessor state and input bit per (t, state).
    let mut prev_state = vec![[0u8; NUM_STATES]; n];
    let mut prev_bit = vec![[0u8; NUM_STATES]; n];

    for t in 0..n {
        let la = llr[2 * t];
        let lb = llr[2 * t + 1];
        for v in next.iter_mut() {
            *v = f64::NEG_INFINITY;
        }
        for s in 0..NUM_STATES {
            let m = metrics[s];
            if m == f64::NEG_INFINITY {
                continue;
            }
            for b in 0..2usize {
                let branch = (if out_a[s][b] == 1 { la } else { -la })
                    + (if out_b[s][b] == 1 { lb } else { -lb });
                let ns = next_state[s][b];
                let cand = m + branch;
                if cand > next[ns] {
                    next[ns] = cand;
                    prev_state[t][ns] = s as u8;
                    prev_bit[t][ns] = b as u8;
                }
            }
        }
        std::mem::swap(&mut metrics, &mut next);
    }

    let mut state = if terminated && metrics[0] > f64::NEG_INFINITY {
        0usize
    } else {
        metrics
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(s, _)| s)
            .unwrap_or(0)
    };
    let mut bits = vec![0u8; n];
    for t in (0..n).rev() {
        bits[t] = prev_bit[t][state];
        state = prev_state[t][state] as usize;
    }
    Ok(bits)
}

/// Hard-decision convenience wrapper: coded bits in {0,1}.
pub fn viterbi_decode(coded: &[u8], terminated: bool) -> Result<Vec<u8>, CodecError> {
    let llr: Vec<f64> = coded.iter().map(|&b| if b & 1 == 1 { 1.0 } else { -1.0 }).collect();
    viterbi_decode_soft(&llr, terminated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Exhaustive ML oracle: tries every message of length `n` (with the
    /// last 6 bits forced to zero) and picks the one whose encoding is
    /// closest to the received word.
    fn exhaustive_ml(coded: &[u8], n: usize) -> Vec<u8> {
        let info = n - 6;
        let mut best = (i32::MIN, vec![]);
        for m in 0..(1u32 << info) {
            let mut bits: Vec<u8> = (0..info).map(|i| ((m >> i) & 1) as u8).collect();
            bits.extend_from_slice(&[0; 6]);
            let enc = conv_encode(&bits);
            let score: i32 = enc
                .iter()
                .zip(coded)
                .map(|(&a, &b)| if a == b { 1 } else { -1 })
                .sum();
            if score > best.0 {
                best = (score, bits);
            }
        }
        best.1
    }

    #[test]
    fn lsig_expands_to_48_coded_bits() {
        let bits = vec![1u8; 18].into_iter().chain(vec![0u8; 6]).collect::<Vec<_>>();
        assert_eq!(conv_encode(&bits).len(), 48);
    }

    #[test]
    fn all_zero_round_trip() {
        let bits = vec![0u8; 24];
        let coded = conv_encode(&bits);
        assert!(coded.iter().all(|&b| b == 0));
        assert_eq!(viterbi_decode(&coded, true).unwrap(), bits);
    }

    #[test]
    fn corrects_up_to_two_flips() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let mut bits: Vec<u8> = (0..18).map(|_| rng.random_range(0..2u8)).collect();
            bits.extend_from_slice(&[0; 6]);
            let mut coded = conv_encode(&bits);
            let flips = rng.random_range(0..=2usize);
            for _ in 0..flips {
                let i = rng.random_range(0..coded.len());
                coded[i] ^= 1;
            }
            assert_eq!(viterbi_decode(&coded, true).unwrap(), bits);
        }
    }

    #[test]
    fn matches_exhaustive_trellis_oracle_on_short_words() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(33);
        for _ in 0..50 {
            let n = 14; // 8 info + 6 tail
            let mut bits: Vec<u8> = (0..8).map(|_| rng.random_range(0..2u8)).collect();
            bits.extend_from_slice(&[0; 6]);
            let mut coded = conv_encode(&bits);
            // Heavier corruption: decoder and oracle must still agree.
            for _ in 0..4 {
                let i = rng.random_range(0..coded.len());
                coded[i] ^= 1;
            }
            let oracle = exhaustive_ml(&coded, n);
            let dec = viterbi_decode(&coded, true).unwrap();
            // Both are ML; metrics can tie, so compare achieved scores.
            let score = |b: &[u8]| -> i32 {
                conv_encode(b)
                    .iter()
                    .zip(&coded)
                    .map(|(&a, &c)| if a == c { 1 } else { -1 })
                    .sum()
            };
            assert_eq!(score(&dec), score(&oracle));
        }
    }

    #[test]
    fn odd_length_rejected() {
        assert!(viterbi_decode(&[1, 0, 1], true).is_err());
    }
}
