//! Small bit-packing helpers. Fields are packed LSB-first throughout the
//! crate: bit index 0 of a field is its least significant bit.

/// Unpack the low `n` bits of `v`, LSB first.
pub fn unpack_lsb(v: u32, n: usize) -> Vec<u8> {
    (0..n).map(|i| ((v >> i) & 1) as u8).collect()
}

/// Pack bits (LSB first) into an integer.
pub fn pack_lsb(bits: &[u8]) -> u32 {
    bits.iter().enumerate().fold(0u32, |acc, (i, &b)| acc | ((b as u32 & 1) << i))
}

/// Even parity over a bit slice.
pub fn even_parity(bits: &[u8]) -> u8 {
    bits.iter().fold(0u8, |acc, &b| acc ^ (b & 1))
}

/// 802.11 frame-synchronous scrambler / pilot-polarity generator,
/// x^7 + x^4 + 1.
pub struct Scrambler {
    state: u8,
}

impl Scrambler {
    pub fn new(seed: u8) -> Self {
        Self { state: seed & 0x7f }
    }

    pub fn next_bit(&mut self) -> u8 {
        let out = ((self.state >> 6) ^ (self.state >> 3)) & 1;
        self.state = ((self.state << 1) | out) & 0x7f;
        out
    }
}
