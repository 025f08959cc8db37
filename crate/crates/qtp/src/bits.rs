//! Bit payloads.

use std::fmt;

/// An ordered sequence of bits. Payloads produced by ASCII encoding are
/// always a multiple of 8 bits long.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            bits: Vec::with_capacity(n),
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Big-endian bit expansion of each byte (most-significant bit first).
    pub fn from_bytes(bytes: &[u8]) -> Self {
        let mut bits = Vec::with_capacity(bytes.len() * 8);
        for &byte in bytes {
            for shift in (0..8).rev() {
                bits.push((byte >> shift) & 1 == 1);
            }
        }
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.bits.get(i).copied()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.bits
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.bits.iter().copied()
    }

    /// Number of positions where `self` and `other` differ. Both bit
    /// strings must have the same length.
    pub fn diff_count(&self, other: &BitString) -> Option<usize> {
        if self.len() != other.len() {
            return None;
        }
        Some(
            self.bits
                .iter()
                .zip(&other.bits)
                .filter(|(a, b)| a != b)
                .count(),
        )
    }

    /// Hex rendering for transcripts. The final partial byte, if any, is
    /// padded with zero bits on the right.
    pub fn to_hex(&self) -> String {
        let mut out = String::with_capacity(self.bits.len().div_ceil(4));
        for chunk in self.bits.chunks(4) {
            let mut nibble = 0u8;
            for (i, &bit) in chunk.iter().enumerate() {
                if bit {
                    nibble |= 1 << (3 - i);
                }
            }
            out.push(char::from_digit(u32::from(nibble), 16).unwrap());
        }
        out
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &bit in &self.bits {
            write!(f, "{}", u8::from(bit))?;
        }
        Ok(())
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Self {
            bits: iter.into_iter().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_expansion_is_msb_first() {
        let bits = BitString::from_bytes(&[0b0100_1000]);
        assert_eq!(bits.to_string(), "01001000");
    }

    #[test]
    fn hex_rendering() {
        let bits = BitString::from_bytes(&[0x48, 0x69]);
        assert_eq!(bits.to_hex(), "4869");
    }

    #[test]
    fn diff_count_requires_equal_lengths() {
        let a = BitString::from_bytes(&[0xff]);
        let b = BitString::from_bytes(&[0x0f]);
        assert_eq!(a.diff_count(&b), Some(4));
        let short = BitString::from_bits(vec![true]);
        assert_eq!(a.diff_count(&short), None);
    }
}
