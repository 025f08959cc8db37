//! ASCII pre-encoding, symbol framing, segmentation, and display
//! normalization.
//!
//! Bit order is frozen for reproducible transcripts: 8 bits per character
//! most-significant bit first, and each protocol use packs z before x.

use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::CodecError;
use crate::quantum::SymbolPair;
use crate::text::TextStage;

/// Encode ASCII text as 8 bits per character, MSB first.
///
/// Characters above code point 127 are rejected with their 1-based
/// position.
pub fn ascii_encode(text: &str) -> Result<BitString, CodecError> {
    let mut bytes = Vec::with_capacity(text.len());
    for (i, ch) in text.chars().enumerate() {
        if !ch.is_ascii() {
            return Err(CodecError::NonAscii {
                position: i + 1,
                ch,
            });
        }
        bytes.push(ch as u8);
    }
    Ok(BitString::from_bytes(&bytes))
}

/// Decode a character-aligned bit string. Bytes 0–255 map to chars
/// U+0000–U+00FF one-to-one, so corrupted values survive losslessly.
pub fn ascii_decode(bits: &BitString) -> Result<String, CodecError> {
    if !bits.len().is_multiple_of(8) {
        return Err(CodecError::Framing {
            len: bits.len(),
            group: 8,
        });
    }
    let mut out = String::with_capacity(bits.len() / 8);
    for chunk in bits.as_slice().chunks(8) {
        let mut byte = 0u8;
        for (i, &bit) in chunk.iter().enumerate() {
            if bit {
                byte |= 1 << (7 - i);
            }
        }
        out.push(char::from(byte));
    }
    Ok(out)
}

fn symbol_bits(d: usize) -> Result<usize, CodecError> {
    match d {
        2 => Ok(1),
        4 => Ok(2),
        _ => Err(CodecError::UnsupportedDimension { d }),
    }
}

/// Pack a bit string into per-use symbol pairs for dimension `d`. Each
/// use consumes 2·log₂(d) bits: the first log₂(d) bits (MSB first) form
/// z, the next log₂(d) form x.
pub fn pack_symbols(bits: &BitString, d: usize) -> Result<Vec<SymbolPair>, CodecError> {
    let k = symbol_bits(d)?;
    if !bits.len().is_multiple_of(2 * k) {
        return Err(CodecError::Framing {
            len: bits.len(),
            group: 2 * k,
        });
    }
    let slice = bits.as_slice();
    let read = |offset: usize| {
        let mut v = 0usize;
        for i in 0..k {
            v = (v << 1) | usize::from(slice[offset + i]);
        }
        v
    };
    Ok((0..bits.len() / (2 * k))
        .map(|u| {
            let base = u * 2 * k;
            SymbolPair::new(read(base), read(base + k))
        })
        .collect())
}

/// Inverse of [`pack_symbols`].
pub fn unpack_symbols(pairs: &[SymbolPair], d: usize) -> Result<BitString, CodecError> {
    let k = symbol_bits(d)?;
    let mut bits = BitString::with_capacity(pairs.len() * 2 * k);
    for pair in pairs {
        if pair.z >= d || pair.x >= d {
            return Err(CodecError::UnsupportedDimension { d });
        }
        for i in (0..k).rev() {
            bits.push((pair.z >> i) & 1 == 1);
        }
        for i in (0..k).rev() {
            bits.push((pair.x >> i) & 1 == 1);
        }
    }
    Ok(bits)
}

/// How a payload travels: direct classical bits, qubit superdense coding,
/// or qudit (d = 4) superdense coding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransmitMode {
    Classical,
    Qubit,
    Qudit4,
}

impl TransmitMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TransmitMode::Classical => "classical",
            TransmitMode::Qubit => "qubit",
            TransmitMode::Qudit4 => "qudit4",
        }
    }

    pub fn parse(s: &str) -> Option<TransmitMode> {
        match s {
            "classical" => Some(TransmitMode::Classical),
            "qubit" => Some(TransmitMode::Qubit),
            "qudit4" => Some(TransmitMode::Qudit4),
            _ => None,
        }
    }

    /// Local dimension of the quantum resource, if any.
    pub fn dimension(&self) -> Option<usize> {
        match self {
            TransmitMode::Classical => None,
            TransmitMode::Qubit => Some(2),
            TransmitMode::Qudit4 => Some(4),
        }
    }
}

impl std::fmt::Display for TransmitMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Channel uses needed per character count: 8 classical bits, 4 qubit
/// uses (2 bits each), or 2 qudit-4 uses (4 bits each).
pub fn channel_uses(char_count: usize, mode: TransmitMode) -> usize {
    match mode {
        TransmitMode::Classical => 8 * char_count,
        TransmitMode::Qubit => 4 * char_count,
        TransmitMode::Qudit4 => 2 * char_count,
    }
}

/// A partition of `1..=n_words` into transmission units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentPlan {
    /// Half-open word ranges (start, end), 0-based.
    pub unit_bounds: Vec<(usize, usize)>,
    pub max_unit: usize,
}

impl SegmentPlan {
    pub fn unit_count(&self) -> usize {
        self.unit_bounds.len()
    }
}

/// Partition `n_words` into ⌈n/max_unit⌉ units of near-equal size (sizes
/// differ by at most one, larger units first). Near-equal splitting keeps
/// trailing units from falling below the 5-word optimum that greedy
/// chunking can produce.
pub fn segment_words(n_words: usize, max_unit: usize) -> Result<SegmentPlan, CodecError> {
    if max_unit < 5 {
        return Err(CodecError::MaxUnitTooSmall { max_unit });
    }
    let mut unit_bounds = Vec::new();
    if n_words > 0 {
        let units = n_words.div_ceil(max_unit);
        let base = n_words / units;
        let extra = n_words % units;
        let mut start = 0;
        for u in 0..units {
            let size = base + usize::from(u < extra);
            unit_bounds.push((start, start + size));
            start += size;
        }
    }
    Ok(SegmentPlan {
        unit_bounds,
        max_unit,
    })
}

/// Segment a text into 5–16-word units (default `max_unit` 16).
pub fn segment_text(text: &TextStage, max_unit: usize) -> Result<SegmentPlan, CodecError> {
    segment_words(text.word_count(), max_unit)
}

const DISPLAY_KEEP: &[char] = &['.', ',', ';', ':', '\'', '"', '!', '?', '-', ' '];

/// Replace every character outside `[a-z A-Z 0-9 space . , ; : ' " ! ? -]`
/// with `x`, the generic indicator for a noise-corrupted byte.
pub fn normalize_display(text: &str) -> String {
    text.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || DISPLAY_KEEP.contains(&c) {
                c
            } else {
                'x'
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::Stage;

    #[test]
    fn encode_hi() {
        let bits = ascii_encode("Hi").unwrap();
        assert_eq!(bits.to_string(), "0100100001101001");
    }

    #[test]
    fn encode_empty() {
        assert!(ascii_encode("").unwrap().is_empty());
    }

    #[test]
    fn encode_rejects_non_ascii_with_position() {
        let err = ascii_encode("é").unwrap_err();
        assert_eq!(
            err,
            CodecError::NonAscii {
                position: 1,
                ch: 'é'
            }
        );
        let err = ascii_encode("ok é").unwrap_err();
        assert_eq!(
            err,
            CodecError::NonAscii {
                position: 4,
                ch: 'é'
            }
        );
    }

    #[test]
    fn decode_single_byte() {
        let bits = BitString::from_bytes(&[0b0110_0001]);
        assert_eq!(ascii_decode(&bits).unwrap(), "a");
    }

    #[test]
    fn decode_rejects_partial_bytes() {
        let bits: BitString = std::iter::repeat_n(true, 7).collect();
        assert_eq!(
            ascii_decode(&bits).unwrap_err(),
            CodecError::Framing { len: 7, group: 8 }
        );
    }

    #[test]
    fn roundtrip_plain_sentence() {
        let bits = ascii_encode("Quantum.").unwrap();
        assert_eq!(ascii_decode(&bits).unwrap(), "Quantum.");
    }

    #[test]
    fn corrupted_bytes_decode_losslessly() {
        let bits = BitString::from_bytes(&[0xC3, 0x07]);
        let s = ascii_decode(&bits).unwrap();
        let codes: Vec<u32> = s.chars().map(|c| c as u32).collect();
        assert_eq!(codes, vec![0xC3, 0x07]);
    }

    #[test]
    fn pack_h_at_d2() {
        let bits = ascii_encode("H").unwrap();
        let pairs = pack_symbols(&bits, 2).unwrap();
        assert_eq!(
            pairs,
            vec![
                SymbolPair::new(0, 1),
                SymbolPair::new(0, 0),
                SymbolPair::new(1, 0),
                SymbolPair::new(0, 0),
            ]
        );
    }

    #[test]
    fn pack_h_at_d4() {
        let bits = ascii_encode("H").unwrap();
        let pairs = pack_symbols(&bits, 4).unwrap();
        assert_eq!(pairs, vec![SymbolPair::new(1, 0), SymbolPair::new(2, 0)]);
    }

    #[test]
    fn pack_empty() {
        let pairs = pack_symbols(&BitString::new(), 2).unwrap();
        assert!(pairs.is_empty());
        assert!(unpack_symbols(&[], 2).unwrap().is_empty());
    }

    #[test]
    fn unpack_single_pair() {
        let bits = unpack_symbols(&[SymbolPair::new(0, 1)], 2).unwrap();
        assert_eq!(bits.to_string(), "01");
    }

    #[test]
    fn channel_use_accounting() {
        assert_eq!(channel_uses(1, TransmitMode::Classical), 8);
        assert_eq!(channel_uses(1, TransmitMode::Qubit), 4);
        assert_eq!(channel_uses(1, TransmitMode::Qudit4), 2);
        assert_eq!(channel_uses(164, TransmitMode::Qubit), 656);
    }

    #[test]
    fn segmentation_near_equal() {
        let plan = segment_words(40, 16).unwrap();
        let sizes: Vec<usize> = plan.unit_bounds.iter().map(|(s, e)| e - s).collect();
        assert_eq!(sizes, vec![14, 13, 13]);

        let plan = segment_words(16, 16).unwrap();
        assert_eq!(plan.unit_bounds, vec![(0, 16)]);

        let plan = segment_words(17, 16).unwrap();
        let sizes: Vec<usize> = plan.unit_bounds.iter().map(|(s, e)| e - s).collect();
        assert_eq!(sizes, vec![9, 8]);
    }

    #[test]
    fn segmentation_rejects_tiny_max_unit() {
        assert!(segment_words(10, 4).is_err());
    }

    #[test]
    fn segment_text_covers_all_words() {
        let t = TextStage::parse(Stage::Ideal, &"w ".repeat(41));
        let plan = segment_text(&t, 16).unwrap();
        assert_eq!(plan.unit_count(), 3);
        let total: usize = plan.unit_bounds.iter().map(|(s, e)| e - s).sum();
        assert_eq!(total, 41);
    }

    #[test]
    fn display_normalization() {
        assert_eq!(normalize_display("w$rld"), "wxrld");
        assert_eq!(normalize_display("hello"), "hello");
        let garbage: String = (0u8..5).map(char::from).collect();
        assert_eq!(normalize_display(&garbage), "xxxxx");
        assert_eq!(normalize_display("Keep: a-b, 'q'!?"), "Keep: a-b, 'q'!?");
    }
}
