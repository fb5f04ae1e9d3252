//! Byte, bit and word views of a text payload.
//!
//! Payloads are raw bytes end to end: a corrupted byte never has to be valid
//! UTF-8. Words are maximal runs of non-space bytes, separated by the single
//! delimiter byte `0x20`. Bits are ordered MSB-first within each byte.

use thiserror::Error;

/// Word delimiter.
pub const DELIMITER: u8 = b' ';

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("bit sequence of length {0} is not a multiple of 8")]
    Alignment(usize),
}

/// One word of a payload together with its byte offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSpan {
    pub bytes: Vec<u8>,
    /// Inclusive.
    pub start: usize,
    /// Exclusive.
    pub end: usize,
}

impl TokenSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    /// Range of payload bits covered by this token.
    pub fn bit_range(&self) -> std::ops::Range<usize> {
        8 * self.start..8 * self.end
    }
}

/// Result of [`tokenize`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Tokenized {
    pub tokens: Vec<TokenSpan>,
    /// Empty segments produced by leading, trailing or repeated delimiters.
    pub skipped_segments: usize,
}

/// Splits `payload` on single `0x20` bytes. Empty segments are skipped and
/// counted, never returned as zero-length tokens.
pub fn tokenize(payload: &[u8]) -> Tokenized {
    let mut out = Tokenized::default();
    if payload.is_empty() {
        return out;
    }
    let mut start = 0;
    for segment in payload.split(|&b| b == DELIMITER) {
        let end = start + segment.len();
        if segment.is_empty() {
            out.skipped_segments += 1;
        } else {
            out.tokens.push(TokenSpan {
                bytes: segment.to_vec(),
                start,
                end,
            });
        }
        start = end + 1;
    }
    out
}

/// An ordered sequence of bits, one `u8` (0 or 1) per bit.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitSeq(Vec<u8>);

impl BitSeq {
    /// Builds a sequence from 0/1 values. Any nonzero value is taken as 1.
    pub fn from_bits(bits: impl IntoIterator<Item = u8>) -> Self {
        Self(bits.into_iter().map(|b| (b != 0) as u8).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = u8> + '_ {
        self.0.iter().copied()
    }
}

/// Expands bytes to bits, MSB first.
pub fn bytes_to_bits(payload: &[u8]) -> BitSeq {
    BitSeq(
        payload
            .iter()
            .flat_map(|&byte| (0..8).rev().map(move |k| (byte >> k) & 1))
            .collect(),
    )
}

/// Packs MSB-first bits back into bytes.
pub fn bits_to_bytes(bits: &BitSeq) -> Result<Vec<u8>, CodecError> {
    if !bits.len().is_multiple_of(8) {
        return Err(CodecError::Alignment(bits.len()));
    }
    Ok(bits
        .0
        .chunks_exact(8)
        .map(|chunk| chunk.iter().fold(0u8, |acc, &b| (acc << 1) | b))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn span(bytes: &str, start: usize, end: usize) -> TokenSpan {
        TokenSpan {
            bytes: bytes.as_bytes().to_vec(),
            start,
            end,
        }
    }

    #[test]
    fn tokenize_basic() {
        let t = tokenize(b"a bc");
        assert_eq!(t.tokens, vec![span("a", 0, 1), span("bc", 2, 4)]);
        assert_eq!(t.skipped_segments, 0);
    }

    #[test]
    fn tokenize_empty() {
        assert_eq!(tokenize(b""), Tokenized::default());
    }

    #[test]
    fn tokenize_double_space() {
        let t = tokenize(b"x  y");
        assert_eq!(t.tokens, vec![span("x", 0, 1), span("y", 3, 4)]);
        assert_eq!(t.skipped_segments, 1);
    }

    #[test]
    fn tokenize_edges() {
        let t = tokenize(b" ab ");
        assert_eq!(t.tokens, vec![span("ab", 1, 3)]);
        assert_eq!(t.skipped_segments, 2);
    }

    #[test]
    fn bits_golden() {
        let bits = bytes_to_bits(b"hi");
        assert_eq!(
            bits.as_slice(),
            &[0, 1, 1, 0, 1, 0, 0, 0, 0, 1, 1, 0, 1, 0, 0, 1]
        );
        assert_eq!(bytes_to_bits(&[0x00]).as_slice(), &[0; 8]);
        assert_eq!(
            bytes_to_bits(&[0xFF, 0x01]).as_slice(),
            &[1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 1]
        );
        let back = bits_to_bytes(&BitSeq::from_bits([0, 1, 1, 0, 1, 0, 0, 0])).unwrap();
        assert_eq!(back, vec![0x68]);
    }

    #[test]
    fn misaligned_bits() {
        let bits = BitSeq::from_bits([1, 0, 1, 0, 1, 0, 1]);
        assert_eq!(bits_to_bytes(&bits), Err(CodecError::Alignment(7)));
    }

    proptest! {
        #[test]
        fn bit_round_trip(payload in proptest::collection::vec(any::<u8>(), 0..=256)) {
            let bits = bytes_to_bits(&payload);
            prop_assert_eq!(bits.len(), 8 * payload.len());
            prop_assert_eq!(bits_to_bytes(&bits).unwrap(), payload);
        }

        #[test]
        fn tokenize_reconstructs(payload in proptest::collection::vec(prop_oneof![Just(b' '), Just(b'a'), Just(b'z'), any::<u8>()], 0..64)) {
            let t = tokenize(&payload);
            // Every non-token byte is a delimiter; every token matches its slice.
            let mut rebuilt = vec![DELIMITER; payload.len()];
            for tok in &t.tokens {
                prop_assert!(tok.end > tok.start);
                prop_assert_eq!(&payload[tok.start..tok.end], tok.bytes.as_slice());
                prop_assert!(!tok.bytes.contains(&DELIMITER));
                rebuilt[tok.start..tok.end].copy_from_slice(&tok.bytes);
            }
            prop_assert_eq!(rebuilt, payload.clone());
            // Segments = delimiters + 1 for nonempty payloads.
            let delimiters = payload.iter().filter(|&&b| b == DELIMITER).count();
            if !payload.is_empty() {
                prop_assert_eq!(t.tokens.len() + t.skipped_segments, delimiters + 1);
            }
        }
    }
}
