//! Wire format for payload bytes carrying appended soft values.
//!
//! A frame is the host-side view of a receiver stream that carries, after the
//! hard-decision payload, one 20-bit fixed-point LLR per payload bit:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "CLSF"
//! 4       1     version (0x01)
//! 5       1     flags (bit 0: LLR block present)
//! 6       2     payload_len, little-endian
//! 8       n     payload
//! 8+n     m     LLR block: 20-bit two's-complement values, MSB-first,
//!               packed back to back and zero-padded to a byte boundary
//! 8+n+m   4     CRC-32 (IEEE) over all preceding bytes, little-endian
//! ```
//!
//! LLRs are fixed point with 7 fractional bits (LSB = 1/128), so the
//! representable range is `[-4096, 4096 - 1/128]`. The CRC is not part of the
//! hardware stream this emulates; it gives the parser a corruption signal.

use thiserror::Error;

use crate::channel::LlrSeq;

pub const MAGIC: [u8; 4] = *b"CLSF";
pub const VERSION: u8 = 0x01;
pub const FLAG_LLR: u8 = 0x01;
pub const HEADER_LEN: usize = 8;
pub const CRC_LEN: usize = 4;
/// Bits per quantized LLR.
pub const LLR_BITS: u32 = 20;
pub const FRAC_BITS: i32 = 7;
pub const LLR_MIN: i32 = -(1 << 19);
pub const LLR_MAX: i32 = (1 << 19) - 1;
pub const MAX_PAYLOAD: usize = u16::MAX as usize;

#[derive(Debug, Error, PartialEq)]
pub enum FrameError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0:#04x}")]
    UnsupportedVersion(u8),
    #[error("truncated stream: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("CRC mismatch: frame says {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("{0} trailing bytes after frame")]
    TrailingBytes(usize),
    #[error("nonzero pad bits after LLR block")]
    NonzeroPadding,
    #[error("payload of {0} bytes exceeds the 65535-byte limit")]
    PayloadTooLarge(usize),
    #[error("LLR count {actual} does not match payload ({expected} expected)")]
    LlrCount { expected: usize, actual: usize },
    #[error("LLR value {0} is outside the 20-bit range")]
    LlrOutOfRange(i64),
    #[error("LLR value {0} is not finite")]
    NonFinite(f64),
}

/// Quantizes an LLR to 20-bit fixed point: `round(x · 2^7)`, ties to even,
/// saturated to `[-2^19, 2^19 - 1]`.
pub fn quantize_llr(x: f64) -> Result<i32, FrameError> {
    if !x.is_finite() {
        return Err(FrameError::NonFinite(x));
    }
    let scaled = (x * (1 << FRAC_BITS) as f64).round_ties_even();
    Ok(scaled.clamp(LLR_MIN as f64, LLR_MAX as f64) as i32)
}

pub fn dequantize_llr(q: i32) -> Result<f64, FrameError> {
    if !(LLR_MIN..=LLR_MAX).contains(&q) {
        return Err(FrameError::LlrOutOfRange(q as i64));
    }
    Ok(q as f64 / (1 << FRAC_BITS) as f64)
}

/// Payload bytes with optional per-bit quantized LLRs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub payload: Vec<u8>,
    pub llrs_q: Vec<i32>,
    pub flags: u8,
}

impl Frame {
    /// Frame with no LLR block.
    pub fn hard_only(payload: Vec<u8>) -> Self {
        Self {
            payload,
            llrs_q: Vec::new(),
            flags: 0,
        }
    }

    /// Frame carrying `llrs`, quantized.
    pub fn with_llrs(payload: Vec<u8>, llrs: &LlrSeq) -> Result<Self, FrameError> {
        if llrs.len() != 8 * payload.len() {
            return Err(FrameError::LlrCount {
                expected: 8 * payload.len(),
                actual: llrs.len(),
            });
        }
        let llrs_q = llrs
            .as_slice()
            .iter()
            .map(|&x| quantize_llr(x))
            .collect::<Result<_, _>>()?;
        Ok(Self {
            payload,
            llrs_q,
            flags: FLAG_LLR,
        })
    }

    pub fn has_llrs(&self) -> bool {
        self.flags & FLAG_LLR != 0
    }

    /// Dequantized LLRs, or `None` when the frame has no LLR block.
    pub fn llrs(&self) -> Option<LlrSeq> {
        self.has_llrs().then(|| {
            LlrSeq(
                self.llrs_q
                    .iter()
                    .map(|&q| q as f64 / (1 << FRAC_BITS) as f64)
                    .collect(),
            )
        })
    }

    fn validate(&self) -> Result<(), FrameError> {
        if self.payload.len() > MAX_PAYLOAD {
            return Err(FrameError::PayloadTooLarge(self.payload.len()));
        }
        let expected = if self.has_llrs() {
            8 * self.payload.len()
        } else {
            0
        };
        if self.llrs_q.len() != expected {
            return Err(FrameError::LlrCount {
                expected,
                actual: self.llrs_q.len(),
            });
        }
        if let Some(&q) = self
            .llrs_q
            .iter()
            .find(|q| !(LLR_MIN..=LLR_MAX).contains(*q))
        {
            return Err(FrameError::LlrOutOfRange(q as i64));
        }
        Ok(())
    }

    /// Size of the encoded frame in bytes.
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len() + llr_block_len(self.llrs_q.len()) + CRC_LEN
    }
}

/// Bytes needed to hold `count` packed 20-bit values.
pub fn llr_block_len(count: usize) -> usize {
    (count * LLR_BITS as usize).div_ceil(8)
}

/// Packs 20-bit two's-complement values MSB-first into a contiguous
/// bitstring, zero-padding the final byte.
pub fn pack_llrs(values: &[i32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(llr_block_len(values.len()));
    let mut acc: u64 = 0;
    let mut nbits = 0u32;
    for &v in values {
        acc = (acc << LLR_BITS) | (v as u32 & 0xF_FFFF) as u64;
        nbits += LLR_BITS;
        while nbits >= 8 {
            nbits -= 8;
            out.push((acc >> nbits) as u8);
        }
        acc &= (1 << nbits) - 1;
    }
    if nbits > 0 {
        out.push((acc << (8 - nbits)) as u8);
    }
    out
}

/// Inverse of [`pack_llrs`]. `block` must be exactly
/// `llr_block_len(count)` bytes and its pad bits must be zero.
pub fn unpack_llrs(block: &[u8], count: usize) -> Result<Vec<i32>, FrameError> {
    let needed = llr_block_len(count);
    if block.len() < needed {
        return Err(FrameError::Truncated {
            needed,
            available: block.len(),
        });
    }
    let mut out = Vec::with_capacity(count);
    let mut acc: u64 = 0;
    let mut nbits = 0u32;
    let mut bytes = block[..needed].iter();
    for _ in 0..count {
        while nbits < LLR_BITS {
            acc = (acc << 8) | *bytes.next().expect("length checked") as u64;
            nbits += 8;
        }
        nbits -= LLR_BITS;
        let raw = ((acc >> nbits) & 0xF_FFFF) as u32;
        // Sign-extend from 20 bits.
        out.push(((raw << 12) as i32) >> 12);
        acc &= (1 << nbits) - 1;
    }
    if acc != 0 {
        return Err(FrameError::NonzeroPadding);
    }
    Ok(out)
}

pub fn encode_frame(frame: &Frame) -> Result<Vec<u8>, FrameError> {
    frame.validate()?;
    let mut out = Vec::with_capacity(frame.encoded_len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(frame.flags);
    out.extend_from_slice(&(frame.payload.len() as u16).to_le_bytes());
    out.extend_from_slice(&frame.payload);
    out.extend_from_slice(&pack_llrs(&frame.llrs_q));
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Decodes exactly one frame occupying all of `bytes`.
pub fn decode_frame(bytes: &[u8]) -> Result<Frame, FrameError> {
    let (frame, used) = decode_prefix(bytes)?;
    if used != bytes.len() {
        return Err(FrameError::TrailingBytes(bytes.len() - used));
    }
    Ok(frame)
}

/// Decodes the frame at the start of `bytes`, returning it with the number
/// of bytes it occupied.
pub fn decode_prefix(bytes: &[u8]) -> Result<(Frame, usize), FrameError> {
    if bytes.len() < HEADER_LEN {
        return Err(truncated(HEADER_LEN, bytes.len()));
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(FrameError::BadMagic(magic));
    }
    if bytes[4] != VERSION {
        return Err(FrameError::UnsupportedVersion(bytes[4]));
    }
    let flags = bytes[5];
    let payload_len = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    let llr_count = if flags & FLAG_LLR != 0 {
        8 * payload_len
    } else {
        0
    };
    let block_len = llr_block_len(llr_count);
    let body_end = HEADER_LEN + payload_len + block_len;
    let total = body_end + CRC_LEN;
    if bytes.len() < total {
        return Err(truncated(total, bytes.len()));
    }
    let stored = u32::from_le_bytes(bytes[body_end..total].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(FrameError::CrcMismatch { stored, computed });
    }
    let payload = bytes[HEADER_LEN..HEADER_LEN + payload_len].to_vec();
    let llrs_q = unpack_llrs(&bytes[HEADER_LEN + payload_len..body_end], llr_count)?;
    Ok((
        Frame {
            payload,
            llrs_q,
            flags,
        },
        total,
    ))
}

/// Decodes a concatenation of frames (the `.clsf` file format).
pub fn decode_stream(mut bytes: &[u8]) -> Result<Vec<Frame>, FrameError> {
    let mut frames = Vec::new();
    while !bytes.is_empty() {
        let (frame, used) = decode_prefix(bytes)?;
        frames.push(frame);
        bytes = &bytes[used..];
    }
    Ok(frames)
}

pub fn encode_stream<'a>(frames: impl IntoIterator<Item = &'a Frame>) -> Result<Vec<u8>, FrameError> {
    let mut out = Vec::new();
    for frame in frames {
        out.extend(encode_frame(frame)?);
    }
    Ok(out)
}

fn truncated(needed: usize, available: usize) -> FrameError {
    FrameError::Truncated { needed, available }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize_llr(4.0), Ok(512));
        assert_eq!(quantize_llr(-1.5), Ok(-192));
        assert_eq!((-192i32 as u32) & 0xF_FFFF, 0xFFF40);
        assert_eq!(quantize_llr(1e6), Ok(LLR_MAX));
        assert_eq!(quantize_llr(-1e6), Ok(LLR_MIN));
        assert!(matches!(quantize_llr(f64::NAN), Err(FrameError::NonFinite(_))));
        assert!(matches!(quantize_llr(f64::INFINITY), Err(FrameError::NonFinite(_))));
    }

    #[test]
    fn quantize_ties_to_even() {
        // 0.5/128 and 1.5/128 sit exactly between two codes.
        assert_eq!(quantize_llr(0.5 / 128.0), Ok(0));
        assert_eq!(quantize_llr(1.5 / 128.0), Ok(2));
        assert_eq!(quantize_llr(-2.5 / 128.0), Ok(-2));
    }

    #[test]
    fn dequantize_examples() {
        assert_eq!(dequantize_llr(512), Ok(4.0));
        assert_eq!(dequantize_llr(0), Ok(0.0));
        assert!(dequantize_llr(LLR_MAX + 1).is_err());
        assert!(dequantize_llr(LLR_MIN - 1).is_err());
    }

    #[test]
    fn pack_golden() {
        assert_eq!(pack_llrs(&[512, -192]), vec![0x00, 0x20, 0x0F, 0xFF, 0x40]);
        assert_eq!(unpack_llrs(&[0x00, 0x20, 0x0F, 0xFF, 0x40], 2), Ok(vec![512, -192]));
    }

    #[test]
    fn nonzero_padding_rejected() {
        // One value occupies 20 bits; the last 4 bits of byte 2 are padding.
        let mut block = pack_llrs(&[-1]);
        assert_eq!(block, vec![0xFF, 0xFF, 0xF0]);
        block[2] |= 0x01;
        assert_eq!(unpack_llrs(&block, 1), Err(FrameError::NonzeroPadding));
    }

    #[test]
    fn hard_only_layout() {
        let frame = Frame::hard_only(b"abc".to_vec());
        let bytes = encode_frame(&frame).unwrap();
        assert_eq!(bytes.len(), 12 + 3);
        assert_eq!(&bytes[..8], b"CLSF\x01\x00\x03\x00");
        assert_eq!(decode_frame(&bytes), Ok(frame));
    }

    #[test]
    fn llr_frame_size() {
        let payload = b"hello".to_vec();
        let llrs = LlrSeq(vec![1.25; 40]);
        let frame = Frame::with_llrs(payload, &llrs).unwrap();
        let bytes = encode_frame(&frame).unwrap();
        assert_eq!(bytes.len(), 12 + 5 + (160 * 5usize).div_ceil(8));
        assert_eq!(frame.llrs().unwrap(), llrs);
    }

    #[test]
    fn decode_errors() {
        let frame = Frame::with_llrs(b"cat".to_vec(), &LlrSeq(vec![-3.0; 24])).unwrap();
        let good = encode_frame(&frame).unwrap();

        assert!(matches!(decode_frame(&good[..3]), Err(FrameError::Truncated { .. })));
        assert!(matches!(
            decode_frame(&good[..good.len() - 1]),
            Err(FrameError::Truncated { .. })
        ));

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_frame(&bad), Err(FrameError::BadMagic(_))));

        let mut bad = good.clone();
        bad[4] = 2;
        assert_eq!(decode_frame(&bad), Err(FrameError::UnsupportedVersion(2)));

        let mut bad = good.clone();
        bad[HEADER_LEN + 1] ^= 0x04;
        assert!(matches!(decode_frame(&bad), Err(FrameError::CrcMismatch { .. })));
    }

    #[test]
    fn oversize_payload() {
        let frame = Frame::hard_only(vec![b'a'; MAX_PAYLOAD + 1]);
        assert_eq!(encode_frame(&frame), Err(FrameError::PayloadTooLarge(MAX_PAYLOAD + 1)));
    }

    #[test]
    fn stream_of_frames() {
        let a = Frame::hard_only(b"one".to_vec());
        let b = Frame::with_llrs(b"two".to_vec(), &LlrSeq(vec![0.5; 24])).unwrap();
        let bytes = encode_stream([&a, &b]).unwrap();
        assert_eq!(decode_stream(&bytes), Ok(vec![a, b]));
        assert_eq!(decode_stream(&[]), Ok(vec![]));
    }

    proptest! {
        #[test]
        fn quantization_error_half_lsb(x in -4095.0f64..4095.0) {
            let q = quantize_llr(x).unwrap();
            prop_assert!((dequantize_llr(q).unwrap() - x).abs() <= 1.0 / 256.0);
        }

        #[test]
        fn saturation_idempotent(x in -1e9f64..1e9) {
            let q = quantize_llr(x).unwrap();
            prop_assert_eq!(quantize_llr(dequantize_llr(q).unwrap()).unwrap(), q);
        }

        #[test]
        fn pack_round_trip(values in proptest::collection::vec(LLR_MIN..=LLR_MAX, 0..40)) {
            let block = pack_llrs(&values);
            prop_assert_eq!(block.len(), llr_block_len(values.len()));
            prop_assert_eq!(unpack_llrs(&block, values.len()).unwrap(), values);
        }
    }
}
