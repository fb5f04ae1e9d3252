//! Sender-to-host path: text → channel → frame, and frame → masked message.

use crate::channel::{compute_llrs, hard_decide, modulate, transmit_protected, ChannelParams, LlrSeq};
use crate::frame::{Frame, FrameError};
use crate::masker::{build_masked_message, MaskedMessage, Vocabulary};
use crate::text_codec::{bits_to_bytes, bytes_to_bits, DELIMITER};

/// Sends `payload` over the channel and returns the frame the receiver would
/// stream to the host: hard-decision bytes plus quantized LLRs.
///
/// With `protect_delimiters`, bits of `0x20` bytes arrive noise-free.
pub fn transmit_frame(
    payload: &[u8],
    params: &ChannelParams,
    protect_delimiters: bool,
) -> Result<Frame, FrameError> {
    let symbols = modulate(&bytes_to_bits(payload));
    let received = transmit_protected(&symbols, params, |i| {
        protect_delimiters && payload[i / 8] == DELIMITER
    });
    let llrs = compute_llrs(&received, params);
    let hard = bits_to_bytes(&hard_decide(&llrs)).expect("whole bytes in, whole bytes out");
    Frame::with_llrs(hard, &llrs)
}

/// Masks a received frame. A frame without an LLR block gets all-zero LLRs,
/// which carry no physical preference between candidates.
pub fn receive_frame(frame: &Frame, vocab: &Vocabulary) -> MaskedMessage {
    let llrs = frame
        .llrs()
        .unwrap_or_else(|| LlrSeq(vec![0.0; 8 * frame.payload.len()]));
    build_masked_message(&frame.payload, &llrs, vocab).expect("frame invariants fix the LLR count")
}
