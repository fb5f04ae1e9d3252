//! Cross-layer semantic error correction.
//!
//! A text message crosses a noisy BPSK link. The receiver keeps the
//! hard-decision bytes together with one log-likelihood ratio per bit,
//! flags words that fail a vocabulary check, and repairs each flagged word by
//! combining two independent sources of evidence:
//!
//! * the channel: how likely each same-length vocabulary word is given the
//!   word's LLRs ([`physical`]);
//! * the language: how well each candidate fits the surrounding words
//!   ([`semantic`]).
//!
//! The two are multiplied and renormalized ([`fusion`]), and the most
//! probable candidate replaces the corrupted bytes. [`eval`] measures how
//! often whole messages and individual masks are recovered.
//!
//! ```
//! use clsec::channel::ChannelParams;
//! use clsec::fusion::{correct_message, CorrectionOptions};
//! use clsec::masker::Vocabulary;
//! use clsec::pipeline::{receive_frame, transmit_frame};
//! use clsec::semantic::NgramModel;
//!
//! let vocab = Vocabulary::from_words(["the", "cat", "sat", "on", "mat"]);
//! let corpus = ["the cat sat on the mat"];
//! let segments: Vec<Vec<&str>> = corpus.iter().map(|l| l.split(' ').collect()).collect();
//! let model = NgramModel::train(segments.iter().map(Vec::as_slice), &vocab, 0.01);
//!
//! let frame = transmit_frame(b"the cat sat on the mat", &ChannelParams::new(0.45, 7), true).unwrap();
//! let masked = receive_frame(&frame, &vocab);
//! let outcome = correct_message(&masked, Some(&model), &vocab, CorrectionOptions::default()).unwrap();
//! assert_eq!(outcome.corrected_payload.len(), frame.payload.len());
//! ```

pub mod channel;
pub mod cli;
pub mod dump;
pub mod eval;
pub mod frame;
pub mod fusion;
pub mod masker;
pub mod physical;
pub mod pipeline;
pub mod semantic;
pub mod text_codec;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/text-and-bits.md")]
    mod text_and_bits {}
    #[doc = include_str!("../../../book/src/channel.md")]
    mod channel {}
    #[doc = include_str!("../../../book/src/frame-format.md")]
    mod frame_format {}
    #[doc = include_str!("../../../book/src/masking.md")]
    mod masking {}
    #[doc = include_str!("../../../book/src/physical-prior.md")]
    mod physical_prior {}
    #[doc = include_str!("../../../book/src/semantic-prior.md")]
    mod semantic_prior {}
    #[doc = include_str!("../../../book/src/fusion.md")]
    mod fusion {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
