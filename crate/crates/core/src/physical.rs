//! Physical-layer likelihood of candidate words given a mask's LLR slice.
//!
//! With `L = ln P(0)/P(1)`, the posterior of a single bit is
//! `P(0) = 1/(1+e^{-L})` and `P(1) = 1/(1+e^{L})`. Bits are independent given
//! the channel, so a candidate's log-likelihood is the sum over its bits of
//! `-softplus(-L)` for a 0 and `-softplus(L)` for a 1.

use std::cmp::Ordering;

use thiserror::Error;

use crate::channel::LlrSeq;
use crate::masker::Vocabulary;
use crate::text_codec::bytes_to_bits;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("word of {word_bytes} bytes needs {} LLRs, slice has {llrs}", 8 * word_bytes)]
pub struct SliceMismatch {
    pub word_bytes: usize,
    pub llrs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysScore {
    pub word: Vec<u8>,
    /// Unnormalized log-likelihood.
    pub log_lik: f64,
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Same-length vocabulary words, the correction candidates for a span of
/// `byte_length` bytes.
pub fn candidate_set(vocab: &Vocabulary, byte_length: usize) -> &[Vec<u8>] {
    vocab.with_length(byte_length)
}

/// Per-bit log-probabilities of a slice, computed once and reused for every
/// candidate.
#[derive(Debug, Clone)]
pub struct SliceScorer {
    /// `[ln P(bit=0), ln P(bit=1)]` per bit position.
    terms: Vec<[f64; 2]>,
}

impl SliceScorer {
    pub fn new(slice: &LlrSeq) -> Self {
        Self {
            terms: slice
                .as_slice()
                .iter()
                .map(|&l| [-softplus(-l), -softplus(l)])
                .collect(),
        }
    }

    pub fn score(&self, word: &[u8]) -> Result<f64, SliceMismatch> {
        if 8 * word.len() != self.terms.len() {
            return Err(SliceMismatch {
                word_bytes: word.len(),
                llrs: self.terms.len(),
            });
        }
        let mut total = 0.0;
        for (byte, terms) in word.iter().zip(self.terms.chunks_exact(8)) {
            for (k, t) in terms.iter().enumerate() {
                total += t[((byte >> (7 - k)) & 1) as usize];
            }
        }
        Ok(total)
    }
}

pub fn log_phys(word: &[u8], slice: &LlrSeq) -> Result<f64, SliceMismatch> {
    SliceScorer::new(slice).score(word)
}

/// Scores all candidates, highest likelihood first; ties go to the
/// lexicographically smaller word.
pub fn rank_physical<W: AsRef<[u8]>>(
    candidates: &[W],
    slice: &LlrSeq,
) -> Result<Vec<PhysScore>, SliceMismatch> {
    let scorer = SliceScorer::new(slice);
    let mut scores = candidates
        .iter()
        .map(|w| {
            let word = w.as_ref();
            scorer.score(word).map(|log_lik| PhysScore {
                word: word.to_vec(),
                log_lik,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    scores.sort_by(|a, b| {
        b.log_lik
            .partial_cmp(&a.log_lik)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.word.cmp(&b.word))
    });
    Ok(scores)
}

/// Sum of `|L_i|` over the bits where `word` disagrees with the slice's hard
/// decision. Minimizing it maximizes [`log_phys`].
pub fn weighted_hamming(word: &[u8], slice: &LlrSeq) -> f64 {
    bytes_to_bits(word)
        .iter()
        .zip(slice.as_slice())
        .filter(|&(bit, &l)| (bit == 1) != (l < 0.0))
        .map(|(_, l)| l.abs())
        .sum()
}
