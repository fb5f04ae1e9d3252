//! Bayesian product of semantic and physical evidence.
//!
//! For each candidate `w` of a mask,
//!
//! ```text
//! log_post(w) = λ·log_sem(w) + log_phys(w) - logsumexp_v(λ·log_sem(v) + log_phys(v))
//! ```
//!
//! Neither input needs to be normalized: a constant offset on all `log_sem`
//! or all `log_phys` values cancels in the normalizer, so the posterior and
//! its argmax are unchanged. `λ = 1` is the plain product.

use std::cmp::Ordering;

use thiserror::Error;

use crate::masker::{MaskedMessage, Vocabulary};
use crate::physical::{candidate_set, SliceScorer};
use crate::semantic::{ContextToken, ScoreMap, SemanticError, SemanticModel};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FusionError {
    #[error("semantic and physical scores cover different candidates")]
    KeyMismatch,
    #[error("empty candidate set")]
    Empty,
}

#[derive(Debug, Error)]
pub enum CorrectionError {
    #[error(transparent)]
    Semantic(#[from] SemanticError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error("semantic model returned scores for a different candidate set")]
    ModelContract,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub word: Vec<u8>,
    pub log_sem: f64,
    pub log_phys: f64,
    /// Normalized over the candidate set.
    pub log_post: f64,
}

/// Max-shifted `ln Σ exp(x)`.
pub fn logsumexp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.into_iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

fn normalized(words: Vec<Vec<u8>>, sem: Vec<f64>, phys: Vec<f64>, joint: Vec<f64>) -> Vec<CandidateScore> {
    let norm = logsumexp(joint.iter().copied());
    words
        .into_iter()
        .zip(sem)
        .zip(phys)
        .zip(joint)
        .map(|(((word, log_sem), log_phys), j)| CandidateScore {
            word,
            log_sem,
            log_phys,
            log_post: j - norm,
        })
        .collect()
}

/// Fuses two score maps over the same candidates. Output is in lexicographic
/// word order.
pub fn fuse(log_sem: &ScoreMap, log_phys: &ScoreMap, lambda: f64) -> Result<Vec<CandidateScore>, FusionError> {
    if log_sem.is_empty() {
        return Err(FusionError::Empty);
    }
    if log_sem.len() != log_phys.len() || log_sem.keys().zip(log_phys.keys()).any(|(a, b)| a != b) {
        return Err(FusionError::KeyMismatch);
    }
    let words: Vec<Vec<u8>> = log_sem.keys().cloned().collect();
    let sem: Vec<f64> = log_sem.values().copied().collect();
    let phys: Vec<f64> = log_phys.values().copied().collect();
    let joint = sem.iter().zip(&phys).map(|(s, p)| lambda * s + p).collect();
    Ok(normalized(words, sem, phys, joint))
}

fn rank(a: &CandidateScore, b: &CandidateScore) -> Ordering {
    b.log_post
        .partial_cmp(&a.log_post)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.word.cmp(&b.word))
}

/// Highest posterior; exact ties go to the lexicographically smaller word.
pub fn select(scores: &[CandidateScore]) -> Result<&[u8], FusionError> {
    scores
        .iter()
        .min_by(|a, b| rank(a, b))
        .map(|s| s.word.as_slice())
        .ok_or(FusionError::Empty)
}

/// Which evidence decides a mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    /// LLRs only: the maximum-likelihood same-length word.
    Physical,
    /// Language model only.
    Semantic,
    /// Product of both, with semantic weight `lambda`.
    Fused { lambda: f64 },
}

impl Strategy {
    fn needs_model(&self) -> bool {
        !matches!(self, Strategy::Physical)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskOutcome {
    /// Index into the message's tokens.
    pub token_index: usize,
    pub start: usize,
    pub end: usize,
    /// `None` when no vocabulary word has the span's length.
    pub choice: Option<Vec<u8>>,
    pub candidates: Vec<CandidateScore>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionOutcome {
    pub masks: Vec<MaskOutcome>,
    pub corrected_payload: Vec<u8>,
}

/// Options for [`correct_message`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectionOptions {
    pub strategy: Strategy,
    /// Number of passes. In pass `r > 1` each mask sees the other masks'
    /// choices from pass `r - 1` as context instead of unknowns.
    pub rounds: usize,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        Self {
            strategy: Strategy::Fused { lambda: 1.0 },
            rounds: 1,
        }
    }
}

fn score_mask(
    masked: &MaskedMessage,
    mask_pos: usize,
    context: &[ContextToken<'_>],
    model: Option<&dyn SemanticModel>,
    vocab: &Vocabulary,
    strategy: Strategy,
) -> Result<MaskOutcome, CorrectionError> {
    let token_index = masked.mask_indices[mask_pos];
    let token = &masked.tokens[token_index];
    let candidates = candidate_set(vocab, token.len());
    let mut outcome = MaskOutcome {
        token_index,
        start: token.start,
        end: token.end,
        choice: None,
        candidates: Vec::new(),
    };
    if candidates.is_empty() {
        return Ok(outcome);
    }
    let scorer = SliceScorer::new(&masked.llr_slices[mask_pos]);
    let phys: Vec<f64> = candidates
        .iter()
        .map(|w| scorer.score(w).expect("candidates match the span length"))
        .collect();
    let sem: Vec<f64> = match (strategy.needs_model(), model) {
        (true, Some(model)) => {
            let map = model.score(context, token_index, candidates)?;
            if map.len() != candidates.len() {
                return Err(CorrectionError::ModelContract);
            }
            candidates
                .iter()
                .map(|w| map.get(w).copied().ok_or(CorrectionError::ModelContract))
                .collect::<Result<_, _>>()?
        }
        _ => vec![0.0; candidates.len()],
    };
    let joint: Vec<f64> = match strategy {
        Strategy::Physical => phys.clone(),
        Strategy::Semantic => sem.clone(),
        Strategy::Fused { lambda } => sem.iter().zip(&phys).map(|(s, p)| lambda * s + p).collect(),
    };
    outcome.candidates = normalized(candidates.to_vec(), sem, phys, joint);
    outcome.choice = Some(select(&outcome.candidates)?.to_vec());
    Ok(outcome)
}

/// Corrects every mask of `masked` and splices the choices into the payload.
///
/// Masks are decided independently: in the first pass each mask sees the
/// other masks as unknowns. Unresolved masks keep their received bytes.
/// `model` may be `None` only for [`Strategy::Physical`].
pub fn correct_message(
    masked: &MaskedMessage,
    model: Option<&dyn SemanticModel>,
    vocab: &Vocabulary,
    options: CorrectionOptions,
) -> Result<CorrectionOutcome, CorrectionError> {
    assert!(
        model.is_some() || !options.strategy.needs_model(),
        "{:?} needs a semantic model",
        options.strategy
    );
    let mut masks: Vec<MaskOutcome> = Vec::new();
    for round in 0..options.rounds.max(1) {
        let context: Vec<ContextToken<'_>> = masked
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| match masked.mask_indices.binary_search(&i) {
                Err(_) => ContextToken::Word(&t.bytes),
                Ok(m) => match masks.get(m).and_then(|o| o.choice.as_deref()) {
                    Some(choice) if round > 0 => ContextToken::Word(choice),
                    _ => ContextToken::Mask,
                },
            })
            .collect();
        let next = (0..masked.mask_indices.len())
            .map(|m| {
                let mut ctx = context.clone();
                ctx[masked.mask_indices[m]] = ContextToken::Mask;
                score_mask(masked, m, &ctx, model, vocab, options.strategy)
            })
            .collect::<Result<Vec<_>, _>>()?;
        masks = next;
    }
    let mut corrected_payload = masked.payload.clone();
    for m in &masks {
        if let Some(choice) = &m.choice {
            corrected_payload[m.start..m.end].copy_from_slice(choice);
        }
    }
    Ok(CorrectionOutcome {
        masks,
        corrected_payload,
    })
}
