//! Semantic scoring of correction candidates from the words around a mask.
//!
//! A [`SemanticModel`] assigns each candidate an unnormalized, finite
//! log-score. Two implementations ship here: a bidirectional trigram model
//! trained locally ([`NgramModel`]) and a client for an HTTP fill-mask service
//! ([`RemoteModel`]).

use std::collections::BTreeMap;

use thiserror::Error;

mod ngram;
mod remote;

pub use ngram::{train_ngram, NgramModel, BOS, DEFAULT_K, EOS, UNK};
pub use remote::{
    build_request, merge_response, score_remote, FillCandidate, FillRequest, FillResponse, RemoteConfig, RemoteModel,
    ENDPOINT_ENV, MASK_TOKEN, MISSING_FLOOR,
};

/// Candidate word → log-score. Keys iterate in lexicographic order.
pub type ScoreMap = BTreeMap<Vec<u8>, f64>;

#[derive(Debug, Error)]
pub enum SemanticError {
    #[error("corpus {0} contains no words")]
    EmptyCorpus(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("n-gram model file, line {line}: {message}")]
    ModelFormat { line: usize, message: String },
    #[error("LM service unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("LM service protocol error: {0}")]
    Protocol(String),
}

/// One position of the received message as seen by a semantic model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextToken<'a> {
    Word(&'a [u8]),
    Mask,
}

pub trait SemanticModel: Send + Sync {
    /// Scores every candidate for the masked position `mask_index` of
    /// `context`. The returned map has exactly the candidates as keys.
    fn score(
        &self,
        context: &[ContextToken<'_>],
        mask_index: usize,
        candidates: &[Vec<u8>],
    ) -> Result<ScoreMap, SemanticError>;

    /// Short label used in reports.
    fn name(&self) -> String;
}

impl<M: SemanticModel + ?Sized> SemanticModel for Box<M> {
    fn score(
        &self,
        context: &[ContextToken<'_>],
        mask_index: usize,
        candidates: &[Vec<u8>],
    ) -> Result<ScoreMap, SemanticError> {
        (**self).score(context, mask_index, candidates)
    }

    fn name(&self) -> String {
        (**self).name()
    }
}

/// Uses `fallback` whenever `primary` reports the remote service unavailable.
/// Protocol errors still propagate.
pub struct WithFallback<P, F> {
    pub primary: P,
    pub fallback: F,
}

impl<P: SemanticModel, F: SemanticModel> SemanticModel for WithFallback<P, F> {
    fn score(
        &self,
        context: &[ContextToken<'_>],
        mask_index: usize,
        candidates: &[Vec<u8>],
    ) -> Result<ScoreMap, SemanticError> {
        match self.primary.score(context, mask_index, candidates) {
            Err(SemanticError::RemoteUnavailable(reason)) => {
                log::warn!("{reason}; scoring with {}", self.fallback.name());
                self.fallback.score(context, mask_index, candidates)
            }
            other => other,
        }
    }

    fn name(&self) -> String {
        format!("{}+fallback:{}", self.primary.name(), self.fallback.name())
    }
}
