//! Vocabulary-check detection of corrupted words.
//!
//! A received word is flagged when it is not a vocabulary member. A word that
//! was corrupted into another valid word passes the check and is never masked.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::channel::LlrSeq;
use crate::text_codec::{tokenize, TokenSpan};

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("cannot read vocabulary {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("vocabulary line {line}: entry {entry:?} contains whitespace")]
    Format { line: usize, entry: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("payload of {payload_bytes} bytes needs {} LLRs, got {llrs}", 8 * payload_bytes)]
pub struct LengthMismatch {
    pub payload_bytes: usize,
    pub llrs: usize,
}

/// Immutable word list indexed by byte length.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    words: BTreeSet<Vec<u8>>,
    by_length: BTreeMap<usize, Vec<Vec<u8>>>,
}

impl Vocabulary {
    pub fn from_words<I, W>(words: I) -> Self
    where
        I: IntoIterator<Item = W>,
        W: AsRef<[u8]>,
    {
        let words: BTreeSet<Vec<u8>> = words
            .into_iter()
            .map(|w| w.as_ref().to_vec())
            .filter(|w| !w.is_empty())
            .collect();
        let mut by_length: BTreeMap<usize, Vec<Vec<u8>>> = BTreeMap::new();
        // BTreeSet iteration is sorted, so each bucket comes out sorted too.
        for w in &words {
            by_length.entry(w.len()).or_default().push(w.clone());
        }
        Self { words, by_length }
    }

    /// Parses one word per line. Blank lines are skipped and duplicates
    /// collapse; an entry with internal whitespace is an error.
    pub fn parse(text: &str) -> Result<Self, VocabError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let entry = line.trim();
            if entry.is_empty() {
                continue;
            }
            if entry.chars().any(char::is_whitespace) {
                return Err(VocabError::Format {
                    line: i + 1,
                    entry: entry.to_string(),
                });
            }
            entries.push(entry.as_bytes());
        }
        Ok(Self::from_words(entries))
    }

    pub fn contains(&self, word: &[u8]) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Words of exactly `byte_length` bytes, sorted.
    pub fn with_length(&self, byte_length: usize) -> &[Vec<u8>] {
        self.by_length
            .get(&byte_length)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u8]> {
        self.words.iter().map(Vec::as_slice)
    }
}

pub fn load_vocabulary(path: impl AsRef<Path>) -> Result<Vocabulary, VocabError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| VocabError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Vocabulary::parse(&text)
}

/// Hard-decision text with its corrupted words flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMessage {
    pub payload: Vec<u8>,
    pub tokens: Vec<TokenSpan>,
    /// Token positions that failed the vocabulary check, ascending.
    pub mask_indices: Vec<usize>,
    /// One LLR slice per mask, covering bits `[8·start, 8·end)` of its token.
    pub llr_slices: Vec<LlrSeq>,
}

impl MaskedMessage {
    pub fn is_masked(&self, token_index: usize) -> bool {
        self.mask_indices.binary_search(&token_index).is_ok()
    }

    /// Iterates `(token, llr_slice)` pairs for each mask.
    pub fn masks(&self) -> impl Iterator<Item = (&TokenSpan, &LlrSeq)> {
        self.mask_indices
            .iter()
            .zip(&self.llr_slices)
            .map(|(&i, slice)| (&self.tokens[i], slice))
    }
}

pub fn build_masked_message(
    payload: &[u8],
    llrs: &LlrSeq,
    vocab: &Vocabulary,
) -> Result<MaskedMessage, LengthMismatch> {
    if llrs.len() != 8 * payload.len() {
        return Err(LengthMismatch {
            payload_bytes: payload.len(),
            llrs: llrs.len(),
        });
    }
    let tokens = tokenize(payload).tokens;
    let mut mask_indices = Vec::new();
    let mut llr_slices = Vec::new();
    for (i, token) in tokens.iter().enumerate() {
        if !vocab.contains(&token.bytes) {
            mask_indices.push(i);
            llr_slices.push(LlrSeq(llrs.as_slice()[token.bit_range()].to_vec()));
        }
    }
    Ok(MaskedMessage {
        payload: payload.to_vec(),
        tokens,
        mask_indices,
        llr_slices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn vocab(words: &[&str]) -> Vocabulary {
        Vocabulary::from_words(words.iter().map(|w| w.as_bytes()))
    }

    #[test]
    fn load_from_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "the\ncat\n\ndog\ncat").unwrap();
        let v = load_vocabulary(f.path()).unwrap();
        assert_eq!(v.len(), 3);
        let three: Vec<&[u8]> = v.with_length(3).iter().map(Vec::as_slice).collect();
        assert_eq!(three, vec![&b"cat"[..], b"dog", b"the"]);
    }

    #[test]
    fn whitespace_entry_rejected() {
        let err = Vocabulary::parse("one\ntwo words\n").unwrap_err();
        assert!(matches!(err, VocabError::Format { line: 2, .. }));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_vocabulary("/nonexistent/vocab.txt"),
            Err(VocabError::Io { .. })
        ));
    }

    #[test]
    fn masks_out_of_vocabulary_token() {
        let v = vocab(&["the", "cat", "sat"]);
        let payload = b"the cqt sat";
        let llrs = LlrSeq((0..88).map(|i| i as f64).collect());
        let m = build_masked_message(payload, &llrs, &v).unwrap();
        assert_eq!(m.mask_indices, vec![1]);
        let expected: Vec<f64> = (32..56).map(|i| i as f64).collect();
        assert_eq!(m.llr_slices[0].as_slice(), expected.as_slice());
        assert_eq!(m.tokens[1].start, 4);
        assert_eq!(m.tokens[1].end, 7);
    }

    #[test]
    fn clean_message_has_no_masks() {
        let v = vocab(&["the", "cat", "sat"]);
        let m = build_masked_message(b"the cat sat", &LlrSeq(vec![1.0; 88]), &v).unwrap();
        assert!(m.mask_indices.is_empty());
        // "the car" corrupted into "the cat" passes silently.
        let m = build_masked_message(b"the cat", &LlrSeq(vec![1.0; 56]), &v).unwrap();
        assert!(m.mask_indices.is_empty());
    }

    #[test]
    fn length_mismatch() {
        let v = vocab(&["a"]);
        assert_eq!(
            build_masked_message(b"a", &LlrSeq(vec![0.0; 7]), &v),
            Err(LengthMismatch {
                payload_bytes: 1,
                llrs: 7
            })
        );
    }
}
