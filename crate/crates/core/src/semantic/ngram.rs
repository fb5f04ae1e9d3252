use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{ContextToken, ScoreMap, SemanticError, SemanticModel};
use crate::masker::Vocabulary;

/// Start-of-segment padding id (left context only).
pub const BOS: u32 = 0;
/// End-of-segment padding id (right context only).
pub const EOS: u32 = 1;
/// Out-of-vocabulary words and masked context positions.
pub const UNK: u32 = 2;
const FIRST_WORD: u32 = 3;

pub const DEFAULT_K: f64 = 0.01;

const FORMAT_HEADER: &str = "clsec-ngram 1";

type Context = (u32, u32);

#[derive(Debug, Clone, Default, PartialEq)]
struct TrigramCounts {
    trigrams: HashMap<(u32, u32, u32), u32>,
    totals: HashMap<Context, u64>,
}

impl TrigramCounts {
    fn add(&mut self, ctx: Context, word: u32, count: u32) {
        *self.trigrams.entry((ctx.0, ctx.1, word)).or_default() += count;
        *self.totals.entry(ctx).or_default() += count as u64;
    }

    fn count(&self, ctx: Context, word: u32) -> u32 {
        self.trigrams.get(&(ctx.0, ctx.1, word)).copied().unwrap_or(0)
    }

    fn total(&self, ctx: Context) -> u64 {
        self.totals.get(&ctx).copied().unwrap_or(0)
    }

    fn sorted(&self) -> Vec<((u32, u32, u32), u32)> {
        let mut entries: Vec<_> = self.trigrams.iter().map(|(&k, &v)| (k, v)).collect();
        entries.sort_unstable();
        entries
    }
}

/// Bidirectional add-k trigram model.
///
/// The forward model predicts `w_i` from `(w_{i-2}, w_{i-1})` and the backward
/// model predicts it from `(w_{i+1}, w_{i+2})`. Each line of the training
/// corpus is one segment, padded with [`BOS`] on the left and [`EOS`] on the
/// right. Smoothed probabilities are
/// `(count + k) / (context_total + k·V)` where `V` counts the vocabulary
/// words plus [`UNK`].
#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    words: Vec<Vec<u8>>,
    ids: HashMap<Vec<u8>, u32>,
    forward: TrigramCounts,
    backward: TrigramCounts,
    k: f64,
}

impl NgramModel {
    /// An untrained model over `vocab`.
    pub fn empty(vocab: &Vocabulary, k: f64) -> Self {
        assert!(k > 0.0 && k.is_finite(), "smoothing constant must be positive");
        let words: Vec<Vec<u8>> = vocab.iter().map(<[u8]>::to_vec).collect();
        let ids = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), FIRST_WORD + i as u32))
            .collect();
        Self {
            words,
            ids,
            forward: TrigramCounts::default(),
            backward: TrigramCounts::default(),
            k,
        }
    }

    /// Trains on word segments; every segment is padded independently.
    pub fn train<'a, S, W>(segments: S, vocab: &Vocabulary, k: f64) -> Self
    where
        S: IntoIterator<Item = &'a [W]>,
        W: AsRef<[u8]> + 'a,
    {
        let mut model = Self::empty(vocab, k);
        for segment in segments {
            let ids: Vec<u32> = segment.iter().map(|w| model.token_id(w.as_ref())).collect();
            model.add_segment(&ids);
        }
        model
    }

    fn add_segment(&mut self, ids: &[u32]) {
        let n = ids.len();
        for i in 0..n {
            let left = (
                if i >= 2 { ids[i - 2] } else { BOS },
                if i >= 1 { ids[i - 1] } else { BOS },
            );
            let right = (
                if i + 1 < n { ids[i + 1] } else { EOS },
                if i + 2 < n { ids[i + 2] } else { EOS },
            );
            self.forward.add(left, ids[i], 1);
            self.backward.add(right, ids[i], 1);
        }
    }

    /// Id of `word`, or [`UNK`] when it is not in the model vocabulary.
    pub fn token_id(&self, word: &[u8]) -> u32 {
        self.ids.get(word).copied().unwrap_or(UNK)
    }

    /// Number of predictable outcomes: vocabulary words plus [`UNK`].
    pub fn vocab_size(&self) -> usize {
        self.words.len() + 1
    }

    /// Every predictable outcome id.
    pub fn outcome_ids(&self) -> impl Iterator<Item = u32> {
        std::iter::once(UNK).chain(FIRST_WORD..FIRST_WORD + self.words.len() as u32)
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn set_k(&mut self, k: f64) {
        assert!(k > 0.0 && k.is_finite(), "smoothing constant must be positive");
        self.k = k;
    }

    /// Raw forward count of `(prev2, prev1) → word`.
    pub fn forward_count(&self, prev2: u32, prev1: u32, word: u32) -> u32 {
        self.forward.count((prev2, prev1), word)
    }

    /// Raw backward count of `(next1, next2) → word`.
    pub fn backward_count(&self, next1: u32, next2: u32, word: u32) -> u32 {
        self.backward.count((next1, next2), word)
    }

    /// `ln P(word | prev2, prev1)`.
    pub fn forward_log_prob(&self, prev2: u32, prev1: u32, word: u32) -> f64 {
        self.smoothed(&self.forward, (prev2, prev1), word)
    }

    /// `ln P(word | next1, next2)`.
    pub fn backward_log_prob(&self, next1: u32, next2: u32, word: u32) -> f64 {
        self.smoothed(&self.backward, (next1, next2), word)
    }

    fn smoothed(&self, counts: &TrigramCounts, ctx: Context, word: u32) -> f64 {
        let num = counts.count(ctx, word) as f64 + self.k;
        let den = counts.total(ctx) as f64 + self.k * self.vocab_size() as f64;
        (num / den).ln()
    }

    fn context_id(&self, token: Option<&ContextToken<'_>>, pad: u32) -> u32 {
        match token {
            None => pad,
            Some(ContextToken::Mask) => UNK,
            Some(ContextToken::Word(w)) => self.token_id(w),
        }
    }

    /// Left and right context ids around `mask_index`.
    pub fn contexts(&self, context: &[ContextToken<'_>], mask_index: usize) -> (Context, Context) {
        let at = |offset: isize, pad| {
            let pos = mask_index as isize + offset;
            let token = usize::try_from(pos).ok().and_then(|p| context.get(p));
            self.context_id(token, pad)
        };
        ((at(-2, BOS), at(-1, BOS)), (at(1, EOS), at(2, EOS)))
    }

    /// Serializes counts as text. Output is deterministic.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{FORMAT_HEADER}").unwrap();
        writeln!(out, "k {}", self.k).unwrap();
        writeln!(out, "vocab {}", self.words.len()).unwrap();
        for w in &self.words {
            writeln!(out, "{}", String::from_utf8_lossy(w)).unwrap();
        }
        for (name, counts) in [("forward", &self.forward), ("backward", &self.backward)] {
            let entries = counts.sorted();
            writeln!(out, "{name} {}", entries.len()).unwrap();
            for ((a, b, c), n) in entries {
                writeln!(out, "{a} {b} {c} {n}").unwrap();
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SemanticError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| SemanticError::ModelFormat {
                line: 0,
                message: format!("unexpected end of file, expected {what}"),
            })
        };
        let bad = |line: usize, message: String| SemanticError::ModelFormat { line, message };

        let (n, header) = next("header")?;
        if header != FORMAT_HEADER {
            return Err(bad(n, format!("unknown header {header:?}")));
        }
        let keyed = |(n, line): (usize, &str), key: &str| -> Result<String, SemanticError> {
            line.strip_prefix(key)
                .and_then(|rest| rest.strip_prefix(' '))
                .map(str::to_owned)
                .ok_or_else(|| bad(n, format!("expected `{key} <value>`")))
        };
        let k: f64 = keyed(next("k")?, "k")?
            .parse()
            .map_err(|e| bad(0, format!("bad k: {e}")))?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(bad(2, format!("smoothing constant {k} must be positive")));
        }
        let nwords: usize = keyed(next("vocab")?, "vocab")?
            .parse()
            .map_err(|e| bad(3, format!("bad vocab size: {e}")))?;
        let mut words = Vec::with_capacity(nwords);
        for _ in 0..nwords {
            words.push(next("vocabulary word")?.1.as_bytes().to_vec());
        }
        let mut model = Self::empty(&Vocabulary::from_words(&words), k);
        if model.words != words {
            return Err(bad(4, "vocabulary must be sorted and unique".into()));
        }
        for name in ["forward", "backward"] {
            let entries: usize = keyed(next(name)?, name)?
                .parse()
                .map_err(|e| bad(0, format!("bad {name} size: {e}")))?;
            let limit = FIRST_WORD + nwords as u32;
            for _ in 0..entries {
                let (n, line) = next("count line")?;
                let fields: Vec<u32> = line
                    .split(' ')
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|e| bad(n, format!("bad count line: {e}")))?;
                let [a, b, c, count] = fields[..] else {
                    return Err(bad(n, "expected four fields".into()));
                };
                if a >= limit || b >= limit || c >= limit || c < UNK {
                    return Err(bad(n, "token id out of range".into()));
                }
                let counts = if name == "forward" {
                    &mut model.forward
                } else {
                    &mut model.backward
                };
                counts.add((a, b), c, count);
            }
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SemanticError> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|source| SemanticError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SemanticError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| SemanticError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text)
    }
}

impl SemanticModel for NgramModel {
    fn score(
        &self,
        context: &[ContextToken<'_>],
        mask_index: usize,
        candidates: &[Vec<u8>],
    ) -> Result<ScoreMap, SemanticError> {
        let (left, right) = self.contexts(context, mask_index);
        Ok(candidates
            .iter()
            .map(|w| {
                let id = self.token_id(w);
                let s = self.forward_log_prob(left.0, left.1, id)
                    + self.backward_log_prob(right.0, right.1, id);
                (w.clone(), s)
            })
            .collect())
    }

    fn name(&self) -> String {
        "ngram".into()
    }
}

/// Trains on a corpus file, one segment per line.
pub fn train_ngram(corpus: impl AsRef<Path>, vocab: &Vocabulary) -> Result<NgramModel, SemanticError> {
    let path = corpus.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SemanticError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let segments: Vec<Vec<&str>> = text
        .lines()
        .map(|l| l.split(' ').filter(|w| !w.is_empty()).collect::<Vec<_>>())
        .filter(|s| !s.is_empty())
        .collect();
    if segments.is_empty() {
        return Err(SemanticError::EmptyCorpus(path.display().to_string()));
    }
    Ok(NgramModel::train(
        segments.iter().map(Vec::as_slice),
        vocab,
        DEFAULT_K,
    ))
}
