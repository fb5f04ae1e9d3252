use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EvalError;
use crate::channel::bit_error_rate;

/// Fraction of corpus words (from the front) reserved for model training.
pub const TRAIN_FRACTION: f64 = 0.8;

/// Dataset RNG streams live in the upper half of the stream space so they
/// never coincide with per-trial channel streams.
const DATASET_STREAM: u64 = 1 << 63;

/// A preprocessed corpus: lowercase words separated by single spaces, one
/// segment per line. The first 80% of words train the language model and the
/// last 20% are held out for evaluation sequences.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub name: String,
    words: Vec<String>,
    /// Index of the first word of each line.
    line_starts: Vec<usize>,
    split: usize,
}

impl Corpus {
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, EvalError> {
        let name = name.into();
        let mut words = Vec::new();
        let mut line_starts = Vec::new();
        for line in text.lines() {
            let start = words.len();
            words.extend(line.split(' ').filter(|w| !w.is_empty()).map(str::to_owned));
            if words.len() > start {
                line_starts.push(start);
            }
        }
        if words.is_empty() {
            return Err(EvalError::CorpusTooSmall {
                corpus: name,
                needed: 1,
                available: 0,
            });
        }
        let split = (words.len() as f64 * TRAIN_FRACTION).floor() as usize;
        Ok(Self {
            name,
            words,
            line_starts,
            split,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Self::parse(name, &text)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Training segments: each line clipped to the training region.
    pub fn train_segments(&self) -> Vec<&[String]> {
        let mut ends: Vec<usize> = self.line_starts[1..].to_vec();
        ends.push(self.words.len());
        self.line_starts
            .iter()
            .zip(ends)
            .filter(|&(&start, _)| start < self.split)
            .map(|(&start, end)| &self.words[start..end.min(self.split)])
            .collect()
    }

    /// The held-out evaluation words.
    pub fn eval_region(&self) -> &[String] {
        &self.words[self.split..]
    }
}

/// Samples `count` contiguous spans of `seq_len` words from the evaluation
/// region, uniformly with replacement.
pub fn make_dataset(
    corpus: &Corpus,
    seq_len: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<String>>, EvalError> {
    let region = corpus.eval_region();
    if seq_len == 0 || seq_len > region.len() {
        return Err(EvalError::CorpusTooSmall {
            corpus: corpus.name.clone(),
            needed: seq_len,
            available: region.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(DATASET_STREAM | seq_len as u64);
    let last_start = region.len() - seq_len;
    Ok((0..count)
        .map(|_| {
            let start = rng.random_range(0..=last_start);
            region[start..start + seq_len].to_vec()
        })
        .collect())
}

/// Expected fraction of words with at least one bit error at noise level
/// `noise_std`, averaged over the given word byte lengths.
pub fn expected_corruption(word_lengths: &[usize], noise_std: f64) -> f64 {
    let ber = bit_error_rate(noise_std);
    let clean = (1.0 - ber).ln();
    word_lengths
        .iter()
        .map(|&len| -(clean * 8.0 * len as f64).exp_m1())
        .sum::<f64>()
        / word_lengths.len() as f64
}

/// Noise level at which [`expected_corruption`] equals `target`.
pub fn calibrate_sigma(word_lengths: &[usize], target: f64) -> f64 {
    assert!(!word_lengths.is_empty(), "no words to calibrate on");
    assert!(target > 0.0 && target < 1.0, "target fraction must be in (0, 1)");
    // Corruption grows monotonically with σ; bisect on ln σ.
    let (mut lo, mut hi) = (1e-3f64.ln(), 10f64.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if expected_corruption(word_lengths, mid.exp()) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (0.5 * (lo + hi)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Corpus {
        let text = (0..10)
            .map(|line| (0..10).map(|w| format!("w{line}x{w}")).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join("\n");
        Corpus::parse("grid", &text).unwrap()
    }

    #[test]
    fn split_is_80_20() {
        let c = corpus();
        assert_eq!(c.len(), 100);
        assert_eq!(c.eval_region().len(), 20);
        assert_eq!(c.eval_region()[0], "w8x0");
        let train: usize = c.train_segments().iter().map(|s| s.len()).sum();
        assert_eq!(train, 80);
        assert_eq!(c.train_segments().len(), 8);
    }

    #[test]
    fn dataset_is_reproducible() {
        let c = corpus();
        let a = make_dataset(&c, 15, 3, 7).unwrap();
        assert_eq!(a.len(), 3);
        assert!(a.iter().all(|s| s.len() == 15));
        assert_eq!(a, make_dataset(&c, 15, 3, 7).unwrap());
        // Every span is contiguous in the evaluation region.
        let region = c.eval_region();
        for s in &a {
            assert!(region.windows(15).any(|w| w == s.as_slice()));
        }
    }

    #[test]
    fn dataset_too_long() {
        assert!(matches!(
            make_dataset(&corpus(), 21, 1, 0),
            Err(EvalError::CorpusTooSmall { needed: 21, available: 20, .. })
        ));
    }

    #[test]
    fn calibration_hits_target() {
        let lengths = [3, 4, 5, 2, 8, 6];
        for target in [0.05, 0.1, 0.15] {
            let sigma = calibrate_sigma(&lengths, target);
            assert!((expected_corruption(&lengths, sigma) - target).abs() < 1e-9);
        }
    }
}
