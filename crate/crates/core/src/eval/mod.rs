//! Monte Carlo evaluation: perfect reconstruction rate (PRR) and mask
//! recovery accuracy (MRA) for LLR-only, semantic-only and fused correction.
//!
//! Trial `k` of every cell uses channel stream `k` under the master seed, and
//! every mode of a given `(seq_len, trial)` sees the same sequence. Modes are
//! therefore compared on identical noise, and results do not depend on how
//! many threads run the sweep.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

mod corpus;
mod report;

pub use corpus::{calibrate_sigma, expected_corruption, make_dataset, Corpus, TRAIN_FRACTION};
pub use report::{
    aggregate, write_aggregate_csv, write_fig3_csv, write_fig4_csv, write_report, write_trials_csv,
    CellMetrics, MetricsReport, ReportHeader,
};

use crate::channel::{snr_db_to_sigma, ChannelParams};
use crate::fusion::{correct_message, CorrectionError, CorrectionOptions, Strategy};
use crate::frame::{decode_frame, encode_frame, FrameError};
use crate::masker::Vocabulary;
use crate::pipeline::{receive_frame, transmit_frame};
use crate::semantic::SemanticModel;
use crate::text_codec::tokenize;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("corpus {corpus}: need {needed} evaluation words, have {available}")]
    CorpusTooSmall {
        corpus: String,
        needed: usize,
        available: usize,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Correction(#[from] CorrectionError),
    #[error("empty experiment grid")]
    EmptyGrid,
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Llr,
    Semantic,
    Fused,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Llr, Mode::Semantic, Mode::Fused];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Llr => "llr",
            Mode::Semantic => "semantic",
            Mode::Fused => "fused",
        }
    }

    pub fn strategy(&self, lambda: f64) -> Strategy {
        match self {
            Mode::Llr => Strategy::Physical,
            Mode::Semantic => Strategy::Semantic,
            Mode::Fused => Strategy::Fused { lambda },
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "llr" => Ok(Mode::Llr),
            "semantic" => Ok(Mode::Semantic),
            "fused" => Ok(Mode::Fused),
            other => Err(format!("unknown mode {other:?} (expected llr, semantic or fused)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ngram,
    Remote,
}

/// One cell of an experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub mode: Mode,
    pub seq_len: usize,
    pub snr_db: f64,
    /// Master seed.
    pub seed: u64,
    /// Semantic weight for fused mode.
    pub lambda: f64,
    pub protect_delimiters: bool,
    pub model: ModelKind,
    pub refine_rounds: usize,
}

impl TrialConfig {
    pub fn new(mode: Mode, seq_len: usize, snr_db: f64, seed: u64) -> Self {
        Self {
            mode,
            seq_len,
            snr_db,
            seed,
            lambda: 1.0,
            protect_delimiters: false,
            model: ModelKind::Ngram,
            refine_rounds: 1,
        }
    }

    pub fn noise_std(&self) -> f64 {
        snr_db_to_sigma(self.snr_db)
    }

    fn validate(&self) -> Result<(), EvalError> {
        if self.seq_len == 0 {
            return Err(EvalError::Config("seq_len must be at least 1".into()));
        }
        if !self.snr_db.is_finite() {
            return Err(EvalError::Config(format!("snr_db {} is not finite", self.snr_db)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(EvalError::Config(format!("lambda {} must be >= 0", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialResult {
    pub trial_idx: u64,
    pub n_words: usize,
    pub n_masks: usize,
    /// Masks replaced by the transmitted word at the same byte span.
    pub n_resolved_correct: usize,
    /// Unmasked received words that differ from what was sent.
    pub n_silent_errors: usize,
    pub exact_match: bool,
}

/// Shared, read-only inputs of an experiment.
pub struct Experiment<'a> {
    pub corpus: &'a Corpus,
    pub vocab: &'a Vocabulary,
    pub model: &'a dyn SemanticModel,
}

/// Runs one sequence through the full link and the configured corrector.
pub fn run_trial(
    sequence: &[String],
    config: &TrialConfig,
    trial_idx: u64,
    vocab: &Vocabulary,
    model: &dyn SemanticModel,
) -> Result<TrialResult, EvalError> {
    config.validate()?;
    let sent = sequence.join(" ").into_bytes();
    let params = ChannelParams::for_trial(config.noise_std(), config.seed, trial_idx);
    let frame = transmit_frame(&sent, &params, config.protect_delimiters)?;
    // The host only ever sees the decoded wire format.
    let frame = decode_frame(&encode_frame(&frame)?)?;
    let masked = receive_frame(&frame, vocab);
    let options = CorrectionOptions {
        strategy: config.mode.strategy(config.lambda),
        rounds: config.refine_rounds,
    };
    let outcome = correct_message(&masked, Some(model), vocab, options)?;

    let sent_tokens: HashMap<(usize, usize), Vec<u8>> = tokenize(&sent)
        .tokens
        .into_iter()
        .map(|t| ((t.start, t.end), t.bytes))
        .collect();
    let matches_sent =
        |start: usize, end: usize, bytes: &[u8]| sent_tokens.get(&(start, end)).is_some_and(|b| b == bytes);

    let n_resolved_correct = outcome
        .masks
        .iter()
        .filter(|m| m.choice.as_deref().is_some_and(|c| matches_sent(m.start, m.end, c)))
        .count();
    let n_silent_errors = masked
        .tokens
        .iter()
        .enumerate()
        .filter(|&(i, t)| !masked.is_masked(i) && !matches_sent(t.start, t.end, &t.bytes))
        .count();

    Ok(TrialResult {
        trial_idx,
        n_words: sequence.len(),
        n_masks: masked.mask_indices.len(),
        n_resolved_correct,
        n_silent_errors,
        exact_match: outcome.corrected_payload == sent,
    })
}

/// Per-trial rows of a finished sweep, grouped by cell in grid order.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub cells: Vec<(TrialConfig, Vec<TrialResult>)>,
}

/// Runs `trials` sequences for every grid cell. Sequences depend only on
/// `(seed, seq_len)`, so every mode and SNR sees the same data.
pub fn sweep(
    experiment: &Experiment<'_>,
    grid: &[TrialConfig],
    trials: usize,
) -> Result<SweepResult, EvalError> {
    if grid.is_empty() {
        return Err(EvalError::EmptyGrid);
    }
    let mut datasets: HashMap<(u64, usize), Vec<Vec<String>>> = HashMap::new();
    for cell in grid {
        cell.validate()?;
        if let std::collections::hash_map::Entry::Vacant(e) = datasets.entry((cell.seed, cell.seq_len)) {
            e.insert(make_dataset(experiment.corpus, cell.seq_len, trials, cell.seed)?);
        }
    }
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..trials).map(move |t| (c, t)))
        .collect();
    let results: Vec<TrialResult> = jobs
        .par_iter()
        .map(|&(c, t)| {
            let cell = &grid[c];
            let sequence = &datasets[&(cell.seed, cell.seq_len)][t];
            run_trial(sequence, cell, t as u64, experiment.vocab, experiment.model)
        })
        .collect::<Result<_, _>>()?;
    let mut rows = results.into_iter();
    Ok(SweepResult {
        cells: grid
            .iter()
            .map(|cell| (cell.clone(), rows.by_ref().take(trials).collect()))
            .collect(),
    })
}

/// Runs [`sweep`] on a dedicated pool of `jobs` threads.
pub fn sweep_with_jobs(
    experiment: &Experiment<'_>,
    grid: &[TrialConfig],
    trials: usize,
    jobs: usize,
) -> Result<SweepResult, EvalError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| EvalError::Config(format!("thread pool: {e}")))?;
    pool.install(|| sweep(experiment, grid, trials))
}
