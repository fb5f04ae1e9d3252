//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context as _};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::channel::{sigma_to_snr_db, snr_db_to_sigma, ChannelParams};
use crate::dump::{from_dump, to_dump};
use crate::eval::{
    aggregate, calibrate_sigma, sweep_with_jobs, write_aggregate_csv, write_fig3_csv, write_fig4_csv,
    write_report, write_trials_csv, Corpus, Experiment, Mode, ModelKind, ReportHeader, TrialConfig,
};
use crate::frame::{decode_stream, encode_stream, FrameError};
use crate::fusion::{correct_message, CorrectionOptions, Strategy};
use crate::masker::{load_vocabulary, Vocabulary};
use crate::pipeline::{receive_frame, transmit_frame};
use crate::semantic::{NgramModel, RemoteConfig, RemoteModel, SemanticModel, WithFallback, DEFAULT_K};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Default target fraction of corrupted words when no SNR is given.
pub const DEFAULT_TARGET_CORRUPTION: f64 = 0.10;
pub const DEFAULT_LENGTHS: [usize; 5] = [15, 50, 100, 150, 250];
pub const DEFAULT_TRIALS: usize = 100;

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(name = "clsec", version, about = "Cross-layer semantic error correction toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a Monte Carlo sweep and write CSV reports.
    Simulate(SimulateArgs),
    /// Correct the frames of a .clsf file and print the text.
    Correct(CorrectArgs),
    /// Convert between .clsf frames and a text dump.
    #[command(subcommand)]
    Frame(FrameCommand),
    /// Send text through the simulated channel and write the received frame.
    Transmit(TransmitArgs),
    /// Train the n-gram model and save its counts.
    Ngram(NgramArgs),
}

/// Options shared by commands that need a vocabulary and a semantic model.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelArgs {
    /// Preprocessed corpus: lowercase words, single spaces, one segment per line.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Vocabulary file, one word per line.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Semantic model: ngram or remote.
    #[arg(long, value_parser = parse_model_kind)]
    pub model: Option<ModelKind>,
    /// Saved n-gram counts to use instead of training on the corpus.
    #[arg(long)]
    pub ngram_model: Option<PathBuf>,
    /// Add-k smoothing constant.
    #[arg(long)]
    pub k: Option<f64>,
    /// LM service base URL (overridden by CLSEC_LM_ENDPOINT).
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Fall back to the n-gram model when the service is unreachable.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub fallback_ngram: Option<bool>,
    /// Send the full candidate list to the service for forced scoring.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub forced: Option<bool>,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    pub timeout_secs: Option<f64>,
    /// Maximum concurrent requests to the service.
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    /// Semantic weight in the fused posterior.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Correction passes; later passes see earlier choices as context.
    #[arg(long)]
    pub refine_rounds: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    /// JSON file with any of these options; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Eb/N0 in dB; repeat for several operating points.
    #[arg(long = "snr-db", allow_negative_numbers = true)]
    pub snr_db: Vec<f64>,
    /// Calibrate σ for this expected fraction of corrupted words (used when
    /// no --snr-db is given).
    #[arg(long)]
    pub target_corruption: Option<f64>,
    /// Sequence length in words; repeatable.
    #[arg(long = "len")]
    #[serde(rename = "len")]
    pub lengths: Vec<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// llr, semantic or fused; repeatable.
    #[arg(long = "mode")]
    #[serde(rename = "mode")]
    pub modes: Vec<Mode>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Transmit delimiter bits without noise.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub protect_delimiters: Option<bool>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorrectArgs {
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Input .clsf file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// llr, semantic or fused.
    #[arg(long)]
    pub mode: Option<Mode>,
}

#[derive(Debug, Subcommand)]
pub enum FrameCommand {
    /// Text dump → .clsf.
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// .clsf → text dump (stdout when --output is omitted).
    Decode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct TransmitArgs {
    /// Message text; one frame per line of --input otherwise.
    #[arg(long, conflicts_with = "input")]
    pub text: Option<String>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long = "snr-db", allow_negative_numbers = true)]
    pub snr_db: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub protect_delimiters: bool,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct NgramArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: f64,
    /// Train on the whole corpus instead of the first 80% of words.
    #[arg(long)]
    pub full: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_model_kind(s: &str) -> Result<ModelKind, String> {
    match s {
        "ngram" => Ok(ModelKind::Ngram),
        "remote" => Ok(ModelKind::Remote),
        other => Err(format!("unknown model {other:?} (expected ngram or remote)")),
    }
}

fn read_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&Path>) -> anyhow::Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
}

impl ModelArgs {
    /// Fills every unset field from `file`.
    fn merge(self, file: ModelArgs) -> ModelArgs {
        ModelArgs {
            corpus: self.corpus.or(file.corpus),
            vocab: self.vocab.or(file.vocab),
            model: self.model.or(file.model),
            ngram_model: self.ngram_model.or(file.ngram_model),
            k: self.k.or(file.k),
            endpoint: self.endpoint.or(file.endpoint),
            fallback_ngram: self.fallback_ngram.or(file.fallback_ngram),
            forced: self.forced.or(file.forced),
            top_k: self.top_k.or(file.top_k),
            timeout_secs: self.timeout_secs.or(file.timeout_secs),
            max_in_flight: self.max_in_flight.or(file.max_in_flight),
            lambda: self.lambda.or(file.lambda),
            refine_rounds: self.refine_rounds.or(file.refine_rounds),
        }
    }

    fn validate(&self, needs_model: bool) -> anyhow::Result<()> {
        if self.vocab.is_none() {
            return Err(usage("--vocab is required"));
        }
        if !needs_model {
            return Ok(());
        }
        let kind = self.model.unwrap_or(ModelKind::Ngram);
        let needs_ngram = kind == ModelKind::Ngram || self.fallback_ngram.unwrap_or(false);
        if needs_ngram && self.ngram_model.is_none() && self.corpus.is_none() {
            return Err(usage("--corpus (or --ngram-model) is required for the n-gram model"));
        }
        if kind == ModelKind::Remote && self.endpoint.is_none() && std::env::var(crate::semantic::ENDPOINT_ENV).is_err() {
            return Err(usage("--endpoint (or CLSEC_LM_ENDPOINT) is required with --model remote"));
        }
        if let Some(l) = self.lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(usage("--lambda must be a finite value >= 0"));
            }
        }
        if let Some(k) = self.k {
            if !(k > 0.0 && k.is_finite()) {
                return Err(usage("--k must be positive"));
            }
        }
        if self.refine_rounds == Some(0) {
            return Err(usage("--refine-rounds must be at least 1"));
        }
        Ok(())
    }

    fn lambda(&self) -> f64 {
        self.lambda.unwrap_or(1.0)
    }

    fn rounds(&self) -> usize {
        self.refine_rounds.unwrap_or(1)
    }

    fn load_vocab(&self) -> anyhow::Result<Vocabulary> {
        Ok(load_vocabulary(self.vocab.as_ref().expect("validated"))?)
    }

    fn ngram(&self, vocab: &Vocabulary, corpus: Option<&Corpus>) -> anyhow::Result<NgramModel> {
        let mut model = match (&self.ngram_model, corpus) {
            (Some(path), _) => NgramModel::load(path)?,
            (None, Some(corpus)) => NgramModel::train(corpus.train_segments(), vocab, DEFAULT_K),
            (None, None) => bail!("no corpus to train the n-gram model on"),
        };
        if let Some(k) = self.k {
            model.set_k(k);
        }
        Ok(model)
    }

    fn semantic_model(&self, vocab: &Vocabulary, corpus: Option<&Corpus>) -> anyhow::Result<Box<dyn SemanticModel>> {
        match self.model.unwrap_or(ModelKind::Ngram) {
            ModelKind::Ngram => Ok(Box::new(self.ngram(vocab, corpus)?)),
            ModelKind::Remote => {
                let mut config = RemoteConfig::new(self.endpoint.clone().unwrap_or_default()).with_env_override();
                if let Some(t) = self.timeout_secs {
                    config.timeout = Duration::from_secs_f64(t);
                }
                if let Some(k) = self.top_k {
                    config.top_k = k;
                }
                config.forced = self.forced.unwrap_or(false);
                if let Some(n) = self.max_in_flight {
                    config.max_in_flight = n;
                }
                let remote = RemoteModel::new(config);
                if self.fallback_ngram.unwrap_or(false) {
                    Ok(Box::new(WithFallback {
                        primary: remote,
                        fallback: self.ngram(vocab, corpus)?,
                    }))
                } else {
                    Ok(Box::new(remote))
                }
            }
        }
    }
}

impl SimulateArgs {
    fn merge(self, file: SimulateArgs) -> SimulateArgs {
        fn pick<T>(flags: Vec<T>, file: Vec<T>) -> Vec<T> {
            if flags.is_empty() {
                file
            } else {
                flags
            }
        }
        SimulateArgs {
            config: self.config,
            model: self.model.merge(file.model),
            snr_db: pick(self.snr_db, file.snr_db),
            target_corruption: self.target_corruption.or(file.target_corruption),
            lengths: pick(self.lengths, file.lengths),
            trials: self.trials.or(file.trials),
            modes: pick(self.modes, file.modes),
            seed: self.seed.or(file.seed),
            out: self.out.or(file.out),
            protect_delimiters: self.protect_delimiters.or(file.protect_delimiters),
            jobs: self.jobs.or(file.jobs),
        }
    }
}

pub fn cmd_simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let file: SimulateArgs = read_config(args.config.as_deref())?;
    let args = args.merge(file);
    args.model.validate(true)?;
    if args.model.corpus.is_none() {
        return Err(usage("--corpus is required"));
    }
    let out = args.out.clone().ok_or_else(|| usage("--out is required"))?;
    if args.trials == Some(0) {
        return Err(usage("--trials must be at least 1"));
    }
    if args.jobs == Some(0) {
        return Err(usage("--jobs must be at least 1"));
    }
    if args.lengths.contains(&0) {
        return Err(usage("--len must be at least 1"));
    }
    if let Some(t) = args.target_corruption {
        if !(t > 0.0 && t < 1.0) {
            return Err(usage("--target-corruption must be in (0, 1)"));
        }
        if !args.snr_db.is_empty() {
            return Err(usage("--target-corruption and --snr-db are mutually exclusive"));
        }
    }

    let corpus = Corpus::load(args.model.corpus.as_ref().unwrap())?;
    let vocab = args.model.load_vocab()?;
    let model = args.model.semantic_model(&vocab, Some(&corpus))?;

    let (snrs, target) = if args.snr_db.is_empty() {
        let target = args.target_corruption.unwrap_or(DEFAULT_TARGET_CORRUPTION);
        let lengths: Vec<usize> = corpus.eval_region().iter().map(String::len).collect();
        let sigma = calibrate_sigma(&lengths, target);
        (vec![sigma_to_snr_db(sigma)], Some(target))
    } else {
        (args.snr_db.clone(), None)
    };
    let lengths = if args.lengths.is_empty() {
        DEFAULT_LENGTHS.to_vec()
    } else {
        args.lengths.clone()
    };
    let modes = if args.modes.is_empty() {
        Mode::ALL.to_vec()
    } else {
        args.modes.clone()
    };
    let trials = args.trials.unwrap_or(DEFAULT_TRIALS);
    let seed = args.seed.unwrap_or(1);
    let model_kind = args.model.model.unwrap_or(ModelKind::Ngram);

    let mut grid = Vec::new();
    for &snr_db in &snrs {
        for &seq_len in &lengths {
            for &mode in &modes {
                grid.push(TrialConfig {
                    mode,
                    seq_len,
                    snr_db,
                    seed,
                    lambda: args.model.lambda(),
                    protect_delimiters: args.protect_delimiters.unwrap_or(false),
                    model: model_kind,
                    refine_rounds: args.model.rounds(),
                });
            }
        }
    }
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let experiment = Experiment {
        corpus: &corpus,
        vocab: &vocab,
        model: model.as_ref(),
    };
    let result = sweep_with_jobs(&experiment, &grid, trials, jobs)?;
    let report = aggregate(&result);

    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_trials_csv(&out.join("trials.csv"), &result)?;
    write_aggregate_csv(&out.join("aggregate.csv"), &report)?;
    write_fig3_csv(&out.join("fig3_prr_vs_len.csv"), &report)?;
    write_fig4_csv(&out.join("fig4_mra_by_mode.csv"), &report)?;
    let header = ReportHeader {
        corpus: corpus.name.clone(),
        vocab_size: vocab.len(),
        model: model.name(),
        seed,
        trials,
        target_corruption: target,
        grid,
    };
    write_report(&out.join("report.txt"), &header, &report)?;
    eprintln!(
        "wrote {} trials to {}",
        result.cells.iter().map(|(_, r)| r.len()).sum::<usize>(),
        out.display()
    );
    Ok(())
}

impl CorrectArgs {
    fn merge(self, file: CorrectArgs) -> CorrectArgs {
        CorrectArgs {
            config: self.config,
            input: self.input.or(file.input),
            model: self.model.merge(file.model),
            mode: self.mode.or(file.mode),
        }
    }
}

pub fn cmd_correct(args: CorrectArgs, stdout: &mut dyn Write) -> anyhow::Result<()> {
    let file: CorrectArgs = read_config(args.config.as_deref())?;
    let args = args.merge(file);
    let input = args.input.clone().ok_or_else(|| usage("--input is required"))?;
    let mode = args.mode.unwrap_or(Mode::Fused);
    args.model.validate(mode != Mode::Llr)?;

    let bytes = fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
    let frames = decode_stream(&bytes)?;
    let vocab = args.model.load_vocab()?;
    let corpus = args.model.corpus.as_ref().map(Corpus::load).transpose()?;
    let model = match mode {
        Mode::Llr => None,
        _ => Some(args.model.semantic_model(&vocab, corpus.as_ref())?),
    };
    let strategy = match mode {
        Mode::Llr => Strategy::Physical,
        Mode::Semantic => Strategy::Semantic,
        Mode::Fused => Strategy::Fused {
            lambda: args.model.lambda(),
        },
    };
    let options = CorrectionOptions {
        strategy,
        rounds: args.model.rounds(),
    };
    for frame in &frames {
        let masked = receive_frame(frame, &vocab);
        let outcome = correct_message(&masked, model.as_deref().map(|m| m as &dyn SemanticModel), &vocab, options)?;
        stdout.write_all(&outcome.corrected_payload)?;
        stdout.write_all(b"\n")?;
    }
    Ok(())
}

pub fn cmd_frame(command: FrameCommand, stdout: &mut dyn Write) -> anyhow::Result<()> {
    match command {
        FrameCommand::Encode { input, output } => {
            let text = fs::read_to_string(&input).with_context(|| format!("reading {}", input.display()))?;
            let frames = from_dump(&text)?;
            let bytes = encode_stream(&frames)?;
            fs::write(&output, bytes).with_context(|| format!("writing {}", output.display()))?;
        }
        FrameCommand::Decode { input, output } => {
            let bytes = fs::read(&input).with_context(|| format!("reading {}", input.display()))?;
            let frames = decode_stream(&bytes)?;
            let text = to_dump(&frames);
            match output {
                Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => stdout.write_all(text.as_bytes())?,
            }
        }
    }
    Ok(())
}

pub fn cmd_transmit(args: TransmitArgs) -> anyhow::Result<()> {
    let messages: Vec<Vec<u8>> = match (&args.text, &args.input) {
        (Some(text), None) => vec![text.as_bytes().to_vec()],
        (None, Some(path)) => fs::read(path)
            .with_context(|| format!("reading {}", path.display()))?
            .split(|&b| b == b'\n')
            .filter(|l| !l.is_empty())
            .map(<[u8]>::to_vec)
            .collect(),
        _ => return Err(usage("one of --text or --input is required")),
    };
    if !args.snr_db.is_finite() {
        return Err(usage("--snr-db must be finite"));
    }
    let sigma = snr_db_to_sigma(args.snr_db);
    let frames = messages
        .iter()
        .enumerate()
        .map(|(i, m)| transmit_frame(m, &ChannelParams::for_trial(sigma, args.seed, i as u64), args.protect_delimiters))
        .collect::<Result<Vec<_>, FrameError>>()?;
    fs::write(&args.output, encode_stream(&frames)?)
        .with_context(|| format!("writing {}", args.output.display()))?;
    Ok(())
}

pub fn cmd_ngram(args: NgramArgs) -> anyhow::Result<()> {
    if !(args.k > 0.0 && args.k.is_finite()) {
        return Err(usage("--k must be positive"));
    }
    let vocab = load_vocabulary(&args.vocab)?;
    let model = if args.full {
        let mut m = crate::semantic::train_ngram(&args.corpus, &vocab)?;
        m.set_k(args.k);
        m
    } else {
        NgramModel::train(Corpus::load(&args.corpus)?.train_segments(), &vocab, args.k)
    };
    model.save(&args.out)?;
    Ok(())
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let mut stdout = std::io::stdout().lock();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Correct(a) => cmd_correct(a, &mut stdout),
        Command::Frame(c) => cmd_frame(c, &mut stdout),
        Command::Transmit(a) => cmd_transmit(a),
        Command::Ngram(a) => cmd_ngram(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}
