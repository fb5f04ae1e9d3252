use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EvalError, Mode, SweepResult, TrialConfig};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct CellMetrics {
    pub mode: Mode,
    pub seq_len: usize,
    pub snr_db: f64,
    pub trials: usize,
    pub exact_matches: usize,
    pub prr: f64,
    pub prr_ci95: f64,
    /// `None` when the cell produced no masks.
    pub mra: Option<f64>,
    pub mra_ci95: Option<f64>,
    pub total_masks: usize,
    pub resolved_correct: usize,
    pub silent_errors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub cells: Vec<CellMetrics>,
}

impl MetricsReport {
    pub fn cell(&self, mode: Mode, seq_len: usize) -> Option<&CellMetrics> {
        self.cells.iter().find(|c| c.mode == mode && c.seq_len == seq_len)
    }
}

fn half_width(p: f64, n: usize) -> f64 {
    Z95 * (p * (1.0 - p) / n as f64).sqrt()
}

pub fn aggregate(result: &SweepResult) -> MetricsReport {
    let cells = result
        .cells
        .iter()
        .map(|(cfg, rows)| {
            let trials = rows.len();
            let exact_matches = rows.iter().filter(|r| r.exact_match).count();
            let total_masks: usize = rows.iter().map(|r| r.n_masks).sum();
            let resolved_correct: usize = rows.iter().map(|r| r.n_resolved_correct).sum();
            let prr = exact_matches as f64 / trials.max(1) as f64;
            let mra = (total_masks > 0).then(|| resolved_correct as f64 / total_masks as f64);
            CellMetrics {
                mode: cfg.mode,
                seq_len: cfg.seq_len,
                snr_db: cfg.snr_db,
                trials,
                exact_matches,
                prr,
                prr_ci95: half_width(prr, trials.max(1)),
                mra,
                mra_ci95: mra.map(|p| half_width(p, total_masks)),
                total_masks,
                resolved_correct,
                silent_errors: rows.iter().map(|r| r.n_silent_errors).sum(),
            }
        })
        .collect();
    MetricsReport { cells }
}

fn real(x: f64) -> String {
    format!("{x:.6}")
}

fn snr(x: f64) -> String {
    format!("{x:.3}")
}

fn opt(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

fn io_err(path: &Path, source: std::io::Error) -> EvalError {
    EvalError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// One row per trial, in grid then trial-index order.
pub fn write_trials_csv(path: &Path, result: &SweepResult) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "mode",
        "seq_len",
        "snr_db",
        "trial_idx",
        "n_words",
        "n_masks",
        "n_resolved_correct",
        "n_silent_errors",
        "exact_match",
    ])?;
    for (cfg, rows) in &result.cells {
        for r in rows {
            w.write_record([
                cfg.mode.to_string(),
                cfg.seq_len.to_string(),
                snr(cfg.snr_db),
                r.trial_idx.to_string(),
                r.n_words.to_string(),
                r.n_masks.to_string(),
                r.n_resolved_correct.to_string(),
                r.n_silent_errors.to_string(),
                (r.exact_match as u8).to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_aggregate_csv(path: &Path, report: &MetricsReport) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "mode",
        "seq_len",
        "snr_db",
        "trials",
        "prr",
        "prr_ci95",
        "mra",
        "mra_ci95",
        "total_masks",
    ])?;
    for c in &report.cells {
        w.write_record([
            c.mode.to_string(),
            c.seq_len.to_string(),
            snr(c.snr_db),
            c.trials.to_string(),
            real(c.prr),
            real(c.prr_ci95),
            opt(c.mra),
            opt(c.mra_ci95),
            c.total_masks.to_string(),
        ])?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// PRR against sequence length, fused cells only.
pub fn write_fig3_csv(path: &Path, report: &MetricsReport) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["seq_len", "snr_db", "prr", "prr_ci95", "trials"])?;
    let mut cells: Vec<&CellMetrics> = report.cells.iter().filter(|c| c.mode == Mode::Fused).collect();
    cells.sort_by(|a, b| (a.seq_len, a.snr_db).partial_cmp(&(b.seq_len, b.snr_db)).unwrap());
    for c in cells {
        w.write_record([
            c.seq_len.to_string(),
            snr(c.snr_db),
            real(c.prr),
            real(c.prr_ci95),
            c.trials.to_string(),
        ])?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// MRA by mode for each length.
pub fn write_fig4_csv(path: &Path, report: &MetricsReport) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["seq_len", "snr_db", "mode", "mra", "mra_ci95", "total_masks"])?;
    let mut cells: Vec<&CellMetrics> = report.cells.iter().collect();
    cells.sort_by(|a, b| {
        (a.seq_len, a.snr_db, a.mode)
            .partial_cmp(&(b.seq_len, b.snr_db, b.mode))
            .unwrap()
    });
    for c in cells {
        w.write_record([
            c.seq_len.to_string(),
            snr(c.snr_db),
            c.mode.to_string(),
            opt(c.mra),
            opt(c.mra_ci95),
            c.total_masks.to_string(),
        ])?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Experiment description written at the top of `report.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportHeader {
    pub corpus: String,
    pub vocab_size: usize,
    pub model: String,
    pub seed: u64,
    pub trials: usize,
    /// Target word-corruption fraction when σ was calibrated.
    pub target_corruption: Option<f64>,
    pub grid: Vec<TrialConfig>,
}

pub fn write_report(path: &Path, header: &ReportHeader, report: &MetricsReport) -> Result<(), EvalError> {
    let mut out = String::new();
    writeln!(out, "corpus: {}", header.corpus).unwrap();
    writeln!(out, "vocabulary: {} words", header.vocab_size).unwrap();
    writeln!(out, "semantic model: {}", header.model).unwrap();
    writeln!(out, "master seed: {}", header.seed).unwrap();
    writeln!(out, "trials per cell: {}", header.trials).unwrap();
    if let Some(t) = header.target_corruption {
        writeln!(out, "calibrated for expected word corruption: {t:.4}").unwrap();
    }
    let mut snrs: Vec<f64> = header.grid.iter().map(|c| c.snr_db).collect();
    snrs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    snrs.dedup();
    for s in snrs {
        writeln!(
            out,
            "operating point: Eb/N0 {} dB, sigma {:.6}",
            snr(s),
            crate::channel::snr_db_to_sigma(s)
        )
        .unwrap();
    }
    if let Some(cfg) = header.grid.first() {
        writeln!(
            out,
            "lambda: {}  protect delimiters: {}  refine rounds: {}",
            cfg.lambda, cfg.protect_delimiters, cfg.refine_rounds
        )
        .unwrap();
    }
    writeln!(out).unwrap();
    writeln!(
        out,
        "{:<9} {:>7} {:>9} {:>8} {:>9} {:>9} {:>8} {:>7}",
        "mode", "seq_len", "snr_db", "prr", "mra", "masks", "resolved", "silent"
    )
    .unwrap();
    for c in &report.cells {
        writeln!(
            out,
            "{:<9} {:>7} {:>9} {:>8.4} {:>9} {:>9} {:>8} {:>7}",
            c.mode.as_str(),
            c.seq_len,
            snr(c.snr_db),
            c.prr,
            c.mra.map(|m| format!("{m:.4}")).unwrap_or_else(|| "-".into()),
            c.total_masks,
            c.resolved_correct,
            c.silent_errors
        )
        .unwrap();
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}
