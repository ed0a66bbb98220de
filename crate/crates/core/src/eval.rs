//! Scores prediction logs with verbalized confidences.
//!
//! For every question the candidate with the highest stated confidence is the
//! model's answer; its confidence is the probability fed to the metrics.
//! Records whose candidates carry no readable confidence are excluded and
//! counted, never imputed.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    accuracy, auc, brier, ece, f1, kendall, spearman, BinStats, BinaryPrediction, PairedSeries,
    ScoredOutcome,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub answer: String,
    pub raw_response: String,
}

/// One question: candidate answers with the model's free-text confidence
/// replies, the gold answer, and optionally the model's internal probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub candidates: Vec<Candidate>,
    pub gold: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub internal_prob: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub f1: f64,
    /// `None` when every scored answer is correct, or every one is wrong.
    pub auc: Option<f64>,
    pub brier: f64,
    pub ece: f64,
    pub ece_bins: usize,
    pub bin_stats: Vec<BinStats>,
    pub spearman: Option<f64>,
    pub kendall: Option<f64>,
    pub n_records: usize,
    pub n_scored: usize,
    pub n_parse_failures: usize,
}

fn percent_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(\d+(?:\.\d+)?)\s*(?:%|percent\b|per\s+cent\b)").unwrap())
}

fn vocab_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?ix)
            \b(?:confidence|confident|certainty|certain|sure|probability|likelihood)\b
            (?:\s*(?:level|score|rating|is|of|at|about|around|approximately|[:=\-]))*
            \s*(?P<after>\d+(?:\.\d+)?)\b
            |
            \b(?P<before>\d+(?:\.\d+)?)\s*(?:/\s*100\s*)?
            (?:confidence|confident|certainty|certain|sure)\b",
        )
        .unwrap()
    })
}

/// Extracts a confidence in `[0, 1]` from free text.
///
/// The last percentage token (`85%`, `85 %`, `85 percent`) in `[0, 100]` wins.
/// Without one, the last bare number in `[0, 100]` next to confidence
/// vocabulary ("confidence: 85") is used.
pub fn parse_confidence(raw: &str) -> Result<f64> {
    let in_range = |s: &str| s.parse::<f64>().ok().filter(|v| (0.0..=100.0).contains(v));
    let last_percent = percent_re()
        .captures_iter(raw)
        .filter_map(|c| in_range(&c[1]))
        .last();
    if let Some(v) = last_percent {
        return Ok(v / 100.0);
    }
    vocab_re()
        .captures_iter(raw)
        .filter_map(|c| {
            c.name("after")
                .or_else(|| c.name("before"))
                .and_then(|m| in_range(m.as_str()))
        })
        .last()
        .map(|v| v / 100.0)
        .ok_or_else(|| Error::Unparseable(raw.to_string()))
}

/// Highest-confidence candidate; ties go to the earliest. Unparseable
/// candidates are skipped.
pub fn select_answer(record: &PredictionRecord) -> Result<(String, f64)> {
    let mut best: Option<(&Candidate, f64)> = None;
    for cand in &record.candidates {
        if let Ok(conf) = parse_confidence(&cand.raw_response) {
            if !matches!(best, Some((_, b)) if conf <= b) {
                best = Some((cand, conf));
            }
        }
    }
    best.map(|(c, conf)| (c.answer.clone(), conf))
        .ok_or_else(|| Error::NoParseableCandidate(record.id.clone()))
}

/// Lowercased, whitespace-collapsed form used for answer matching.
pub fn normalize_answer(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Outcomes extracted from a prediction log, in input order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoredLog {
    pub outcomes: Vec<ScoredOutcome>,
    pub yes_no: Vec<BinaryPrediction>,
    /// `(internal, verbal)` for records that carry an internal probability.
    pub paired: Vec<(f64, f64)>,
    pub n_records: usize,
    pub n_parse_failures: usize,
}

pub fn score_records(records: &[PredictionRecord]) -> ScoredLog {
    let mut log = ScoredLog {
        n_records: records.len(),
        ..Default::default()
    };
    for rec in records {
        let Ok((answer, confidence)) = select_answer(rec) else {
            log.n_parse_failures += 1;
            continue;
        };
        let predicted = normalize_answer(&answer);
        let gold = normalize_answer(&rec.gold);
        log.outcomes.push(ScoredOutcome {
            confidence,
            correct: predicted == gold,
        });
        log.yes_no.push(BinaryPrediction {
            predicted: predicted == "yes",
            gold: gold == "yes",
        });
        if let Some(p) = rec.internal_prob {
            log.paired.push((p, confidence));
        }
    }
    log
}

/// Full metric report over a prediction log.
pub fn evaluate(records: &[PredictionRecord], k_bins: usize) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    for rec in records {
        validate_record(rec)?;
    }
    let log = score_records(records);
    if log.outcomes.is_empty() {
        return Err(Error::EmptyAfterFiltering {
            failures: log.n_parse_failures,
        });
    }
    let (ece_value, bin_stats) = ece(&log.outcomes, k_bins)?;
    let auc = match auc(&log.outcomes) {
        Ok(v) => Some(v),
        Err(Error::DegenerateClasses { .. }) => None,
        Err(e) => return Err(e),
    };
    let (spearman, kendall) = correlations(&log.paired);
    Ok(EvalReport {
        accuracy: accuracy(&log.outcomes)?,
        f1: f1(&log.yes_no)?,
        auc,
        brier: brier(&log.outcomes)?,
        ece: ece_value,
        ece_bins: k_bins,
        bin_stats,
        spearman,
        kendall,
        n_records: log.n_records,
        n_scored: log.outcomes.len(),
        n_parse_failures: log.n_parse_failures,
    })
}

fn correlations(paired: &[(f64, f64)]) -> (Option<f64>, Option<f64>) {
    if paired.len() < 2 {
        return (None, None);
    }
    let (internal, verbal) = paired.iter().copied().unzip();
    match PairedSeries::new(internal, verbal) {
        Ok(series) => (spearman(&series).ok(), kendall(&series).ok()),
        Err(_) => (None, None),
    }
}

fn validate_record(rec: &PredictionRecord) -> Result<()> {
    let bad = |reason: String| Error::InvalidConfig(format!("record {}: {reason}", rec.id));
    if rec.candidates.is_empty() {
        return Err(bad("no candidates".into()));
    }
    if rec.gold.trim().is_empty() {
        return Err(bad("empty gold answer".into()));
    }
    if let Some(p) = rec.internal_prob {
        if !(0.0..=1.0).contains(&p) {
            return Err(bad(format!("internal_prob {p} outside [0, 1]")));
        }
    }
    Ok(())
}
