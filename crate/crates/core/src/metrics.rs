//! Calibration and ranking metrics for verbalized confidence.
//!
//! All functions are pure and permutation-invariant over their input. Ties are
//! handled with mid-ranks everywhere: AUC gives half credit to tied
//! positive/negative pairs, Spearman correlates mid-ranks, Kendall is tau-b.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ECE_BINS: usize = 10;

/// A stated confidence in `[0, 1]` and whether the answer was right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredOutcome {
    pub confidence: f64,
    pub correct: bool,
}

impl ScoredOutcome {
    pub fn new(confidence: f64, correct: bool) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidConfig(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Self {
            confidence,
            correct,
        })
    }
}

/// Predicted and gold label of a yes/no question (`true` = yes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryPrediction {
    pub predicted: bool,
    pub gold: bool,
}

/// One reliability-diagram bin `[lo, hi)` (the last bin is closed).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// `None` for empty bins.
    pub mean_conf: Option<f64>,
    pub mean_acc: Option<f64>,
}

/// Internal vs verbalized confidence for correlation analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedSeries {
    internal: Vec<f64>,
    verbal: Vec<f64>,
}

impl PairedSeries {
    pub fn new(internal: Vec<f64>, verbal: Vec<f64>) -> Result<Self> {
        if internal.len() != verbal.len() {
            return Err(Error::DegenerateSeries(format!(
                "length mismatch {} vs {}",
                internal.len(),
                verbal.len()
            )));
        }
        if internal.len() < 2 {
            return Err(Error::DegenerateSeries("need at least 2 pairs".into()));
        }
        if internal.iter().chain(&verbal).any(|v| !v.is_finite()) {
            return Err(Error::DegenerateSeries("non-finite value".into()));
        }
        Ok(Self { internal, verbal })
    }

    pub fn internal(&self) -> &[f64] {
        &self.internal
    }

    pub fn verbal(&self) -> &[f64] {
        &self.verbal
    }

    pub fn len(&self) -> usize {
        self.internal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.internal.is_empty()
    }
}

fn non_empty<T>(xs: &[T]) -> Result<()> {
    if xs.is_empty() {
        Err(Error::EmptyInput)
    } else {
        Ok(())
    }
}

/// Fraction of correct outcomes.
pub fn accuracy(outcomes: &[ScoredOutcome]) -> Result<f64> {
    non_empty(outcomes)?;
    let hits = outcomes.iter().filter(|o| o.correct).count();
    Ok(hits as f64 / outcomes.len() as f64)
}

/// F1 of the positive ("yes") class. Precision or recall with a zero
/// denominator counts as 0, and F1 is 0 when `P + R = 0`.
pub fn f1(predictions: &[BinaryPrediction]) -> Result<f64> {
    non_empty(predictions)?;
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for p in predictions {
        match (p.predicted, p.gold) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    let ratio = |num: usize, den: usize| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Mean squared gap between confidence and the 0/1 outcome.
pub fn brier(outcomes: &[ScoredOutcome]) -> Result<f64> {
    non_empty(outcomes)?;
    let sum: f64 = outcomes
        .iter()
        .map(|o| {
            let y = if o.correct { 1.0 } else { 0.0 };
            (o.confidence - y).powi(2)
        })
        .sum();
    Ok(sum / outcomes.len() as f64)
}

/// Mid-ranks (1-based; ties get the average of the ranks they span).
pub fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j
        let r = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Probability that a correct outcome is ranked above an incorrect one, via
/// the Mann-Whitney rank statistic.
pub fn auc(outcomes: &[ScoredOutcome]) -> Result<f64> {
    let positives = outcomes.iter().filter(|o| o.correct).count();
    let negatives = outcomes.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateClasses {
            positives,
            negatives,
        });
    }
    let conf: Vec<f64> = outcomes.iter().map(|o| o.confidence).collect();
    let ranks = mid_ranks(&conf);
    let rank_sum: f64 = outcomes
        .iter()
        .zip(&ranks)
        .filter(|(o, _)| o.correct)
        .map(|(_, r)| r)
        .sum();
    let (p, n) = (positives as f64, negatives as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// One ROC operating point: predict "correct" when `confidence >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// ROC curve with one point per distinct confidence, descending, preceded by
/// the `(+inf, 0, 0)` origin. Its trapezoidal area equals [`auc`].
pub fn roc_curve(outcomes: &[ScoredOutcome]) -> Result<Vec<RocPoint>> {
    let positives = outcomes.iter().filter(|o| o.correct).count();
    let negatives = outcomes.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateClasses {
            positives,
            negatives,
        });
    }
    let mut sorted = outcomes.to_vec();
    sorted.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        tpr: 0.0,
        fpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let threshold = sorted[i].confidence;
        while i < sorted.len() && sorted[i].confidence == threshold {
            if sorted[i].correct {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            tpr: tp as f64 / positives as f64,
            fpr: fp as f64 / negatives as f64,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a ROC curve.
pub fn roc_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

/// Lower edge of bin `k` out of `bins`.
#[inline]
fn bin_edge(k: usize, bins: usize) -> f64 {
    k as f64 / bins as f64
}

/// Index of the bin holding `conf`: `lo <= conf < hi`, last bin closed.
pub fn bin_index(conf: f64, bins: usize) -> usize {
    let mut k = ((conf * bins as f64).floor().max(0.0) as usize).min(bins - 1);
    // the floor can land one bin off when conf * bins rounds across an edge
    while k > 0 && conf < bin_edge(k, bins) {
        k -= 1;
    }
    while k + 1 < bins && conf >= bin_edge(k + 1, bins) {
        k += 1;
    }
    k
}

/// Equal-width reliability bins over `[0, 1]`.
pub fn reliability_bins(outcomes: &[ScoredOutcome], bins: usize) -> Result<Vec<BinStats>> {
    if bins == 0 {
        return Err(Error::InvalidConfig("bin count must be >= 1".into()));
    }
    let mut count = vec![0usize; bins];
    let mut conf_sum = vec![0.0f64; bins];
    let mut hits = vec![0usize; bins];
    for o in outcomes {
        let k = bin_index(o.confidence, bins);
        count[k] += 1;
        conf_sum[k] += o.confidence;
        if o.correct {
            hits[k] += 1;
        }
    }
    Ok((0..bins)
        .map(|k| {
            let n = count[k];
            BinStats {
                lo: bin_edge(k, bins),
                hi: bin_edge(k + 1, bins),
                count: n,
                mean_conf: (n > 0).then(|| conf_sum[k] / n as f64),
                mean_acc: (n > 0).then(|| hits[k] as f64 / n as f64),
            }
        })
        .collect())
}

/// `sum_k |B_k|/N * |acc(B_k) - conf(B_k)|` from precomputed bins.
///
/// [`ece`] calls this too, so recomputing from the returned bins is exact.
pub fn ece_from_bins(bins: &[BinStats]) -> f64 {
    let total: usize = bins.iter().map(|b| b.count).sum();
    if total == 0 {
        return 0.0;
    }
    bins.iter()
        .filter_map(|b| match (b.mean_acc, b.mean_conf) {
            (Some(acc), Some(conf)) => Some(b.count as f64 / total as f64 * (acc - conf).abs()),
            _ => None,
        })
        .sum()
}

/// Expected calibration error with `bins` equal-width bins, plus the bins.
pub fn ece(outcomes: &[ScoredOutcome], bins: usize) -> Result<(f64, Vec<BinStats>)> {
    non_empty(outcomes)?;
    let stats = reliability_bins(outcomes, bins)?;
    Ok((ece_from_bins(&stats), stats))
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn check_not_constant(series: &PairedSeries) -> Result<()> {
    let constant = |xs: &[f64]| xs.iter().all(|&v| v == xs[0]);
    if constant(&series.internal) {
        return Err(Error::DegenerateSeries(
            "internal series is constant".into(),
        ));
    }
    if constant(&series.verbal) {
        return Err(Error::DegenerateSeries("verbal series is constant".into()));
    }
    Ok(())
}

/// Spearman's rho: Pearson correlation of mid-ranks.
pub fn spearman(series: &PairedSeries) -> Result<f64> {
    check_not_constant(series)?;
    let rx = mid_ranks(&series.internal);
    let ry = mid_ranks(&series.verbal);
    pearson(&rx, &ry).ok_or_else(|| Error::DegenerateSeries("zero rank variance".into()))
}

/// Sum of `t (t - 1) / 2` over runs of equal values in a sorted slice.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as u64;
        total += t * (t - 1) / 2;
        i = j;
    }
    total
}

/// Stable merge sort by value, returning the number of strict inversions.
fn count_inversions(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = count_inversions(&mut v[..mid], buf) + count_inversions(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            // v[j] jumps over every remaining left element
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall's tau-b in `O(n log n)` (Knight's algorithm).
pub fn kendall(series: &PairedSeries) -> Result<f64> {
    check_not_constant(series)?;
    let n = series.len() as u64;
    let mut pairs: Vec<(f64, f64)> = series
        .internal
        .iter()
        .copied()
        .zip(series.verbal.iter().copied())
        .collect();
    pairs.sort_by(|a, b| match a.0.total_cmp(&b.0) {
        Ordering::Equal => a.1.total_cmp(&b.1),
        o => o,
    });
    let total = n * (n - 1) / 2;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ties_x = tied_pairs(&xs);
    let ties_xy = tied_pairs(&pairs);
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = Vec::with_capacity(ys.len());
    let swaps = count_inversions(&mut ys, &mut buf);
    let ties_y = tied_pairs(&ys);

    // concordant - discordant
    let numerator =
        total as i128 - ties_x as i128 - ties_y as i128 + ties_xy as i128 - 2 * swaps as i128;
    let denom = (((total - ties_x) as f64) * ((total - ties_y) as f64)).sqrt();
    Ok((numerator as f64 / denom).clamp(-1.0, 1.0))
}

fn csv_float(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v}")
    }
}

/// Writes `threshold,tpr,fpr` rows.
pub fn write_roc_csv(mut w: impl Write, points: &[RocPoint]) -> std::io::Result<()> {
    writeln!(w, "threshold,tpr,fpr")?;
    for p in points {
        writeln!(w, "{},{},{}", csv_float(p.threshold), p.tpr, p.fpr)?;
    }
    Ok(())
}

/// Writes `bin_lo,bin_hi,count,mean_conf,mean_acc` rows; empty bins leave the
/// means blank.
pub fn write_reliability_csv(mut w: impl Write, bins: &[BinStats]) -> std::io::Result<()> {
    writeln!(w, "bin_lo,bin_hi,count,mean_conf,mean_acc")?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for b in bins {
        writeln!(
            w,
            "{},{},{},{},{}",
            b.lo,
            b.hi,
            b.count,
            opt(b.mean_conf),
            opt(b.mean_acc)
        )?;
    }
    Ok(())
}

/// Writes `roc.csv` (when both classes are present) and `reliability.csv` into
/// `dir`. Returns whether the ROC file was written.
pub fn export_curves(
    dir: impl AsRef<Path>,
    outcomes: &[ScoredOutcome],
    bins: usize,
) -> Result<bool> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::unwritable(dir, e))?;
    let stats = reliability_bins(outcomes, bins)?;
    let rel_path = dir.join("reliability.csv");
    let mut buf = Vec::new();
    write_reliability_csv(&mut buf, &stats).map_err(|e| Error::Internal(e.to_string()))?;
    std::fs::write(&rel_path, buf).map_err(|e| Error::unwritable(&rel_path, e))?;

    let roc_path = dir.join("roc.csv");
    match roc_curve(outcomes) {
        Ok(points) => {
            let mut buf = Vec::new();
            write_roc_csv(&mut buf, &points).map_err(|e| Error::Internal(e.to_string()))?;
            std::fs::write(&roc_path, buf).map_err(|e| Error::unwritable(&roc_path, e))?;
            Ok(true)
        }
        Err(Error::DegenerateClasses { .. }) => {
            log::warn!("ROC curve skipped: outcomes contain a single class");
            Ok(false)
        }
        Err(e) => Err(e),
    }
}
