//! Brute-force reference implementations for testing.
//!
//! Deliberately naive and independent of the production code paths: AUC by
//! exhaustive pair enumeration, ECE by scanning every bin's edges, ranks by
//! pairwise counting, Kendall by O(n^2) concordance, gradients by central
//! differences. Only compiled with the `oracles` feature.

use crate::metrics::{BinaryPrediction, ScoredOutcome};

pub fn accuracy(outcomes: &[ScoredOutcome]) -> f64 {
    let mut hits = 0.0;
    for o in outcomes {
        if o.correct {
            hits += 1.0;
        }
    }
    hits / outcomes.len() as f64
}

pub fn brier(outcomes: &[ScoredOutcome]) -> f64 {
    let mut total = 0.0;
    for o in outcomes {
        let gap = o.confidence - f64::from(u8::from(o.correct));
        total += gap * gap;
    }
    total / outcomes.len() as f64
}

/// F1 from the textbook precision/recall definitions, 0 when undefined.
pub fn f1(preds: &[BinaryPrediction]) -> f64 {
    let predicted_pos = preds.iter().filter(|p| p.predicted).count() as f64;
    let actual_pos = preds.iter().filter(|p| p.gold).count() as f64;
    let both = preds.iter().filter(|p| p.predicted && p.gold).count() as f64;
    let precision = if predicted_pos > 0.0 {
        both / predicted_pos
    } else {
        0.0
    };
    let recall = if actual_pos > 0.0 {
        both / actual_pos
    } else {
        0.0
    };
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Mean over all positive/negative pairs of 1 (pos higher), 0.5 (tie), 0.
pub fn auc(outcomes: &[ScoredOutcome]) -> Option<f64> {
    let mut credit = 0.0;
    let mut pairs = 0u64;
    for p in outcomes.iter().filter(|o| o.correct) {
        for n in outcomes.iter().filter(|o| !o.correct) {
            pairs += 1;
            if p.confidence > n.confidence {
                credit += 1.0;
            } else if p.confidence == n.confidence {
                credit += 0.5;
            }
        }
    }
    (pairs > 0).then(|| credit / pairs as f64)
}

/// ECE by checking `lo <= c < hi` (last bin closed) for every bin.
pub fn ece(outcomes: &[ScoredOutcome], bins: usize) -> f64 {
    let n = outcomes.len() as f64;
    let mut total = 0.0;
    for k in 0..bins {
        let lo = k as f64 / bins as f64;
        let hi = (k + 1) as f64 / bins as f64;
        let members: Vec<&ScoredOutcome> = outcomes
            .iter()
            .filter(|o| {
                o.confidence >= lo && (o.confidence < hi || (k == bins - 1 && o.confidence <= hi))
            })
            .collect();
        if members.is_empty() {
            continue;
        }
        let m = members.len() as f64;
        let conf = members.iter().map(|o| o.confidence).sum::<f64>() / m;
        let acc = members.iter().filter(|o| o.correct).count() as f64 / m;
        total += m / n * (acc - conf).abs();
    }
    total
}

/// Rank by counting smaller and equal values.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|&v| {
            let less = values.iter().filter(|&&u| u < v).count() as f64;
            let equal = values.iter().filter(|&&u| u == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// tau-b = (P - Q) / sqrt((P + Q + T) (P + Q + U)), with T and U the pairs
/// tied only in x and only in y.
pub fn kendall(x: &[f64], y: &[f64]) -> f64 {
    let (mut p, mut q, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tx += 1;
            } else if dy == 0.0 {
                ty += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                p += 1;
            } else {
                q += 1;
            }
        }
    }
    (p - q) as f64 / (((p + q + tx) as f64) * ((p + q + ty) as f64)).sqrt()
}

/// Central difference `(f(x + h) - f(x - h)) / 2h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// `(mean, variance)` of `N((1 - gamma)^(T/2) a, 1 - (1 - gamma)^T)`.
pub fn diffusion_moments(a: f64, gamma: f64, steps: u32) -> (f64, f64) {
    let keep = (1.0 - gamma).powf(f64::from(steps));
    (keep.sqrt() * a, 1.0 - keep)
}

/// Mean and unbiased variance.
pub fn sample_moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Standard errors of the sample mean and sample variance of `n` Gaussian
/// draws with variance `var`.
pub fn gaussian_standard_errors(var: f64, n: usize) -> (f64, f64) {
    let n = n as f64;
    ((var / n).sqrt(), var * (2.0 / (n - 1.0)).sqrt())
}
