//! Downstream metrics: OOD-detection AUROC, expected calibration error,
//! accuracy-rejection curves and credal-set size summaries.

use thiserror::Error;

use crate::measures::pil;
use crate::simplex::{BoxCredalSet, ProbVector};

/// Default number of confidence bins for [`ece`].
pub const ECE_BINS: usize = 10;
/// Rejection-rate grid: `0, 1/AR_GRID, ..., 1`.
pub const AR_GRID: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("AUROC needs both in-distribution and OOD samples (got {id} ID, {ood} OOD)")]
    SingleClass { id: usize, ood: usize },
    #[error("score at position {0} is not finite")]
    NonFiniteScore(usize),
    #[error("no samples")]
    Empty,
    #[error("length mismatch: {0} scores vs {1} flags")]
    LengthMismatch(usize, usize),
    #[error("label {label} at position {index} is not a class index")]
    BadLabel { index: usize, label: usize },
    #[error("base accuracy is already 100%, normalized AR is undefined")]
    PerfectBaseAccuracy,
    #[error("bin count must be positive")]
    NoBins,
}

/// An uncertainty score with its ground truth: `ood = true` for
/// out-of-distribution inputs. Higher scores should mean "more OOD".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBinarySample {
    pub score: f64,
    pub ood: bool,
}

/// Rank-based AUROC (Mann-Whitney U with ties counted half).
pub fn auroc(samples: &[ScoredBinarySample]) -> Result<f64, EvalError> {
    if let Some(i) = samples.iter().position(|s| !s.score.is_finite()) {
        return Err(EvalError::NonFiniteScore(i));
    }
    let n_ood = samples.iter().filter(|s| s.ood).count();
    let n_id = samples.len() - n_ood;
    if n_ood == 0 || n_id == 0 {
        return Err(EvalError::SingleClass { id: n_id, ood: n_ood });
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].score.total_cmp(&samples[b].score));

    // Sum of (1-based, tie-averaged) ranks of the OOD samples, kept doubled so
    // every quantity stays an exact integer.
    let mut twice_rank_sum: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let score = samples[order[start]].score;
        let mut end = start;
        while end < order.len() && samples[order[end]].score == score {
            end += 1;
        }
        let twice_mid_rank = (start + 1 + end) as u64;
        let ood_in_group = order[start..end].iter().filter(|&&i| samples[i].ood).count() as u64;
        twice_rank_sum += twice_mid_rank * ood_in_group;
        start = end;
    }
    let (n_ood, n_id) = (n_ood as u64, n_id as u64);
    let twice_u = twice_rank_sum - n_ood * (n_ood + 1);
    Ok(twice_u as f64 / 2.0 / (n_ood as f64 * n_id as f64))
}

/// AUROC with ID scores as negatives and OOD scores as positives.
pub fn auroc_from_scores(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64, EvalError> {
    let samples: Vec<ScoredBinarySample> = id_scores
        .iter()
        .map(|&score| ScoredBinarySample { score, ood: false })
        .chain(ood_scores.iter().map(|&score| ScoredBinarySample { score, ood: true }))
        .collect();
    auroc(&samples)
}

/// Expected calibration error with `bins` equal-width confidence bins. The
/// confidence is the largest probability; a prediction is correct when its
/// arg-max (lowest index on ties) equals the label. Bins are `[g/G, (g+1)/G)`
/// except the last, which also includes 1.
pub fn ece(predictions: &[(ProbVector, usize)], bins: usize) -> Result<f64, EvalError> {
    if predictions.is_empty() {
        return Err(EvalError::Empty);
    }
    if bins == 0 {
        return Err(EvalError::NoBins);
    }
    let mut count = vec![0usize; bins];
    let mut correct = vec![0usize; bins];
    let mut confidence = vec![0.0f64; bins];
    for (index, (p, label)) in predictions.iter().enumerate() {
        if *label >= p.classes() {
            return Err(EvalError::BadLabel { index, label: *label });
        }
        let conf = p.max();
        let g = ((conf * bins as f64) as usize).min(bins - 1);
        count[g] += 1;
        confidence[g] += conf;
        if p.argmax() == *label {
            correct[g] += 1;
        }
    }
    let n = predictions.len() as f64;
    Ok((0..bins)
        .filter(|&g| count[g] > 0)
        .map(|g| {
            let size = count[g] as f64;
            (size / n) * (correct[g] as f64 / size - confidence[g] / size).abs()
        })
        .sum())
}

/// Accuracy (in %) as a function of the rejected fraction.
#[derive(Debug, Clone, PartialEq)]
pub struct ArCurve {
    pub rejection_rates: Vec<f64>,
    pub accuracies: Vec<f64>,
    /// Trapezoidal area under the curve over the rejection grid.
    pub auc: f64,
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// Rejects the `floor(r n)` most uncertain samples (earlier index first among
/// equal scores) at each grid rate `r` and reports the accuracy of the rest.
/// At `r = 1` the accuracy is defined as 100%.
pub fn accuracy_rejection(eu_scores: &[f64], correct: &[bool]) -> Result<ArCurve, EvalError> {
    let n = eu_scores.len();
    if n != correct.len() {
        return Err(EvalError::LengthMismatch(n, correct.len()));
    }
    if n == 0 {
        return Err(EvalError::Empty);
    }
    if let Some(i) = eu_scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore(i));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eu_scores[b].total_cmp(&eu_scores[a]).then(a.cmp(&b)));

    // correct_after[j] = number of correct samples among order[j..].
    let mut correct_after = vec![0usize; n + 1];
    for j in (0..n).rev() {
        correct_after[j] = correct_after[j + 1] + usize::from(correct[order[j]]);
    }

    let mut rates = Vec::with_capacity(AR_GRID + 1);
    let mut accuracies = Vec::with_capacity(AR_GRID + 1);
    for i in 0..=AR_GRID {
        rates.push(i as f64 / AR_GRID as f64);
        if i == AR_GRID {
            accuracies.push(100.0);
            continue;
        }
        let rejected = i * n / AR_GRID;
        let kept = n - rejected;
        accuracies.push(100.0 * correct_after[rejected] as f64 / kept as f64);
    }
    let auc = trapezoid(&rates, &accuracies);
    Ok(ArCurve { rejection_rates: rates, accuracies, auc })
}

/// Relative improvement `(A(r) - A(0)) / (100 - A(0))`, on the same grid.
pub fn normalized_ar(curve: &ArCurve) -> Result<ArCurve, EvalError> {
    let base = *curve.accuracies.first().ok_or(EvalError::Empty)?;
    if base >= 100.0 {
        return Err(EvalError::PerfectBaseAccuracy);
    }
    let accuracies: Vec<f64> = curve.accuracies.iter().map(|a| (a - base) / (100.0 - base)).collect();
    let auc = trapezoid(&curve.rejection_rates, &accuracies);
    Ok(ArCurve { rejection_rates: curve.rejection_rates.clone(), accuracies, auc })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilSummary {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub values: Vec<f64>,
}

pub fn pil_summary(boxes: &[BoxCredalSet]) -> Result<PilSummary, EvalError> {
    if boxes.is_empty() {
        return Err(EvalError::Empty);
    }
    let values: Vec<f64> = boxes.iter().map(pil).collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(PilSummary { mean, std: var.sqrt(), values })
}
