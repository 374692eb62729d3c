//! Ensemble training with top-delta loss selection.
//!
//! Each member `i` gets its own `delta_i`, interpolated uniformly between the
//! global `delta_g` and 1. In every mini-batch only the `floor(delta_i * eta)`
//! highest-loss samples contribute to the gradient step, which amounts to an
//! implicit adversarial reweighting of the batch (selected samples get weight
//! `1/delta_i`, the rest 0). With `delta_i = 1` the step is plain ERM.

mod mlp;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use mlp::{backward_batch, mean_loss, Activations, DenseLayer, Gradients, MlpModel};

use crate::data::Dataset;
use crate::simplex::{MemberSet, ProbVector};

/// Probabilities are floored at this value before taking the log in the loss.
pub const LOSS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrainError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("delta_g must lie in [0.5, 1], got {0}")]
    DeltaOutOfRange(f64),
    #[error("selection fraction must lie in (0, 1], got {0}")]
    BadSelectionFraction(f64),
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("row {row}: label {label} is not a class index in [0, {classes})")]
    LabelOutOfRange { row: usize, label: i64, classes: usize },
    #[error("empty batch")]
    EmptyBatch,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("loss at position {0} is not finite")]
    NonFiniteLoss(usize),
    #[error("member {member} diverged at epoch {epoch}, batch {batch}")]
    Diverged { member: usize, epoch: usize, batch: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub delta_g: f64,
    pub ensemble_size: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    pub layer_dims: Vec<usize>,
    pub shuffle: bool,
}

impl TrainConfig {
    /// Defaults: `delta_g = 0.5`, five members, batches of 128, 50 epochs of
    /// SGD with momentum 0.9 at learning rate 0.05, two hidden layers of 64.
    pub fn for_shape(input_dim: usize, classes: usize) -> Self {
        Self {
            delta_g: 0.5,
            ensemble_size: 5,
            batch_size: 128,
            epochs: 50,
            learning_rate: 0.05,
            momentum: 0.9,
            seed: 0,
            layer_dims: vec![input_dim, 64, 64, classes],
            shuffle: true,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(0.5..=1.0).contains(&self.delta_g) {
            return Err(TrainError::DeltaOutOfRange(self.delta_g));
        }
        let bad = |msg: &str| Err(TrainError::InvalidConfig(msg.to_string()));
        if self.ensemble_size == 0 {
            return bad("ensemble_size must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        MlpModel::zeros(&self.layer_dims).map(|_| ())
    }

    pub fn classes(&self) -> usize {
        *self.layer_dims.last().unwrap_or(&0)
    }
}

/// Trained members plus everything needed to reproduce them.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleArtifact {
    pub members: Vec<MlpModel>,
    pub deltas: Vec<f64>,
    pub config: TrainConfig,
    /// Per member, the mean selected loss of every batch step.
    pub loss_traces: Vec<Vec<f64>>,
}

impl EnsembleArtifact {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// `delta_i = (1 - delta_g) / (M - 1) * (i - 1) + delta_g` for `i = 1..M`.
/// With one member the schedule is just `[delta_g]`.
///
/// `delta_g` is read as the shortest decimal that round-trips to it (0.7 is
/// 7/10) and each `delta_i` is the correctly rounded value of the exact
/// rational, so Table 7 entries such as 0.775 come out as the nearest double
/// rather than an ulp below it. The last element is exactly 1.
pub fn delta_schedule(delta_g: f64, m: usize) -> Result<Vec<f64>, TrainError> {
    if !(0.5..=1.0).contains(&delta_g) {
        return Err(TrainError::DeltaOutOfRange(delta_g));
    }
    if m == 0 {
        return Err(TrainError::InvalidConfig("ensemble size must be positive".into()));
    }
    if m == 1 {
        return Ok(vec![delta_g]);
    }
    let steps = (m - 1) as u64;
    let exact = decimal_fraction(delta_g).and_then(|(num, den)| {
        let total = den.checked_mul(steps)?;
        // Both operands below 2^53 make the single division correctly rounded.
        (total < 1 << 53).then_some((num, den, total))
    });
    let mut deltas: Vec<f64> = (0..m as u64)
        .map(|i| match exact {
            Some((num, den, total)) => (num * steps + (den - num) * i) as f64 / total as f64,
            None => (1.0 - delta_g) / steps as f64 * i as f64 + delta_g,
        })
        .collect();
    deltas[m - 1] = 1.0;
    Ok(deltas)
}

/// `x` as `num / 10^k` from its shortest round-trip decimal form, if that form
/// has at most 15 fractional digits and no exponent.
fn decimal_fraction(x: f64) -> Option<(u64, u64)> {
    let text = x.to_string();
    let (int, frac) = text.split_once('.').unwrap_or((&text, ""));
    if frac.len() > 15 || text.contains(['e', 'E', '-']) {
        return None;
    }
    let den = 10u64.pow(frac.len() as u32);
    let num = int.parse::<u64>().ok()?.checked_mul(den)?.checked_add(if frac.is_empty() { 0 } else { frac.parse().ok()? })?;
    Some((num, den))
}

/// Number of samples kept from a batch of `batch` at fraction `delta`:
/// `max(1, floor(delta * batch))`. A 1e-9 guard absorbs products such as
/// `0.29 * 100 = 28.999999999999996`.
pub fn selection_count(delta: f64, batch: usize) -> usize {
    ((delta * batch as f64 + 1e-9).floor() as usize).clamp(1, batch)
}

/// Indices of the `selection_count(delta, n)` largest losses, in descending
/// loss order; equal losses are ordered by index.
pub fn select_top_delta(losses: &[f64], delta: f64) -> Result<Vec<usize>, TrainError> {
    if losses.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(TrainError::BadSelectionFraction(delta));
    }
    if let Some(i) = losses.iter().position(|l| !l.is_finite()) {
        return Err(TrainError::NonFiniteLoss(i));
    }
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]).then(a.cmp(&b)));
    order.truncate(selection_count(delta, losses.len()));
    Ok(order)
}

/// Cross-entropy `-ln p[label]`, with `p[label]` floored at [`LOSS_FLOOR`].
pub fn ce_loss(p: &ProbVector, label: usize) -> Result<f64, TrainError> {
    if label >= p.classes() {
        return Err(TrainError::LabelOutOfRange { row: 0, label: label as i64, classes: p.classes() });
    }
    Ok(-p[label].max(LOSS_FLOOR).ln())
}

#[derive(Debug, Clone, Copy)]
enum Selection {
    All,
    TopDelta(f64),
}

fn checked_labels(data: &Dataset, classes: usize) -> Result<Vec<usize>, TrainError> {
    data.labels()
        .iter()
        .enumerate()
        .map(|(row, &label)| {
            if label < 0 || label as usize >= classes {
                Err(TrainError::LabelOutOfRange { row, label, classes })
            } else {
                Ok(label as usize)
            }
        })
        .collect()
}

fn member_rng(seed: u64, member: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(member as u64))
}

fn run_member(
    config: &TrainConfig,
    data: &Dataset,
    labels: &[usize],
    member: usize,
    selection: Selection,
) -> Result<(MlpModel, Vec<f64>), TrainError> {
    let mut rng = member_rng(config.seed, member);
    let mut model = MlpModel::init(&config.layer_dims, &mut rng)?;
    let mut velocity = Gradients::zeros_like(&model);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let batches = data.len().div_ceil(config.batch_size);
    let mut trace = Vec::with_capacity(config.epochs * batches);

    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        for (batch, rows) in order.chunks(config.batch_size).enumerate() {
            let acts: Vec<Activations> = rows.iter().map(|&r| model.forward_unchecked(data.row(r))).collect();
            let batch_labels: Vec<usize> = rows.iter().map(|&r| labels[r]).collect();
            let losses: Vec<f64> = acts
                .iter()
                .zip(&batch_labels)
                .map(|(a, &y)| -a.probs[y].max(LOSS_FLOOR).ln())
                .collect();
            if losses.iter().any(|l| !l.is_finite()) {
                return Err(TrainError::Diverged { member, epoch, batch });
            }
            let selected = match selection {
                Selection::All => (0..rows.len()).collect(),
                Selection::TopDelta(delta) => {
                    let mut s = select_top_delta(&losses, delta)?;
                    // Index order makes delta = 1 bitwise identical to the ERM path.
                    s.sort_unstable();
                    s
                }
            };
            trace.push(selected.iter().map(|&i| losses[i]).sum::<f64>() / selected.len() as f64);
            let grads = mlp::backward_cached(&model, &acts, &batch_labels, &selected);
            model.apply_update(&mut velocity, &grads, config.learning_rate, config.momentum);
        }
        if !model.is_finite() {
            return Err(TrainError::Diverged { member, epoch, batch: batches - 1 });
        }
    }
    Ok((model, trace))
}

/// Trains one member with top-`delta` selection. The member's RNG stream
/// (initialization and shuffling) is seeded with `config.seed + member`.
pub fn train_member(
    config: &TrainConfig,
    data: &Dataset,
    delta: f64,
    member: usize,
) -> Result<(MlpModel, Vec<f64>), TrainError> {
    config.validate()?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(TrainError::BadSelectionFraction(delta));
    }
    let labels = prepare(config, data)?;
    run_member(config, data, &labels, member, Selection::TopDelta(delta))
}

fn prepare(config: &TrainConfig, data: &Dataset) -> Result<Vec<usize>, TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if data.dim() != config.layer_dims[0] {
        return Err(TrainError::ShapeMismatch { expected: config.layer_dims[0], got: data.dim() });
    }
    checked_labels(data, config.classes())
}

fn train_all(
    config: &TrainConfig,
    data: &Dataset,
    selections: &[Selection],
) -> Result<(Vec<MlpModel>, Vec<Vec<f64>>), TrainError> {
    let labels = prepare(config, data)?;
    let job = |(member, sel): (usize, &Selection)| run_member(config, data, &labels, member, *sel);

    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        selections.par_iter().enumerate().map(job).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = selections.iter().enumerate().map(job).collect();

    let mut members = Vec::with_capacity(results.len());
    let mut traces = Vec::with_capacity(results.len());
    for r in results {
        let (m, t) = r?;
        members.push(m);
        traces.push(t);
    }
    Ok((members, traces))
}

/// Trains the ensemble with the interpolated delta schedule. Members train in
/// parallel when the `parallel` feature is on; output does not depend on the
/// number of worker threads.
pub fn train_ensemble(config: &TrainConfig, data: &Dataset) -> Result<EnsembleArtifact, TrainError> {
    config.validate()?;
    let deltas = delta_schedule(config.delta_g, config.ensemble_size)?;
    train_with_deltas(config, data, deltas)
}

/// Like [`train_ensemble`] but with an explicit per-member delta list (its
/// length overrides `config.ensemble_size`).
pub fn train_with_deltas(config: &TrainConfig, data: &Dataset, deltas: Vec<f64>) -> Result<EnsembleArtifact, TrainError> {
    config.validate()?;
    if let Some(&d) = deltas.iter().find(|&&d| !(d > 0.0 && d <= 1.0)) {
        return Err(TrainError::BadSelectionFraction(d));
    }
    let selections: Vec<Selection> = deltas.iter().map(|&d| Selection::TopDelta(d)).collect();
    let (members, loss_traces) = train_all(config, data, &selections)?;
    let config = TrainConfig { ensemble_size: deltas.len(), ..config.clone() };
    Ok(EnsembleArtifact { members, deltas, config, loss_traces })
}

/// Plain deep ensemble: every member minimizes the full-batch mean loss, with
/// no loss ranking at all. Seeds follow the same per-member rule as
/// [`train_ensemble`].
pub fn train_deep_ensemble(config: &TrainConfig, data: &Dataset) -> Result<EnsembleArtifact, TrainError> {
    config.validate()?;
    let selections = vec![Selection::All; config.ensemble_size];
    let (members, loss_traces) = train_all(config, data, &selections)?;
    let config = TrainConfig { delta_g: 1.0, ..config.clone() };
    Ok(EnsembleArtifact { members, deltas: vec![1.0; selections.len()], config, loss_traces })
}

/// The members' predictions for `x`, in member order.
pub fn predict_ensemble(artifact: &EnsembleArtifact, x: &[f64]) -> Result<MemberSet, TrainError> {
    let members = artifact.members.iter().map(|m| m.predict(x)).collect::<Result<Vec<_>, _>>()?;
    MemberSet::new(members).map_err(|e| TrainError::InvalidConfig(e.to_string()))
}
