//! Dense feed-forward classifier: rectifier hidden layers, softmax output,
//! cross-entropy gradients by hand.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::TrainError;
use crate::simplex::{softmax_unchecked, ProbVector};

/// One affine layer, `out = weights * in + bias`, weights row-major
/// `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    fn apply(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.inputs).zip(&self.bias) {
            let dot: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum();
            out.push(dot + b);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<DenseLayer>,
}

/// Inputs to every layer (the raw features, then post-rectifier hidden
/// activations) and the output probabilities of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    pub layer_inputs: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
}

impl MlpModel {
    /// Zero biases, weights drawn from `N(0, 2 / fan_in)`.
    pub fn init<R: Rng + ?Sized>(layer_dims: &[usize], rng: &mut R) -> Result<Self, TrainError> {
        check_dims(layer_dims)?;
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let (inputs, outputs) = (w[0], w[1]);
                let normal = Normal::new(0.0, (2.0 / inputs as f64).sqrt()).expect("positive std");
                let weights = (0..inputs * outputs).map(|_| normal.sample(rng)).collect();
                DenseLayer { inputs, outputs, weights, bias: vec![0.0; outputs] }
            })
            .collect();
        Ok(Self { layers })
    }

    /// All-zero parameters; predicts the uniform distribution everywhere.
    pub fn zeros(layer_dims: &[usize]) -> Result<Self, TrainError> {
        check_dims(layer_dims)?;
        Ok(Self { layers: layer_dims.windows(2).map(|w| DenseLayer::zeros(w[0], w[1])).collect() })
    }

    pub fn from_layers(layers: Vec<DenseLayer>) -> Result<Self, TrainError> {
        if layers.is_empty() {
            return Err(TrainError::InvalidConfig("a model needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs || l.inputs == 0 || l.outputs == 0 {
                return Err(TrainError::InvalidConfig(format!("layer {i} has inconsistent shapes")));
            }
            if i > 0 && layers[i - 1].outputs != l.inputs {
                return Err(TrainError::InvalidConfig(format!("layer {i} expects {} inputs, previous layer gives {}", l.inputs, layers[i - 1].outputs)));
            }
            if l.weights.iter().chain(&l.bias).any(|x| !x.is_finite()) {
                return Err(TrainError::InvalidConfig(format!("layer {i} has non-finite parameters")));
            }
        }
        if layers.last().unwrap().outputs < 2 {
            return Err(TrainError::InvalidConfig("need at least 2 output classes".into()));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs).chain(self.layers.iter().map(|l| l.outputs)).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn classes(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameters in layer order, weights before bias.
    pub fn params(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
    }

    #[cfg(test)]
    pub(crate) fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for l in &mut self.layers {
            if index < l.weights.len() {
                return &mut l.weights[index];
            }
            index -= l.weights.len();
            if index < l.bias.len() {
                return &mut l.bias[index];
            }
            index -= l.bias.len();
        }
        panic!("parameter index out of range");
    }

    /// Forward pass keeping what [`backward_batch`] needs.
    pub fn forward(&self, x: &[f64]) -> Result<(ProbVector, Activations), TrainError> {
        if x.len() != self.input_dim() {
            return Err(TrainError::ShapeMismatch { expected: self.input_dim(), got: x.len() });
        }
        let acts = self.forward_unchecked(x);
        Ok((ProbVector::from_raw(acts.probs.clone()), acts))
    }

    pub fn predict(&self, x: &[f64]) -> Result<ProbVector, TrainError> {
        self.forward(x).map(|(p, _)| p)
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> Activations {
        let mut layer_inputs = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&current, &mut next);
            if i < last {
                for z in &mut next {
                    *z = z.max(0.0);
                }
            }
            layer_inputs.push(std::mem::replace(&mut current, std::mem::take(&mut next)));
        }
        Activations { layer_inputs, probs: softmax_unchecked(&current) }
    }

    pub(crate) fn apply_update(&mut self, velocity: &mut Gradients, grads: &Gradients, learning_rate: f64, momentum: f64) {
        for ((layer, v), g) in self.layers.iter_mut().zip(&mut velocity.layers).zip(&grads.layers) {
            for ((w, vw), gw) in layer.weights.iter_mut().zip(&mut v.weights).zip(&g.weights) {
                *vw = momentum * *vw + gw;
                *w -= learning_rate * *vw;
            }
            for ((b, vb), gb) in layer.bias.iter_mut().zip(&mut v.bias).zip(&g.bias) {
                *vb = momentum * *vb + gb;
                *b -= learning_rate * *vb;
            }
        }
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.bias).all(|x| x.is_finite()))
    }
}

fn check_dims(layer_dims: &[usize]) -> Result<(), TrainError> {
    if layer_dims.len() < 2 || layer_dims.contains(&0) {
        return Err(TrainError::InvalidConfig(format!("layer_dims must be >= 2 positive sizes, got {layer_dims:?}")));
    }
    if *layer_dims.last().unwrap() < 2 {
        return Err(TrainError::InvalidConfig("need at least 2 output classes".into()));
    }
    Ok(())
}

/// Gradient (or momentum buffer) with the same shapes as a model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseLayer>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self { layers: model.layers.iter().map(|l| DenseLayer::zeros(l.inputs, l.outputs)).collect() }
    }

    /// Flattened in the same order as [`MlpModel::params`].
    pub fn flatten(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.bias).copied()).collect()
    }

    fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(&mut l.bias).for_each(|x| *x *= factor);
        }
    }
}

/// Adds the cross-entropy gradient of one sample to `grads`. The fused
/// softmax + cross-entropy output error is `p - one_hot(label)`.
fn accumulate_sample(model: &MlpModel, acts: &Activations, label: usize, grads: &mut Gradients) {
    let mut delta = acts.probs.clone();
    delta[label] -= 1.0;
    for i in (0..model.layers.len()).rev() {
        let layer = &model.layers[i];
        let input = &acts.layer_inputs[i];
        let g = &mut grads.layers[i];
        for (o, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
            for (gw, &x) in row.iter_mut().zip(input) {
                *gw += d * x;
            }
            g.bias[o] += d;
        }
        if i > 0 {
            let mut prev = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (pv, &w) in prev.iter_mut().zip(row) {
                    *pv += w * d;
                }
            }
            // Rectifier derivative, read off the post-activation value.
            for (pv, &a) in prev.iter_mut().zip(input) {
                if a <= 0.0 {
                    *pv = 0.0;
                }
            }
            delta = prev;
        }
    }
}

/// Gradient of the mean cross-entropy over the `selected` samples, given their
/// cached forward passes. Samples are accumulated in ascending index order.
pub(crate) fn backward_cached(
    model: &MlpModel,
    activations: &[Activations],
    labels: &[usize],
    selected: &[usize],
) -> Gradients {
    let mut grads = Gradients::zeros_like(model);
    let mut order = selected.to_vec();
    order.sort_unstable();
    for &i in &order {
        accumulate_sample(model, &activations[i], labels[i], &mut grads);
    }
    grads.scale(1.0 / order.len() as f64);
    grads
}

/// Gradient of `(1/|S|) sum_{i in S} CE(model(x_i), y_i)` for the selected set
/// `S` of batch rows.
pub fn backward_batch(
    model: &MlpModel,
    inputs: &[&[f64]],
    labels: &[usize],
    selected: &[usize],
) -> Result<Gradients, TrainError> {
    if selected.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    if inputs.len() != labels.len() {
        return Err(TrainError::ShapeMismatch { expected: inputs.len(), got: labels.len() });
    }
    let classes = model.classes();
    let mut acts = Vec::with_capacity(inputs.len());
    for (i, x) in inputs.iter().enumerate() {
        if labels[i] >= classes {
            return Err(TrainError::LabelOutOfRange { row: i, label: labels[i] as i64, classes });
        }
        acts.push(model.forward(x)?.1);
    }
    if let Some(&bad) = selected.iter().find(|&&i| i >= inputs.len()) {
        return Err(TrainError::ShapeMismatch { expected: inputs.len(), got: bad });
    }
    Ok(backward_cached(model, &acts, labels, selected))
}

/// Mean cross-entropy over the selected rows (the objective `backward_batch`
/// differentiates).
pub fn mean_loss(model: &MlpModel, inputs: &[&[f64]], labels: &[usize], selected: &[usize]) -> f64 {
    let total: f64 = selected
        .iter()
        .map(|&i| -model.forward_unchecked(inputs[i]).probs[labels[i]].max(1e-12).ln())
        .sum();
    total / selected.len() as f64
}
