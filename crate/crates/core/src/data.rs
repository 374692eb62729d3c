//! Labeled feature tables and the synthetic 2-D benchmarks used in place of
//! image datasets.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

/// Label used for unlabeled (out-of-distribution) rows.
pub const UNLABELED: i64 = -1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("row {row} has {got} features, expected {expected}")]
    RaggedRow { row: usize, expected: usize, got: usize },
    #[error("row {row}: feature {index} is not finite")]
    NonFinite { row: usize, index: usize },
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("unknown dataset kind `{0}`")]
    UnknownKind(String),
}

/// Row-major feature matrix with one integer label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<i64>,
}

impl Dataset {
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<i64>) -> Result<Self, DataError> {
        if dim == 0 || features.len() != dim * labels.len() {
            return Err(DataError::RaggedRow {
                row: labels.len(),
                expected: dim,
                got: features.len().checked_div(labels.len()).unwrap_or(0),
            });
        }
        if let Some(pos) = features.iter().position(|x| !x.is_finite()) {
            return Err(DataError::NonFinite { row: pos / dim, index: pos % dim });
        }
        Ok(Self { dim, features, labels })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<i64>) -> Result<Self, DataError> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut features = Vec::with_capacity(dim * rows.len());
        for (row, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(DataError::RaggedRow { row, expected: dim, got: r.len() });
            }
            features.extend_from_slice(r);
        }
        Self::new(dim, features, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim)
    }

    pub fn label(&self, i: usize) -> i64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    /// Rows `range` as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            dim: self.dim,
            features: self.features[range.start * self.dim..range.end * self.dim].to_vec(),
            labels: self.labels[range].to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    /// `classes` Gaussian blobs with means equally spaced on a circle.
    Blobs,
    /// Unlabeled points on a circle at three times the blob radius.
    RingOod,
    /// Unlabeled points uniform over the blobs' bounding box scaled by 1.5.
    UniformOod,
    /// Two interleaved half circles, two classes.
    TwoMoons,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Blobs => "blobs",
            DatasetKind::RingOod => "ring_ood",
            DatasetKind::UniformOod => "uniform_ood",
            DatasetKind::TwoMoons => "two_moons",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "blobs" => Ok(DatasetKind::Blobs),
            "ring_ood" => Ok(DatasetKind::RingOod),
            "uniform_ood" => Ok(DatasetKind::UniformOod),
            "two_moons" => Ok(DatasetKind::TwoMoons),
            other => Err(DataError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub n: usize,
    pub classes: usize,
    pub radius: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self { kind: DatasetKind::Blobs, n: 1000, classes: 4, radius: 1.0, sigma: 0.36, seed: 0 }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: String| Err(DataError::InvalidSpec(msg));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad(format!("radius must be positive, got {}", self.radius));
        }
        match self.kind {
            DatasetKind::Blobs if self.classes < 2 || self.n < self.classes => {
                bad(format!("blobs need n >= classes >= 2, got n = {}, classes = {}", self.n, self.classes))
            }
            DatasetKind::TwoMoons if self.classes != 2 => bad("two_moons has exactly 2 classes".into()),
            _ => Ok(()),
        }
    }
}

/// Generates the dataset described by `spec`. Deterministic per seed.
pub fn gen_dataset(spec: &DatasetSpec) -> Result<Dataset, DataError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut features = Vec::with_capacity(2 * spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    let gauss = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let tau = std::f64::consts::TAU;

    match spec.kind {
        DatasetKind::Blobs => {
            let k = spec.classes;
            for i in 0..spec.n {
                // Round-robin assignment keeps the classes balanced.
                let class = i % k;
                let angle = tau * class as f64 / k as f64;
                features.push(spec.radius * angle.cos() + spec.sigma * gauss(&mut rng));
                features.push(spec.radius * angle.sin() + spec.sigma * gauss(&mut rng));
                labels.push(class as i64);
            }
        }
        DatasetKind::RingOod => {
            let r = 3.0 * spec.radius;
            for _ in 0..spec.n {
                let angle = tau * rng.random::<f64>();
                features.push(r * angle.cos() + spec.sigma * gauss(&mut rng));
                features.push(r * angle.sin() + spec.sigma * gauss(&mut rng));
                labels.push(UNLABELED);
            }
        }
        DatasetKind::UniformOod => {
            let half = 1.5 * (spec.radius + 3.0 * spec.sigma);
            for _ in 0..spec.n {
                features.push(rng.random_range(-half..=half));
                features.push(rng.random_range(-half..=half));
                labels.push(UNLABELED);
            }
        }
        DatasetKind::TwoMoons => {
            for i in 0..spec.n {
                let class = i % 2;
                let t = std::f64::consts::PI * rng.random::<f64>();
                let (x, y) = if class == 0 {
                    (t.cos(), t.sin())
                } else {
                    (1.0 - t.cos(), 0.5 - t.sin())
                };
                features.push(spec.radius * x + spec.sigma * gauss(&mut rng));
                features.push(spec.radius * y + spec.sigma * gauss(&mut rng));
                labels.push(class as i64);
            }
        }
    }
    Dataset::new(2, features, labels)
}
