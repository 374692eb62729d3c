//! Browser demo for CreDRO, compiled to WebAssembly with wasm-bindgen.
//!
//! Three operations are exported to the page in `www/index.html`:
//!
//! * [`credal_bounds`]: box and convex-hull entropy bounds of a set of member
//!   predictions typed in by the user;
//! * [`delta_schedule`] / [`selection_counts`]: the per-member δ values and
//!   how many batch losses each member keeps;
//! * [`uncertainty_map`]: trains a small ensemble on 2-D blobs and evaluates
//!   epistemic uncertainty on a grid for a heatmap.
//!
//! Every export is a thin wrapper around a plain Rust function returning
//! `Result<_, String>`, so the logic is testable natively (`cargo test -p
//! credro-demo`) without a JavaScript engine.

use wasm_bindgen::prelude::*;

use credro::data::{gen_dataset, DatasetKind, DatasetSpec};
use credro::measures::{evaluate, mi_decomposition, CredalKind, Measure};
use credro::simplex::{extract_intervals, mean_prediction, MemberSet};
use credro::train::{self, predict_ensemble, train_deep_ensemble, train_ensemble, TrainConfig};
use credro::{box_entropy_bounds, hull_entropy_bounds};

/// Half-width of the square shown by the heatmap, in feature units. The
/// training blobs sit on the unit circle.
pub const MAP_EXTENT: f64 = 3.0;

fn to_js(e: String) -> JsError {
    JsError::new(&e)
}

/// Entropy bounds (nats) and envelopes of one credal set.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct CredalSummary {
    lower: Vec<f64>,
    upper: Vec<f64>,
    mean: Vec<f64>,
    /// box upper, box lower, hull upper, hull lower, MI epistemic
    values: [f64; 5],
}

#[wasm_bindgen]
impl CredalSummary {
    /// Class-wise lower envelope `l_k = min_m p_k^(m)`.
    pub fn lower(&self) -> Vec<f64> {
        self.lower.clone()
    }
    /// Class-wise upper envelope `u_k = max_m p_k^(m)`.
    pub fn upper(&self) -> Vec<f64> {
        self.upper.clone()
    }
    /// Ensemble mean prediction.
    pub fn mean(&self) -> Vec<f64> {
        self.mean.clone()
    }
    pub fn box_upper(&self) -> f64 {
        self.values[0]
    }
    pub fn box_lower(&self) -> f64 {
        self.values[1]
    }
    pub fn hull_upper(&self) -> f64 {
        self.values[2]
    }
    pub fn hull_lower(&self) -> f64 {
        self.values[3]
    }
    /// Mutual-information epistemic uncertainty of the same members.
    pub fn mutual_information(&self) -> f64 {
        self.values[4]
    }
}

/// Parses `classes`-wide rows out of a flat array of member probabilities.
pub fn member_set(flat: &[f64], classes: usize) -> Result<MemberSet, String> {
    if classes < 2 {
        return Err(format!("need at least 2 classes, got {classes}"));
    }
    if flat.is_empty() || !flat.len().is_multiple_of(classes) {
        return Err(format!("{} numbers do not form rows of {classes} probabilities", flat.len()));
    }
    MemberSet::from_rows(flat.chunks(classes)).map_err(|e| e.to_string())
}

pub fn credal_bounds_native(flat: &[f64], classes: usize) -> Result<CredalSummary, String> {
    let ms = member_set(flat, classes)?;
    let bx = extract_intervals(&ms);
    let b = box_entropy_bounds(&bx);
    let h = hull_entropy_bounds(&ms);
    Ok(CredalSummary {
        lower: bx.lower().to_vec(),
        upper: bx.upper().to_vec(),
        mean: mean_prediction(&ms).into_inner(),
        values: [b.upper, b.lower, h.upper, h.lower, mi_decomposition(&ms).epistemic],
    })
}

/// Box and hull entropy bounds of `members` (row-major, `classes` per row).
#[wasm_bindgen]
pub fn credal_bounds(members: Vec<f64>, classes: usize) -> Result<CredalSummary, JsError> {
    credal_bounds_native(&members, classes).map_err(to_js)
}

pub fn delta_schedule_native(delta_g: f64, members: usize) -> Result<Vec<f64>, String> {
    train::delta_schedule(delta_g, members).map_err(|e| e.to_string())
}

/// The δ value of each of `members` ensemble members.
#[wasm_bindgen]
pub fn delta_schedule(delta_g: f64, members: usize) -> Result<Vec<f64>, JsError> {
    delta_schedule_native(delta_g, members).map_err(to_js)
}

pub fn selection_counts_native(delta_g: f64, members: usize, batch: usize) -> Result<Vec<u32>, String> {
    if batch == 0 {
        return Err("batch size must be positive".into());
    }
    Ok(delta_schedule_native(delta_g, members)?.iter().map(|&d| train::selection_count(d, batch) as u32).collect())
}

/// How many of `batch` losses each member back-propagates per step.
#[wasm_bindgen]
pub fn selection_counts(delta_g: f64, members: usize, batch: usize) -> Result<Vec<u32>, JsError> {
    selection_counts_native(delta_g, members, batch).map_err(to_js)
}

/// Epistemic uncertainty on a `resolution x resolution` grid over
/// `[-MAP_EXTENT, MAP_EXTENT]^2`, plus the training points.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyMap {
    resolution: usize,
    values: Vec<f64>,
    points: Vec<f64>,
    labels: Vec<i32>,
    accuracy: f64,
}

#[wasm_bindgen]
impl UncertaintyMap {
    pub fn resolution(&self) -> usize {
        self.resolution
    }
    /// Row-major grid values; row 0 is the top edge (largest `x_1`).
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }
    /// Training points as interleaved `x_0, x_1` pairs.
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }
    pub fn labels(&self) -> Vec<i32> {
        self.labels.clone()
    }
    /// Accuracy of the ensemble mean on the training points.
    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }
}

/// Settings of [`uncertainty_map`].
#[derive(Debug, Clone, PartialEq)]
pub struct MapSettings {
    pub delta_g: f64,
    pub members: usize,
    pub epochs: usize,
    pub seed: u64,
    pub resolution: usize,
    pub set: String,
    pub measure: String,
    pub deep_ensemble: bool,
}

pub fn uncertainty_map_native(s: &MapSettings) -> Result<UncertaintyMap, String> {
    if !(2..=200).contains(&s.resolution) {
        return Err(format!("resolution must be in 2..=200, got {}", s.resolution));
    }
    let set: CredalKind = s.set.parse().map_err(|e: credro::measures::MeasureError| e.to_string())?;
    let measure: Measure = s.measure.parse().map_err(|e: credro::measures::MeasureError| e.to_string())?;
    let spec = DatasetSpec { kind: DatasetKind::Blobs, n: 400, classes: 4, seed: s.seed, ..DatasetSpec::default() };
    let data = gen_dataset(&spec).map_err(|e| e.to_string())?;
    let config = TrainConfig {
        delta_g: s.delta_g,
        ensemble_size: s.members,
        batch_size: 32,
        epochs: s.epochs,
        seed: s.seed,
        layer_dims: vec![2, 16, 16, 4],
        ..TrainConfig::for_shape(2, 4)
    };
    let trained = if s.deep_ensemble { train_deep_ensemble(&config, &data) } else { train_ensemble(&config, &data) };
    let artifact = trained.map_err(|e| e.to_string())?;

    let mut correct = 0usize;
    for i in 0..data.len() {
        let ms = predict_ensemble(&artifact, data.row(i)).map_err(|e| e.to_string())?;
        correct += usize::from(mean_prediction(&ms).argmax() as i64 == data.label(i));
    }

    let r = s.resolution;
    let step = 2.0 * MAP_EXTENT / (r - 1) as f64;
    let mut values = Vec::with_capacity(r * r);
    for row in 0..r {
        let y = MAP_EXTENT - row as f64 * step;
        for col in 0..r {
            let x = -MAP_EXTENT + col as f64 * step;
            let ms = predict_ensemble(&artifact, &[x, y]).map_err(|e| e.to_string())?;
            values.push(evaluate(&ms, set, measure).map_err(|e| e.to_string())?);
        }
    }
    Ok(UncertaintyMap {
        resolution: r,
        values,
        points: data.rows().flatten().copied().collect(),
        labels: data.labels().iter().map(|&l| l as i32).collect(),
        accuracy: correct as f64 / data.len() as f64,
    })
}

/// Trains an ensemble on four 2-D Gaussian blobs (400 points, hidden layers
/// of 16) and evaluates `measure` over `set` on a grid.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn uncertainty_map(
    delta_g: f64,
    members: usize,
    epochs: usize,
    seed: u32,
    resolution: usize,
    set: String,
    measure: String,
    deep_ensemble: bool,
) -> Result<UncertaintyMap, JsError> {
    let settings = MapSettings { delta_g, members, epochs, seed: seed.into(), resolution, set, measure, deep_ensemble };
    uncertainty_map_native(&settings).map_err(to_js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_of_the_paper_example() {
        let s = credal_bounds_native(&[0.6, 0.3, 0.1, 0.2, 0.5, 0.3], 3).unwrap();
        assert_eq!(s.lower(), vec![0.2, 0.3, 0.1]);
        assert_eq!(s.upper(), vec![0.6, 0.5, 0.3]);
        assert!(s.box_upper() >= s.hull_upper() - 1e-12);
        assert!(s.box_lower() <= s.hull_lower() + 1e-12);
        assert!(s.hull_lower() <= s.hull_upper());
        // Water-filling caps p_2 at 0.3 and splits the rest evenly.
        let h = -(2.0 * 0.35 * 0.35f64.ln() + 0.3 * 0.3f64.ln());
        assert!((s.box_upper() - h).abs() < 1e-9);
        assert!(s.mutual_information() > 0.0);
    }

    #[test]
    fn rejects_ragged_or_invalid_input() {
        assert!(credal_bounds_native(&[0.5, 0.5, 0.2], 2).is_err());
        assert!(credal_bounds_native(&[], 2).is_err());
        assert!(credal_bounds_native(&[0.9, 0.9], 2).is_err());
        assert!(credal_bounds_native(&[1.0], 1).is_err());
    }

    #[test]
    fn schedule_and_counts() {
        assert_eq!(delta_schedule_native(0.5, 5).unwrap(), vec![0.5, 0.625, 0.75, 0.875, 1.0]);
        assert_eq!(selection_counts_native(0.5, 5, 128).unwrap(), vec![64, 80, 96, 112, 128]);
        assert!(delta_schedule_native(0.0, 5).is_err());
        assert!(selection_counts_native(0.5, 5, 0).is_err());
    }

    #[test]
    fn small_map_is_finite_and_deterministic() {
        let settings = MapSettings {
            delta_g: 0.5,
            members: 3,
            epochs: 3,
            seed: 7,
            resolution: 9,
            set: "box".into(),
            measure: "entropy-diff".into(),
            deep_ensemble: false,
        };
        let a = uncertainty_map_native(&settings).unwrap();
        assert_eq!(a.values().len(), 81);
        assert_eq!(a.points().len(), 800);
        assert!(a.values().iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!(a.accuracy() > 0.5);
        assert_eq!(a, uncertainty_map_native(&settings).unwrap());
        let bad = MapSettings { set: "ball".into(), ..settings };
        assert!(uncertainty_map_native(&bad).is_err());
    }
}
