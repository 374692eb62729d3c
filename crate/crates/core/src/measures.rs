//! Scalar uncertainty measures computed from member sets and credal sets.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::entropy::{box_entropy_bounds, hull_entropy_bounds, shannon_entropy};
use crate::simplex::{extract_intervals, mean_prediction, BoxCredalSet, MemberSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("interval width is defined for binary problems only, got {0} classes")]
    NotBinary(usize),
    #[error("unknown measure `{0}` (expected entropy-diff, mi, width or pil)")]
    UnknownMeasure(String),
    #[error("unknown credal set `{0}` (expected box or hull)")]
    UnknownSet(String),
}

/// Total / aleatoric / epistemic split of ensemble uncertainty, in nats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyBreakdown {
    pub total: f64,
    pub aleatoric: f64,
    pub epistemic: f64,
}

/// Entropy of the mean minus the mean member entropy (ensemble mutual
/// information).
pub fn mi_decomposition(ms: &MemberSet) -> UncertaintyBreakdown {
    let total = shannon_entropy(&mean_prediction(ms));
    let aleatoric = ms.iter().map(shannon_entropy).sum::<f64>() / ms.len() as f64;
    UncertaintyBreakdown { total, aleatoric, epistemic: total - aleatoric }
}

/// Upper minus lower entropy of the box.
pub fn entropy_difference_eu(bx: &BoxCredalSet) -> f64 {
    box_entropy_bounds(bx).difference().max(0.0)
}

/// Upper minus lower entropy of the members' convex hull.
pub fn hull_entropy_difference_eu(ms: &MemberSet) -> f64 {
    hull_entropy_bounds(ms).difference().max(0.0)
}

/// Width of the class-0 interval of a binary box.
pub fn interval_width_eu(bx: &BoxCredalSet) -> Result<f64, MeasureError> {
    if bx.classes() != 2 {
        return Err(MeasureError::NotBinary(bx.classes()));
    }
    Ok(bx.width(0))
}

/// Averaged probability interval length, `(1/C) sum_k (upper_k - lower_k)`.
pub fn pil(bx: &BoxCredalSet) -> f64 {
    (0..bx.classes()).map(|k| bx.width(k)).sum::<f64>() / bx.classes() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Measure {
    EntropyDiff,
    MutualInformation,
    Width,
    Pil,
}

impl Measure {
    /// Entropy difference for multiclass, interval width for binary problems.
    pub fn default_for(classes: usize) -> Self {
        if classes == 2 {
            Measure::Width
        } else {
            Measure::EntropyDiff
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Measure::EntropyDiff => "entropy-diff",
            Measure::MutualInformation => "mi",
            Measure::Width => "width",
            Measure::Pil => "pil",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "entropy-diff" => Ok(Measure::EntropyDiff),
            "mi" => Ok(Measure::MutualInformation),
            "width" => Ok(Measure::Width),
            "pil" => Ok(Measure::Pil),
            other => Err(MeasureError::UnknownMeasure(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CredalKind {
    #[default]
    Box,
    Hull,
}

impl CredalKind {
    pub fn name(self) -> &'static str {
        match self {
            CredalKind::Box => "box",
            CredalKind::Hull => "hull",
        }
    }
}

impl fmt::Display for CredalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CredalKind {
    type Err = MeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "box" => Ok(CredalKind::Box),
            "hull" => Ok(CredalKind::Hull),
            other => Err(MeasureError::UnknownSet(other.to_string())),
        }
    }
}

/// Evaluates `measure` on one instance.
///
/// Mutual information ignores the credal set. Width and PIL only look at the
/// class-wise envelopes, which the box and the hull share.
pub fn evaluate(ms: &MemberSet, set: CredalKind, measure: Measure) -> Result<f64, MeasureError> {
    match (measure, set) {
        (Measure::MutualInformation, _) => Ok(mi_decomposition(ms).epistemic),
        (Measure::EntropyDiff, CredalKind::Box) => Ok(entropy_difference_eu(&extract_intervals(ms))),
        (Measure::EntropyDiff, CredalKind::Hull) => Ok(hull_entropy_difference_eu(ms)),
        (Measure::Width, _) => interval_width_eu(&extract_intervals(ms)),
        (Measure::Pil, _) => Ok(pil(&extract_intervals(ms))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::{softmax, ProbVector};
    use proptest::prelude::*;

    fn ms(rows: &[&[f64]]) -> MemberSet {
        MemberSet::from_rows(rows.iter().map(|r| r.to_vec())).unwrap()
    }

    fn bx(l: &[f64], u: &[f64]) -> BoxCredalSet {
        BoxCredalSet::new(l.to_vec(), u.to_vec()).unwrap()
    }

    #[test]
    fn mutual_information_examples() {
        let same = ms(&[&[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5], &[0.2, 0.3, 0.5]]);
        assert!(mi_decomposition(&same).epistemic.abs() < 1e-15);

        let split = mi_decomposition(&ms(&[&[1.0, 0.0], &[0.0, 1.0]]));
        assert!((split.total - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(split.aleatoric, 0.0);
        assert!((split.epistemic - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn entropy_difference_examples() {
        let p = ProbVector::new(vec![0.1, 0.6, 0.3]).unwrap();
        assert!(entropy_difference_eu(&BoxCredalSet::degenerate(&p)).abs() < 1e-12);
        let d = entropy_difference_eu(&bx(&[0.2, 0.4], &[0.6, 0.8]));
        assert!((d - 0.192_744_757_021_757_5).abs() < 1e-9);
        let full = entropy_difference_eu(&BoxCredalSet::full(3).unwrap());
        assert!((full - 1.098_612_288_668_109_7).abs() < 1e-12);
    }

    #[test]
    fn width_and_pil_examples() {
        let p = ProbVector::new(vec![0.35, 0.65]).unwrap();
        assert_eq!(interval_width_eu(&BoxCredalSet::degenerate(&p)).unwrap(), 0.0);
        let b = bx(&[0.2, 0.4], &[0.6, 0.8]);
        assert!((interval_width_eu(&b).unwrap() - 0.4).abs() < 1e-15);
        assert!((b.width(1) - 0.4).abs() < 1e-15);
        assert_eq!(interval_width_eu(&BoxCredalSet::full(3).unwrap()), Err(MeasureError::NotBinary(3)));

        assert_eq!(pil(&BoxCredalSet::degenerate(&p)), 0.0);
        assert_eq!(pil(&BoxCredalSet::full(7).unwrap()), 1.0);
        assert!((pil(&b) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn measure_names_round_trip() {
        for m in [Measure::EntropyDiff, Measure::MutualInformation, Measure::Width, Measure::Pil] {
            assert_eq!(m.name().parse::<Measure>().unwrap(), m);
        }
        assert!("bits".parse::<Measure>().is_err());
        assert_eq!("hull".parse::<CredalKind>().unwrap(), CredalKind::Hull);
        assert_eq!(Measure::default_for(2), Measure::Width);
        assert_eq!(Measure::default_for(10), Measure::EntropyDiff);
    }

    proptest! {
        #[test]
        fn epistemic_is_nonnegative(rows in prop::collection::vec(prop::collection::vec(-4.0f64..4.0, 3), 1..10)) {
            let set = MemberSet::new(rows.iter().map(|r| softmax(r).unwrap()).collect()).unwrap();
            let mi = mi_decomposition(&set);
            prop_assert!(mi.epistemic >= -1e-9);
            prop_assert!((mi.total - mi.aleatoric - mi.epistemic).abs() <= 1e-9);
            prop_assert!(mi.total <= 3f64.ln() + 1e-9);
        }

        #[test]
        fn measures_grow_with_widening(a in 0.05f64..0.45, grow in 0.0f64..0.05) {
            // Nested binary boxes sharing the centre 0.5.
            let narrow = bx(&[0.5 - a, 0.5 - a], &[0.5 + a, 0.5 + a]);
            let wide = bx(&[0.5 - a - grow, 0.5 - a - grow], &[0.5 + a + grow, 0.5 + a + grow]);
            prop_assert!(entropy_difference_eu(&wide) >= entropy_difference_eu(&narrow) - 1e-12);
            prop_assert!(interval_width_eu(&wide).unwrap() >= interval_width_eu(&narrow).unwrap());
            prop_assert!(pil(&wide) >= pil(&narrow));
        }
    }
}
