//! Probability-simplex primitives and the two credal-set constructions built
//! from an ensemble's softmax outputs.
//!
//! A [`MemberSet`] holds the `M` member predictions for one input. From it we
//! derive either the box credal set (class-wise `[min, max]` intervals
//! intersected with the simplex, see [`extract_intervals`]) or the convex hull
//! of the members, which lives implicitly in the [`MemberSet`] itself.

use std::ops::Deref;

use thiserror::Error;

/// Tolerance on `|sum - 1|` accepted as-is.
pub const SIMPLEX_TOL: f64 = 1e-9;
/// Largest `|sum - 1|` that is repaired by renormalization instead of rejected.
pub const RENORMALIZE_TOL: f64 = 1e-6;
/// Slack used for box membership tests.
pub const CONTAINMENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimplexError {
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("component {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("component {index} = {value} lies outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("components sum to {sum}, more than {RENORMALIZE_TOL} away from 1")]
    BadSum { sum: f64 },
    #[error("member set is empty")]
    EmptyMemberSet,
    #[error("dimension mismatch: expected {expected} classes, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("interval {index} is invalid: lower {lower} > upper {upper} or outside [0, 1]")]
    BadInterval { index: usize, lower: f64, upper: f64 },
    #[error("box is empty: sum(lower) = {sum_lower}, sum(upper) = {sum_upper}")]
    InfeasibleBox { sum_lower: f64, sum_upper: f64 },
}

/// A point on the probability simplex with at least two classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates `components`, renormalizing sums that are off by at most
    /// [`RENORMALIZE_TOL`]. Zero components are kept exactly.
    pub fn new(components: Vec<f64>) -> Result<Self, SimplexError> {
        if components.len() < 2 {
            return Err(SimplexError::TooFewClasses(components.len()));
        }
        for (index, &value) in components.iter().enumerate() {
            if !value.is_finite() {
                return Err(SimplexError::NonFinite { index, value });
            }
            if !(0.0..=1.0 + RENORMALIZE_TOL).contains(&value) {
                return Err(SimplexError::OutOfRange { index, value });
            }
        }
        let sum: f64 = components.iter().sum();
        let gap = (sum - 1.0).abs();
        if gap <= SIMPLEX_TOL {
            if components.iter().all(|&p| p <= 1.0) {
                return Ok(Self(components));
            }
        } else if gap > RENORMALIZE_TOL {
            return Err(SimplexError::BadSum { sum });
        }
        Ok(Self(components.into_iter().map(|p| (p / sum).min(1.0)).collect()))
    }

    /// Uniform distribution over `classes` classes.
    pub fn uniform(classes: usize) -> Result<Self, SimplexError> {
        if classes < 2 {
            return Err(SimplexError::TooFewClasses(classes));
        }
        Ok(Self(vec![1.0 / classes as f64; classes]))
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Index of the largest component, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &p) in self.0.iter().enumerate().skip(1) {
            if p > self.0[best] {
                best = k;
            }
        }
        best
    }

    pub fn max(&self) -> f64 {
        self.0[self.argmax()]
    }

    /// Internal constructor for vectors produced by our own arithmetic, which
    /// already lie on the simplex up to round-off.
    pub(crate) fn from_raw(components: Vec<f64>) -> Self {
        debug_assert!(components.len() >= 2);
        debug_assert!((components.iter().sum::<f64>() - 1.0).abs() <= 1e-7);
        Self(components)
    }
}

impl Deref for ProbVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = SimplexError;

    fn try_from(value: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

/// The `M` member predictions for a single input instance.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberSet {
    members: Vec<ProbVector>,
}

impl MemberSet {
    pub fn new(members: Vec<ProbVector>) -> Result<Self, SimplexError> {
        let first = members.first().ok_or(SimplexError::EmptyMemberSet)?;
        let expected = first.classes();
        if let Some(bad) = members.iter().find(|m| m.classes() != expected) {
            return Err(SimplexError::DimensionMismatch { expected, got: bad.classes() });
        }
        Ok(Self { members })
    }

    /// Builds a member set from raw rows, validating each one.
    pub fn from_rows<I, R>(rows: I) -> Result<Self, SimplexError>
    where
        I: IntoIterator<Item = R>,
        R: Into<Vec<f64>>,
    {
        let members = rows
            .into_iter()
            .map(|r| ProbVector::new(r.into()))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(members)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.members[0].classes()
    }

    pub fn members(&self) -> &[ProbVector] {
        &self.members
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ProbVector> {
        self.members.iter()
    }

    /// Convex combination `sum_i weights[i] * p_i`. `weights` must have length
    /// `M`; no simplex check is made on them.
    pub(crate) fn mix(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.classes()];
        for (w, p) in weights.iter().zip(&self.members) {
            if *w == 0.0 {
                continue;
            }
            for (o, &pk) in out.iter_mut().zip(p.iter()) {
                *o += w * pk;
            }
        }
        out
    }
}

impl<'a> IntoIterator for &'a MemberSet {
    type Item = &'a ProbVector;
    type IntoIter = std::slice::Iter<'a, ProbVector>;

    fn into_iter(self) -> Self::IntoIter {
        self.members.iter()
    }
}

/// Class-wise probability intervals. Construction guarantees
/// `0 <= lower_k <= upper_k <= 1` and `sum(lower) <= 1 <= sum(upper)` (up to
/// [`SIMPLEX_TOL`]), so the induced credal set is never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxCredalSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxCredalSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, SimplexError> {
        if lower.len() != upper.len() {
            return Err(SimplexError::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.len() < 2 {
            return Err(SimplexError::TooFewClasses(lower.len()));
        }
        for (index, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            let ok = l.is_finite() && u.is_finite() && 0.0 <= l && l <= u && u <= 1.0;
            if !ok {
                return Err(SimplexError::BadInterval { index, lower: l, upper: u });
            }
        }
        let sum_lower: f64 = lower.iter().sum();
        let sum_upper: f64 = upper.iter().sum();
        if sum_lower > 1.0 + SIMPLEX_TOL || sum_upper < 1.0 - SIMPLEX_TOL {
            return Err(SimplexError::InfeasibleBox { sum_lower, sum_upper });
        }
        Ok(Self { lower, upper })
    }

    /// The whole simplex: every interval is `[0, 1]`.
    pub fn full(classes: usize) -> Result<Self, SimplexError> {
        Self::new(vec![0.0; classes], vec![1.0; classes])
    }

    /// The singleton box `{p}`.
    pub fn degenerate(p: &ProbVector) -> Self {
        Self { lower: p.to_vec(), upper: p.to_vec() }
    }

    pub fn classes(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, k: usize) -> f64 {
        self.upper[k] - self.lower[k]
    }
}

/// Numerically stable softmax (max-shifted).
pub fn softmax(logits: &[f64]) -> Result<ProbVector, SimplexError> {
    if logits.len() < 2 {
        return Err(SimplexError::TooFewClasses(logits.len()));
    }
    if let Some((index, &value)) = logits.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(SimplexError::NonFinite { index, value });
    }
    Ok(ProbVector::from_raw(softmax_unchecked(logits)))
}

/// Softmax without validation, shared with the network forward pass.
pub(crate) fn softmax_unchecked(logits: &[f64]) -> Vec<f64> {
    let shift = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| (z - shift).exp()).collect();
    let total: f64 = out.iter().sum();
    for o in &mut out {
        *o /= total;
    }
    out
}

/// Class-wise lower and upper envelopes of the members.
pub fn extract_intervals(ms: &MemberSet) -> BoxCredalSet {
    let mut lower = ms.members[0].to_vec();
    let mut upper = lower.clone();
    for p in &ms.members[1..] {
        for (k, &pk) in p.iter().enumerate() {
            lower[k] = lower[k].min(pk);
            upper[k] = upper[k].max(pk);
        }
    }
    BoxCredalSet { lower, upper }
}

/// Arithmetic mean of the members (the deep-ensemble prediction).
pub fn mean_prediction(ms: &MemberSet) -> ProbVector {
    let weights = vec![1.0 / ms.len() as f64; ms.len()];
    let mut mean = ms.mix(&weights);
    // Keep the mean inside the member envelope despite round-off.
    let bounds = extract_intervals(ms);
    for (k, m) in mean.iter_mut().enumerate() {
        *m = m.clamp(bounds.lower[k], bounds.upper[k]);
    }
    ProbVector::from_raw(mean)
}

/// Whether `p` lies in the box, with [`CONTAINMENT_TOL`] slack per coordinate.
pub fn box_contains(bx: &BoxCredalSet, p: &ProbVector) -> Result<bool, SimplexError> {
    if bx.classes() != p.classes() {
        return Err(SimplexError::DimensionMismatch { expected: bx.classes(), got: p.classes() });
    }
    Ok(p.iter().enumerate().all(|(k, &pk)| {
        pk >= bx.lower[k] - CONTAINMENT_TOL && pk <= bx.upper[k] + CONTAINMENT_TOL
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap().as_slice(), &[0.5, 0.5]);
        for x in [-1e6, -3.5, 0.0, 42.0, 1e300] {
            let p = softmax(&[x, x, x]).unwrap();
            for &pk in p.iter() {
                assert!((pk - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn softmax_large_logit_matches_extended_precision() {
        // exp(-1000) / (1 + exp(-1000)) underflows to 0 in f64; the
        // extended-precision value is ~5.08e-435, so 1 and 0 are exact here.
        let p = softmax(&[1000.0, 0.0]).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 0.0]);
        // A case that stays representable: logits [30, 0] -> 1/(1+e^-30).
        let p = softmax(&[30.0, 0.0]).unwrap();
        let tail = 9.357_622_968_839_299e-14; // e^-30 / (1 + e^-30), computed with mpmath
        assert!((p[1] - tail).abs() < 1e-27);
        assert!((p[0] - (1.0 - tail)).abs() <= f64::EPSILON);
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert!(matches!(softmax(&[0.0, f64::NAN]), Err(SimplexError::NonFinite { index: 1, .. })));
        assert!(matches!(softmax(&[f64::INFINITY, 0.0]), Err(SimplexError::NonFinite { .. })));
        assert!(matches!(softmax(&[1.0]), Err(SimplexError::TooFewClasses(1))));
    }

    #[test]
    fn prob_vector_validation() {
        assert!(ProbVector::new(vec![0.3, 0.7]).is_ok());
        assert!(matches!(ProbVector::new(vec![1.0]), Err(SimplexError::TooFewClasses(1))));
        assert!(matches!(ProbVector::new(vec![-0.1, 1.1]), Err(SimplexError::OutOfRange { .. })));
        assert!(matches!(ProbVector::new(vec![0.5, 0.6]), Err(SimplexError::BadSum { .. })));
        // Off by 5e-7: renormalized.
        let p = ProbVector::new(vec![0.5 + 5e-7, 0.5]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        // Exact zeros survive.
        assert_eq!(pv(&[0.0, 1.0]).as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn member_set_validation() {
        assert_eq!(MemberSet::new(vec![]), Err(SimplexError::EmptyMemberSet));
        let err = MemberSet::new(vec![pv(&[0.5, 0.5]), pv(&[0.2, 0.3, 0.5])]).unwrap_err();
        assert_eq!(err, SimplexError::DimensionMismatch { expected: 2, got: 3 });
    }

    #[test]
    fn box_validation() {
        assert!(matches!(
            BoxCredalSet::new(vec![0.6, 0.6], vec![0.7, 0.7]),
            Err(SimplexError::InfeasibleBox { .. })
        ));
        assert!(matches!(
            BoxCredalSet::new(vec![0.0, 0.1], vec![0.2, 0.3]),
            Err(SimplexError::InfeasibleBox { .. })
        ));
        assert!(matches!(
            BoxCredalSet::new(vec![0.5, 0.2], vec![0.4, 0.9]),
            Err(SimplexError::BadInterval { index: 0, .. })
        ));
    }

    #[test]
    fn interval_examples() {
        let single = MemberSet::new(vec![pv(&[0.3, 0.7])]).unwrap();
        let b = extract_intervals(&single);
        assert_eq!(b.lower(), &[0.3, 0.7]);
        assert_eq!(b.upper(), &[0.3, 0.7]);

        let ms = MemberSet::new(vec![pv(&[0.2, 0.8]), pv(&[0.6, 0.4])]).unwrap();
        let b = extract_intervals(&ms);
        assert_eq!(b.lower(), &[0.2, 0.4]);
        assert_eq!(b.upper(), &[0.6, 0.8]);

        let mean = mean_prediction(&ms);
        assert!((mean[0] - 0.4).abs() < 1e-15 && (mean[1] - 0.6).abs() < 1e-15);
        assert!(box_contains(&b, &mean).unwrap());
        assert!(!box_contains(&b, &pv(&[0.1, 0.9])).unwrap());
        assert!(box_contains(&b, &pv(&[0.1, 0.2, 0.7])).is_err());
    }

    #[test]
    fn mean_of_identical_members_is_that_member() {
        let p = pv(&[0.1, 0.25, 0.65]);
        let ms = MemberSet::new(vec![p.clone(); 7]).unwrap();
        let m = mean_prediction(&ms);
        for k in 0..3 {
            assert!((m[k] - p[k]).abs() < 1e-15);
        }
    }

    fn member_set_strategy() -> impl Strategy<Value = MemberSet> {
        (2usize..=10, 1usize..=20).prop_flat_map(|(c, m)| {
            prop::collection::vec(prop::collection::vec(-6.0f64..6.0, c), m).prop_map(|rows| {
                MemberSet::new(rows.iter().map(|l| softmax(l).unwrap()).collect()).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn members_and_mean_lie_in_extracted_box(ms in member_set_strategy()) {
            let b = extract_intervals(&ms);
            for p in &ms {
                prop_assert!(box_contains(&b, p).unwrap());
            }
            let mean = mean_prediction(&ms);
            prop_assert!(box_contains(&b, &mean).unwrap());
            prop_assert!((mean.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // Re-validating the extracted bounds through the checked constructor.
            prop_assert!(BoxCredalSet::new(b.lower().to_vec(), b.upper().to_vec()).is_ok());
        }

        #[test]
        fn extraction_is_permutation_invariant(ms in member_set_strategy(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = ms.members().to_vec();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = extract_intervals(&ms);
            let b = extract_intervals(&MemberSet::new(shuffled).unwrap());
            prop_assert_eq!(a, b);
        }

        #[test]
        fn binary_box_is_one_interval(rows in prop::collection::vec(0.0f64..=1.0, 1..12)) {
            let ms = MemberSet::new(rows.iter().map(|&a| pv(&[a, 1.0 - a])).collect()).unwrap();
            let b = extract_intervals(&ms);
            prop_assert!((b.lower()[0] + b.upper()[1] - 1.0).abs() < 1e-15);
            prop_assert!((b.upper()[0] + b.lower()[1] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn random_sets_scan_oracle() {
        // 5 random simplex points, C = 4: bounds equal an exhaustive scan.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let rows: Vec<Vec<f64>> = (0..5)
                .map(|_| {
                    let raw: Vec<f64> = (0..4).map(|_| rng.random::<f64>() + 1e-3).collect();
                    let s: f64 = raw.iter().sum();
                    raw.iter().map(|x| x / s).collect()
                })
                .collect();
            let ms = MemberSet::from_rows(rows.clone()).unwrap();
            let b = extract_intervals(&ms);
            for k in 0..4 {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for r in &ms {
                    if r[k] < lo {
                        lo = r[k];
                    }
                    if r[k] > hi {
                        hi = r[k];
                    }
                }
                assert_eq!(b.lower()[k], lo);
                assert_eq!(b.upper()[k], hi);
            }
        }
    }
}
