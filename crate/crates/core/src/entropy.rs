//! Upper and lower Shannon entropy over box and convex-hull credal sets.
//!
//! Box upper entropy is solved exactly by water-filling: the maximizer has the
//! form `p_k = clamp(c, lower_k, upper_k)` for one scalar level `c`, found by
//! bisection. Box lower entropy is a concave minimization over the polytope
//! `{lower <= p <= upper, sum p = 1}`; the minimum sits at an extreme point and
//! every extreme point has at most one coordinate strictly inside its interval,
//! so for small `C` we enumerate them all. Hull upper entropy is maximized over
//! the mixing weights with an away-step conditional-gradient method; hull lower
//! entropy is attained at one of the members.
//!
//! All values are in nats.

use crate::simplex::{BoxCredalSet, MemberSet, ProbVector, SIMPLEX_TOL};

/// Largest class count for which [`lower_entropy_box`] enumerates extreme
/// points; above it a multi-start greedy descent is used.
pub const EXACT_LOWER_MAX_CLASSES: usize = 14;

const WATER_FILL_TOL: f64 = 1e-12;
const WATER_FILL_MAX_ITER: usize = 200;
const HULL_MAX_ITER: usize = 10_000;
const HULL_GAP_TOL: f64 = 1e-10;
const HULL_STALL_TOL: f64 = 1e-15;
const LINE_SEARCH_STEPS: usize = 60;

/// `-x ln x` with `0 ln 0 = 0`.
#[inline]
pub fn entropy_term(x: f64) -> f64 {
    if x > 0.0 {
        -x * x.ln()
    } else {
        0.0
    }
}

/// Shannon entropy in nats of a (not necessarily validated) probability slice.
pub fn entropy_of(p: &[f64]) -> f64 {
    p.iter().map(|&x| entropy_term(x)).sum()
}

/// Shannon entropy in nats.
pub fn shannon_entropy(p: &ProbVector) -> f64 {
    entropy_of(p)
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// An optimum of entropy over a box credal set.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxOptimum {
    pub entropy: f64,
    pub argument: ProbVector,
    /// `false` when the value came from the greedy heuristic rather than an
    /// exact method (lower entropy with more than [`EXACT_LOWER_MAX_CLASSES`]
    /// classes).
    pub exact: bool,
}

/// Upper and lower entropy of one credal set together with their attaining
/// points.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyPair {
    pub upper: f64,
    pub lower: f64,
    pub arg_upper: ProbVector,
    pub arg_lower: ProbVector,
}

impl EntropyPair {
    pub fn difference(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Mixing weights on the member simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct HullWeights(Vec<f64>);

impl HullWeights {
    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HullOptimum {
    pub entropy: f64,
    pub weights: HullWeights,
    /// The mixture `sum_i w_i p_i` attaining `entropy`.
    pub point: ProbVector,
    pub iterations: usize,
}

/// Maximum entropy over the box, by water-filling.
pub fn upper_entropy_box(bx: &BoxCredalSet) -> BoxOptimum {
    let (lower, upper) = (bx.lower(), bx.upper());
    let fill = |c: f64| -> f64 {
        lower.iter().zip(upper).map(|(&l, &u)| c.clamp(l, u)).sum::<f64>() - 1.0
    };

    let mut lo = lower.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = upper.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut level = 0.5 * (lo + hi);
    for _ in 0..WATER_FILL_MAX_ITER {
        level = 0.5 * (lo + hi);
        let g = fill(level);
        if g.abs() <= WATER_FILL_TOL {
            break;
        }
        if g < 0.0 {
            lo = level;
        } else {
            hi = level;
        }
    }

    let mut p: Vec<f64> = lower.iter().zip(upper).map(|(&l, &u)| level.clamp(l, u)).collect();

    // Put the residual mass on the unclamped coordinates so the level is exact.
    let free: Vec<usize> = (0..p.len()).filter(|&k| lower[k] < level && level < upper[k]).collect();
    if !free.is_empty() {
        let clamped: f64 = (0..p.len()).filter(|k| !free.contains(k)).map(|k| p[k]).sum();
        let exact_level = (1.0 - clamped) / free.len() as f64;
        if free.iter().all(|&k| lower[k] <= exact_level && exact_level <= upper[k]) {
            for &k in &free {
                p[k] = exact_level;
            }
        }
    }

    BoxOptimum { entropy: entropy_of(&p), argument: ProbVector::from_raw(p), exact: true }
}

/// Minimum entropy over the box. Exact for `C <= EXACT_LOWER_MAX_CLASSES`.
pub fn lower_entropy_box(bx: &BoxCredalSet) -> BoxOptimum {
    if bx.classes() <= EXACT_LOWER_MAX_CLASSES {
        // A strict pass first; the looser one only matters for boxes that
        // are feasible by less than the simplex tolerance.
        enumerate_extreme_points(bx, 1e-12)
            .or_else(|| enumerate_extreme_points(bx, SIMPLEX_TOL))
            .unwrap_or_else(|| greedy_lower_entropy(bx))
    } else {
        greedy_lower_entropy(bx)
    }
}

/// Both box bounds at once.
pub fn box_entropy_bounds(bx: &BoxCredalSet) -> EntropyPair {
    let up = upper_entropy_box(bx);
    let low = lower_entropy_box(bx);
    EntropyPair { upper: up.entropy, lower: low.entropy, arg_upper: up.argument, arg_lower: low.argument }
}

fn enumerate_extreme_points(bx: &BoxCredalSet, tol: f64) -> Option<BoxOptimum> {
    let (lower, upper) = (bx.lower(), bx.upper());
    let c = bx.classes();
    let h_lower: Vec<f64> = lower.iter().map(|&x| entropy_term(x)).collect();
    let h_upper: Vec<f64> = upper.iter().map(|&x| entropy_term(x)).collect();

    let mut best: Option<(f64, usize, u32, f64)> = None;
    for free in 0..c {
        for mask in 0u32..(1 << (c - 1)) {
            let mut assigned = 0.0;
            let mut h = 0.0;
            for k in (0..c).filter(|&k| k != free) {
                let bit = if k < free { k } else { k - 1 };
                if mask >> bit & 1 == 1 {
                    assigned += upper[k];
                    h += h_upper[k];
                } else {
                    assigned += lower[k];
                    h += h_lower[k];
                }
            }
            let residual = 1.0 - assigned;
            if residual < lower[free] - tol || residual > upper[free] + tol {
                continue;
            }
            let residual = residual.clamp(lower[free], upper[free]);
            let total = h + entropy_term(residual);
            if best.is_none_or(|(b, ..)| total < b) {
                best = Some((total, free, mask, residual));
            }
        }
    }

    let (_, free, mask, residual) = best?;
    let p: Vec<f64> = (0..c)
        .map(|k| {
            if k == free {
                residual
            } else {
                let bit = if k < free { k } else { k - 1 };
                if mask >> bit & 1 == 1 {
                    upper[k]
                } else {
                    lower[k]
                }
            }
        })
        .collect();
    Some(BoxOptimum { entropy: entropy_of(&p), argument: ProbVector::from_raw(p), exact: true })
}

/// Multi-start greedy descent for large `C`. Start `j` pushes as much mass as
/// possible onto class `j`, fills the rest greedily in order of decreasing
/// interval width, then repeatedly applies the pairwise mass transfer with the
/// largest entropy decrease. Transfers always run to a bound because entropy is
/// concave along any segment.
fn greedy_lower_entropy(bx: &BoxCredalSet) -> BoxOptimum {
    let c = bx.classes();
    let (lower, upper) = (bx.lower(), bx.upper());
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| bx.width(b).total_cmp(&bx.width(a)).then(a.cmp(&b)));

    let mut best: Option<Vec<f64>> = None;
    let mut best_h = f64::INFINITY;
    for favored in 0..c {
        let mut p = lower.to_vec();
        let mut spare = 1.0 - lower.iter().sum::<f64>();
        for k in std::iter::once(favored).chain(order.iter().copied().filter(|&k| k != favored)) {
            let add = spare.min(upper[k] - lower[k]).max(0.0);
            p[k] += add;
            spare -= add;
        }
        pairwise_descent(&mut p, lower, upper);
        let h = entropy_of(&p);
        if h < best_h {
            best_h = h;
            best = Some(p);
        }
    }
    let p = best.expect("at least two classes");
    BoxOptimum { entropy: best_h, argument: ProbVector::from_raw(p), exact: false }
}

fn pairwise_descent(p: &mut [f64], lower: &[f64], upper: &[f64]) {
    let c = p.len();
    loop {
        let mut best_gain = 1e-15;
        let mut best_move = None;
        for a in 0..c {
            for b in (a + 1)..c {
                let total = p[a] + p[b];
                let lo = lower[a].max(total - upper[b]);
                let hi = upper[a].min(total - lower[b]);
                if hi <= lo {
                    continue;
                }
                let now = entropy_term(p[a]) + entropy_term(p[b]);
                for pa in [lo, hi] {
                    let gain = now - entropy_term(pa) - entropy_term(total - pa);
                    if gain > best_gain {
                        best_gain = gain;
                        best_move = Some((a, b, pa, total - pa));
                    }
                }
            }
        }
        match best_move {
            Some((a, b, pa, pb)) => {
                p[a] = pa;
                p[b] = pb;
            }
            None => return,
        }
    }
}

/// Maximum entropy over the convex hull of the members.
///
/// Away-step conditional gradient on the mixing weights, starting from the
/// uniform mixture (the ensemble mean). Each step's length is found by
/// bisection on the derivative of the entropy along the segment.
pub fn upper_entropy_hull(ms: &MemberSet) -> HullOptimum {
    let m = ms.len();
    let mut weights = vec![1.0 / m as f64; m];
    let mut q = ms.mix(&weights);
    let mut value = entropy_of(&q);
    if m == 1 {
        return HullOptimum { entropy: value, weights: HullWeights(weights), point: ProbVector::from_raw(q), iterations: 0 };
    }

    let mut grad = vec![0.0; m];
    let mut iterations = 0;
    while iterations < HULL_MAX_ITER {
        iterations += 1;
        // Gradient of H(sum w_i p_i) w.r.t. w_i, up to a constant shared by all i.
        let log_q: Vec<f64> = q.iter().map(|&x| x.max(f64::MIN_POSITIVE).ln()).collect();
        for (g, p) in grad.iter_mut().zip(ms.iter()) {
            *g = -p.iter().zip(&log_q).map(|(&pk, &lq)| pk * lq).sum::<f64>();
        }
        let current: f64 = grad.iter().zip(&weights).map(|(g, w)| g * w).sum();
        let toward = argmax_by(&grad, |_| true);
        let away = argmin_by(&grad, |i| weights[i] > 0.0);
        let fw_gap = grad[toward] - current;
        let away_gap = current - grad[away];
        if fw_gap <= HULL_GAP_TOL {
            break;
        }

        let (direction, max_step) = if fw_gap >= away_gap || weights[away] >= 1.0 {
            let mut d: Vec<f64> = weights.iter().map(|w| -w).collect();
            d[toward] += 1.0;
            (d, 1.0)
        } else {
            let mut d = weights.clone();
            d[away] -= 1.0;
            (d, weights[away] / (1.0 - weights[away]))
        };
        let dq = ms.mix(&direction);
        let step = line_search_entropy(&q, &dq, max_step);
        if step <= 0.0 {
            break;
        }

        for (w, d) in weights.iter_mut().zip(&direction) {
            *w = (*w + step * d).max(0.0);
        }
        if step == max_step && max_step < 1.0 {
            weights[away] = 0.0;
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        q = ms.mix(&weights);
        let next = entropy_of(&q);
        let improvement = next - value;
        value = value.max(next);
        if improvement < HULL_STALL_TOL && step < max_step {
            break;
        }
    }

    HullOptimum { entropy: value, weights: HullWeights(weights), point: ProbVector::from_raw(q), iterations }
}

/// Maximizes `t -> H(q + t dq)` on `[0, max_step]`. The function is concave,
/// so bisection on its derivative `-sum_k dq_k ln(q_k + t dq_k)` suffices.
fn line_search_entropy(q: &[f64], dq: &[f64], max_step: f64) -> f64 {
    let slope = |t: f64| -> f64 {
        q.iter()
            .zip(dq)
            .filter(|(_, &d)| d != 0.0)
            .map(|(&x, &d)| -d * (x + t * d).max(0.0).ln())
            .sum()
    };
    if slope(0.0) <= 0.0 {
        return 0.0;
    }
    if slope(max_step) >= 0.0 {
        return max_step;
    }
    let (mut lo, mut hi) = (0.0, max_step);
    for _ in 0..LINE_SEARCH_STEPS {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn argmax_by(values: &[f64], eligible: impl Fn(usize) -> bool) -> usize {
    let mut best = usize::MAX;
    for (i, &v) in values.iter().enumerate() {
        if eligible(i) && (best == usize::MAX || v > values[best]) {
            best = i;
        }
    }
    best
}

fn argmin_by(values: &[f64], eligible: impl Fn(usize) -> bool) -> usize {
    let mut best = usize::MAX;
    for (i, &v) in values.iter().enumerate() {
        if eligible(i) && (best == usize::MAX || v < values[best]) {
            best = i;
        }
    }
    best
}

/// Minimum entropy over the hull: the least-entropy member, lowest index on ties.
pub fn lower_entropy_hull(ms: &MemberSet) -> (f64, usize) {
    let mut best = (shannon_entropy(&ms.members()[0]), 0);
    for (i, p) in ms.iter().enumerate().skip(1) {
        let h = shannon_entropy(p);
        if h < best.0 {
            best = (h, i);
        }
    }
    best
}

/// Both hull bounds at once.
pub fn hull_entropy_bounds(ms: &MemberSet) -> EntropyPair {
    let up = upper_entropy_hull(ms);
    let (lower, index) = lower_entropy_hull(ms);
    EntropyPair { upper: up.entropy, lower, arg_upper: up.point, arg_lower: ms.members()[index].clone() }
}
