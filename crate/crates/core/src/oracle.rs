//! Brute-force reference computations used to cross-check the exact solvers.
//!
//! None of these share code paths with [`crate::entropy`] or [`crate::eval`]
//! beyond the scalar `-x ln x` term; they are slow on purpose.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::entropy::{entropy_of, entropy_term, EntropyPair};
use crate::simplex::{BoxCredalSet, MemberSet, ProbVector};

/// Largest class count the lattice oracle accepts.
pub const GRID_MAX_CLASSES: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("grid oracle supports at most {GRID_MAX_CLASSES} classes, got {0}")]
    UnsupportedSize(usize),
    #[error("grid step must lie in (0, 0.1], got {0}")]
    BadStep(f64),
    #[error("no lattice point satisfies the box and simplex constraints")]
    EmptyLattice,
}

/// Lattice search for upper and lower entropy over a box, followed by a local
/// polish.
///
/// The widest coordinate is determined by the sum constraint; every other
/// coordinate runs over `lower_k + j * step` plus its upper bound, so bounds and
/// extreme points of the box are on the lattice. The lattice optima are within
/// `O(step)` of the continuum optima; the polish then refines them:
/// the maximum by pairwise exact line maximization, the minimum (from the best
/// few lattice points) by pairwise transfers to bounds.
pub fn grid_oracle_entropy(bx: &BoxCredalSet, step: f64) -> Result<EntropyPair, OracleError> {
    let c = bx.classes();
    if c > GRID_MAX_CLASSES {
        return Err(OracleError::UnsupportedSize(c));
    }
    if !(step > 0.0 && step <= 0.1) {
        return Err(OracleError::BadStep(step));
    }
    let (lower, upper) = (bx.lower(), bx.upper());
    let determined = (0..c).max_by(|&a, &b| bx.width(a).total_cmp(&bx.width(b)).then(b.cmp(&a))).unwrap();
    let walked: Vec<usize> = (0..c).filter(|&k| k != determined).collect();

    let grids: Vec<Vec<f64>> = walked
        .iter()
        .map(|&k| {
            let mut g = Vec::new();
            let mut j = 0u64;
            loop {
                let v = lower[k] + j as f64 * step;
                if v >= upper[k] - 1e-15 {
                    break;
                }
                g.push(v);
                j += 1;
            }
            g.push(upper[k]);
            g
        })
        .collect();
    let terms: Vec<Vec<f64>> = grids.iter().map(|g| g.iter().map(|&v| entropy_term(v)).collect()).collect();
    // Remaining lower/upper mass of the walked coordinates after position i.
    let tail_lower: Vec<f64> = (0..=walked.len()).map(|i| walked[i..].iter().map(|&k| lower[k]).sum()).collect();
    let tail_upper: Vec<f64> = (0..=walked.len()).map(|i| walked[i..].iter().map(|&k| upper[k]).sum()).collect();

    let mut search = LatticeSearch {
        grids: &grids,
        terms: &terms,
        tail_lower: &tail_lower,
        tail_upper: &tail_upper,
        det_lower: lower[determined],
        det_upper: upper[determined],
        index: vec![0; walked.len()],
        best_max: None,
        best_mins: Vec::new(),
    };
    search.walk(0, 0.0, 0.0);

    let assemble = |idx: &[usize]| -> Vec<f64> {
        let mut p = vec![0.0; c];
        let mut used = 0.0;
        for (i, &k) in walked.iter().enumerate() {
            p[k] = grids[i][idx[i]];
            used += p[k];
        }
        p[determined] = (1.0 - used).clamp(lower[determined], upper[determined]);
        p
    };

    let (_, max_idx) = search.best_max.clone().ok_or(OracleError::EmptyLattice)?;
    let mut arg_upper = assemble(&max_idx);
    pairwise_ascent(&mut arg_upper, lower, upper);

    let mut arg_lower = Vec::new();
    let mut lower_value = f64::INFINITY;
    for (_, idx) in &search.best_mins {
        let mut p = assemble(idx);
        pairwise_transfer_descent(&mut p, lower, upper);
        let h = entropy_of(&p);
        if h < lower_value {
            lower_value = h;
            arg_lower = p;
        }
    }

    Ok(EntropyPair {
        upper: entropy_of(&arg_upper),
        lower: lower_value,
        arg_upper: ProbVector::from_raw(arg_upper),
        arg_lower: ProbVector::from_raw(arg_lower),
    })
}

const KEPT_MINIMA: usize = 16;

struct LatticeSearch<'a> {
    grids: &'a [Vec<f64>],
    terms: &'a [Vec<f64>],
    tail_lower: &'a [f64],
    tail_upper: &'a [f64],
    det_lower: f64,
    det_upper: f64,
    index: Vec<usize>,
    best_max: Option<(f64, Vec<usize>)>,
    best_mins: Vec<(f64, Vec<usize>)>,
}

impl LatticeSearch<'_> {
    fn leaf(&mut self, used: f64, h: f64) {
        let rest = 1.0 - used;
        if rest < self.det_lower - 1e-12 || rest > self.det_upper + 1e-12 {
            return;
        }
        let total = h + entropy_term(rest.clamp(self.det_lower, self.det_upper));
        if self.best_max.as_ref().is_none_or(|(b, _)| total > *b) {
            self.best_max = Some((total, self.index.clone()));
        }
        if self.best_mins.len() < KEPT_MINIMA || total < self.best_mins[KEPT_MINIMA - 1].0 {
            let at = self.best_mins.partition_point(|(v, _)| *v <= total);
            self.best_mins.insert(at, (total, self.index.clone()));
            self.best_mins.truncate(KEPT_MINIMA);
        }
    }

    fn walk(&mut self, depth: usize, used: f64, h: f64) {
        if depth + 1 == self.grids.len() {
            self.last_coordinate(depth, used, h);
            return;
        }
        for j in 0..self.grids[depth].len() {
            let v = self.grids[depth][j];
            let after = used + v;
            // Everything still to place, including the determined coordinate.
            let min_rest = self.tail_lower[depth + 1] + self.det_lower;
            let max_rest = self.tail_upper[depth + 1] + self.det_upper;
            if after + min_rest > 1.0 + 1e-12 {
                break;
            }
            if after + max_rest < 1.0 - 1e-12 {
                continue;
            }
            self.index[depth] = j;
            self.walk(depth + 1, after, h + self.terms[depth][j]);
        }
    }

    /// The last walked coordinate `v` and the determined one share the mass
    /// `rest`, and `-v ln v - (rest - v) ln(rest - v)` is concave in `v`. Over
    /// the feasible lattice points its minimum is therefore at an end of the
    /// feasible range and its maximum at a lattice neighbour of `rest / 2` (or
    /// an end), so those at most four points stand in for the whole row.
    fn last_coordinate(&mut self, depth: usize, used: f64, h: f64) {
        let grid = &self.grids[depth];
        let rest = 1.0 - used;
        let need_lo = rest - self.det_upper - 1e-12;
        let need_hi = rest - self.det_lower + 1e-12;
        let first = grid.partition_point(|&v| v < need_lo);
        let end = grid.partition_point(|&v| v <= need_hi);
        if first >= end {
            return;
        }
        let mid = grid.partition_point(|&v| v < 0.5 * rest);
        let mut candidates = [first, end - 1, mid.saturating_sub(1), mid];
        candidates.sort_unstable();
        let mut previous = None;
        for j in candidates {
            if j < first || j >= end || previous == Some(j) {
                continue;
            }
            previous = Some(j);
            self.index[depth] = j;
            let (v, t) = (grid[j], self.terms[depth][j]);
            self.leaf(used + v, h + t);
        }
    }
}

/// Pairwise coordinate ascent: for each pair, the entropy-maximizing split of
/// their joint mass is the equal split, clamped to what the bounds allow.
fn pairwise_ascent(p: &mut [f64], lower: &[f64], upper: &[f64]) {
    let c = p.len();
    for _ in 0..100_000 {
        let mut moved = 0.0f64;
        for a in 0..c {
            for b in (a + 1)..c {
                let total = p[a] + p[b];
                let lo = lower[a].max(total - upper[b]);
                let hi = upper[a].min(total - lower[b]);
                if hi < lo {
                    continue;
                }
                let pa = (0.5 * total).clamp(lo, hi);
                moved = moved.max((pa - p[a]).abs());
                p[a] = pa;
                p[b] = total - pa;
            }
        }
        if moved < 1e-16 {
            break;
        }
    }
}

/// Pairwise transfers that run to a bound whenever that lowers entropy; stops
/// at a point where no single transfer helps.
///
/// Equal-entropy transfers are taken only when they put more of the pair on
/// its bounds, which walks ties towards an extreme point and cannot cycle.
fn pairwise_transfer_descent(p: &mut [f64], lower: &[f64], upper: &[f64]) {
    const MAX_SWEEPS: usize = 10_000;
    let c = p.len();
    let at_bound = |x: f64, k: usize| u8::from(x <= lower[k] || x >= upper[k]);
    for _ in 0..MAX_SWEEPS {
        let mut improved = false;
        for a in 0..c {
            for b in (a + 1)..c {
                let total = p[a] + p[b];
                let lo = lower[a].max(total - upper[b]);
                let hi = upper[a].min(total - lower[b]);
                if hi < lo {
                    continue;
                }
                let now = entropy_term(p[a]) + entropy_term(p[b]);
                let at_lo = entropy_term(lo) + entropy_term(total - lo);
                let at_hi = entropy_term(hi) + entropy_term(total - hi);
                let (pa, h) = if at_lo <= at_hi { (lo, at_lo) } else { (hi, at_hi) };
                let pb = total - pa;
                let more_bound = at_bound(pa, a) + at_bound(pb, b) > at_bound(p[a], a) + at_bound(p[b], b);
                if h < now - 1e-16 || (h <= now && more_bound) {
                    p[a] = pa;
                    p[b] = pb;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
}

/// Lower entropy by local descent from `starts` random extreme points (random
/// fill orders of the spare mass). Returns the best value and its point.
pub fn random_descent_lower_entropy<R: Rng + ?Sized>(bx: &BoxCredalSet, starts: usize, rng: &mut R) -> (f64, Vec<f64>) {
    let c = bx.classes();
    let (lower, upper) = (bx.lower(), bx.upper());
    let mut best = (f64::INFINITY, Vec::new());
    let mut order: Vec<usize> = (0..c).collect();
    for _ in 0..starts {
        order.shuffle(rng);
        let mut p = lower.to_vec();
        let mut spare = 1.0 - lower.iter().sum::<f64>();
        for &k in &order {
            // A random share of the available room, the last one takes the rest.
            let room = (upper[k] - lower[k]).min(spare).max(0.0);
            let add = if rng.random_bool(0.5) { room } else { room * rng.random::<f64>() };
            p[k] += add;
            spare -= add;
        }
        for &k in &order {
            let add = (upper[k] - p[k]).min(spare).max(0.0);
            p[k] += add;
            spare -= add;
        }
        pairwise_transfer_descent(&mut p, lower, upper);
        let h = entropy_of(&p);
        if h < best.0 {
            best = (h, p);
        }
    }
    best
}

/// Grid search over the mixing-weight simplex for the maximum hull entropy.
/// Visits every weight vector whose entries are multiples of `step`.
pub fn hull_weight_grid_upper(ms: &MemberSet, step: f64) -> (f64, Vec<f64>) {
    let m = ms.len();
    let units = (1.0 / step).round() as usize;
    let rows: Vec<&[f64]> = ms.iter().map(|p| p.as_slice()).collect();
    let mut counts = vec![0usize; m];
    let mut best = (f64::NEG_INFINITY, vec![0.0; m]);
    let mut mix = vec![0.0; ms.classes()];

    fn recurse(
        i: usize,
        left: usize,
        units: usize,
        rows: &[&[f64]],
        counts: &mut Vec<usize>,
        mix: &mut Vec<f64>,
        best: &mut (f64, Vec<f64>),
    ) {
        let m = rows.len();
        if i == m - 1 {
            counts[i] = left;
            for (k, x) in mix.iter_mut().enumerate() {
                *x = (0..m).map(|j| counts[j] as f64 * rows[j][k]).sum::<f64>() / units as f64;
            }
            let h = entropy_of(mix);
            if h > best.0 {
                *best = (h, counts.iter().map(|&n| n as f64 / units as f64).collect());
            }
            return;
        }
        for n in 0..=left {
            counts[i] = n;
            recurse(i + 1, left - n, units, rows, counts, mix, best);
        }
    }

    recurse(0, units, units, &rows, &mut counts, &mut mix, &mut best);
    best
}

/// AUROC by counting every (positive, negative) pair, ties counting half.
pub fn pair_count_auroc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let mut wins = 0.0;
    let (mut n_pos, mut n_neg) = (0u64, 0u64);
    for (i, &si) in scores.iter().enumerate() {
        if !positive[i] {
            n_neg += 1;
            continue;
        }
        n_pos += 1;
        for (j, &sj) in scores.iter().enumerate() {
            if positive[j] {
                continue;
            }
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    Some(wins / (n_pos as f64 * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::shannon_entropy;

    #[test]
    fn rejects_large_or_bad_input() {
        let b = BoxCredalSet::full(5).unwrap();
        assert_eq!(grid_oracle_entropy(&b, 1e-3).unwrap_err(), OracleError::UnsupportedSize(5));
        let b = BoxCredalSet::full(3).unwrap();
        assert_eq!(grid_oracle_entropy(&b, 0.5).unwrap_err(), OracleError::BadStep(0.5));
        assert_eq!(grid_oracle_entropy(&b, 0.0).unwrap_err(), OracleError::BadStep(0.0));
    }

    #[test]
    fn degenerate_box() {
        let p = ProbVector::new(vec![0.25, 0.5, 0.25]).unwrap();
        let pair = grid_oracle_entropy(&BoxCredalSet::degenerate(&p), 1e-3).unwrap();
        let h = shannon_entropy(&p);
        assert!((pair.upper - h).abs() < 1e-12 && (pair.lower - h).abs() < 1e-12);
    }

    #[test]
    fn full_binary_box() {
        let pair = grid_oracle_entropy(&BoxCredalSet::full(2).unwrap(), 1e-3).unwrap();
        assert!((pair.upper - std::f64::consts::LN_2).abs() < 1e-6);
        assert_eq!(pair.lower, 0.0);
    }

    #[test]
    fn pair_counting() {
        assert_eq!(pair_count_auroc(&[1.0, 2.0], &[false, true]), Some(1.0));
        assert_eq!(pair_count_auroc(&[1.0, 1.0], &[false, true]), Some(0.5));
        assert_eq!(pair_count_auroc(&[1.0, 1.0], &[true, true]), None);
    }

    #[test]
    fn weight_grid_covers_vertices() {
        let ms = MemberSet::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.9, 0.1]]).unwrap();
        let (h, w) = hull_weight_grid_upper(&ms, 0.01);
        assert!((h - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
