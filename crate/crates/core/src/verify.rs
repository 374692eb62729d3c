//! Seeded random instances and the oracle cross-check suite behind
//! `credro oracle-check`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::entropy::{box_entropy_bounds, hull_entropy_bounds, lower_entropy_box};
use crate::eval::auroc;
use crate::eval::ScoredBinarySample;
use crate::oracle::{grid_oracle_entropy, pair_count_auroc, random_descent_lower_entropy, OracleError};
use crate::simplex::{extract_intervals, softmax, MemberSet};

/// Grid step used by the box-entropy lattice oracle.
pub const ORACLE_GRID_STEP: f64 = 1e-3;
/// Agreement tolerance between the exact box solvers and the lattice oracle (nats).
pub const GRID_TOLERANCE: f64 = 1e-6;
/// Agreement tolerance between vertex enumeration and random local descent (nats).
pub const DESCENT_TOLERANCE: f64 = 1e-9;
/// Random restarts for the local-descent oracle.
pub const DESCENT_STARTS: usize = 50;
/// Slack for the hull-inside-box sandwich and binary equality checks (nats).
pub const CONTAINMENT_TOLERANCE: f64 = 1e-9;

/// Draws `m` softmax vectors over `c` classes that disagree to a random degree:
/// a shared logit vector plus member noise whose scale is itself random, from
/// near-identical members to strongly disagreeing ones.
pub fn random_member_set(rng: &mut ChaCha8Rng, m: usize, c: usize) -> MemberSet {
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let base: Vec<f64> = (0..c).map(|_| 2.0 * normal(rng)).collect();
    let spread = 10f64.powf(rng.random_range(-2.0..0.5));
    let rows = (0..m).map(|_| {
        let logits: Vec<f64> = base.iter().map(|b| b + spread * normal(rng)).collect();
        softmax(&logits).expect("finite logits")
    });
    MemberSet::new(rows.collect()).expect("m >= 1 members of equal length")
}

/// Outcome of one oracle family: how many instances were checked, how many
/// exceeded the tolerance and the worst observed deviation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckSummary {
    pub checked: usize,
    pub failures: usize,
    pub max_deviation: f64,
}

impl CheckSummary {
    fn record(&mut self, deviation: f64, tolerance: f64) {
        self.checked += 1;
        self.max_deviation = self.max_deviation.max(deviation);
        if deviation.is_nan() || deviation > tolerance {
            self.failures += 1;
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OracleReport {
    /// Exact box solvers vs lattice oracle, C in {2, 3, 4}.
    pub box_grid: CheckSummary,
    /// Vertex enumeration vs random local descent, C in {5, 6}.
    pub box_descent: CheckSummary,
    /// Hull bounds inside box bounds (and equal for C = 2).
    pub hull_containment: CheckSummary,
    /// Rank AUROC vs pair counting; deviation is |difference|, tolerance 0.
    pub auroc: CheckSummary,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.box_grid.passed() && self.box_descent.passed() && self.hull_containment.passed() && self.auroc.passed()
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Box solvers vs the lattice oracle on `trials` member sets (M = 5, C cycling
/// through 2, 3, 4).
pub fn check_box_grid(trials: usize, seed: u64) -> Result<CheckSummary, OracleError> {
    let mut rng = rng_for(seed, 1);
    let mut summary = CheckSummary::default();
    for t in 0..trials {
        let ms = random_member_set(&mut rng, 5, 2 + t % 3);
        let bx = extract_intervals(&ms);
        let exact = box_entropy_bounds(&bx);
        let grid = grid_oracle_entropy(&bx, ORACLE_GRID_STEP)?;
        let dev = (exact.upper - grid.upper).abs().max((exact.lower - grid.lower).abs());
        summary.record(dev, GRID_TOLERANCE);
    }
    Ok(summary)
}

/// Lower-entropy vertex enumeration vs 50-start random local descent on
/// `trials` member sets (M = 5, C alternating 5 and 6).
pub fn check_box_descent(trials: usize, seed: u64) -> CheckSummary {
    let mut rng = rng_for(seed, 2);
    let mut summary = CheckSummary::default();
    for t in 0..trials {
        let ms = random_member_set(&mut rng, 5, 5 + t % 2);
        let bx = extract_intervals(&ms);
        let exact = lower_entropy_box(&bx);
        let (descent, _) = random_descent_lower_entropy(&bx, DESCENT_STARTS, &mut rng);
        summary.record((exact.entropy - descent).abs(), DESCENT_TOLERANCE);
    }
    summary
}

/// Hull entropy bounds sandwiched by box bounds on `trials` member sets
/// (M in 2..=8, C in 2..=6); for C = 2 the two pairs must coincide.
pub fn check_hull_containment(trials: usize, seed: u64) -> CheckSummary {
    let mut rng = rng_for(seed, 3);
    let mut summary = CheckSummary::default();
    for _ in 0..trials {
        let m = rng.random_range(2..=8);
        let c = rng.random_range(2..=6);
        let ms = random_member_set(&mut rng, m, c);
        let b = box_entropy_bounds(&extract_intervals(&ms));
        let h = hull_entropy_bounds(&ms);
        let dev = if c == 2 {
            (h.upper - b.upper).abs().max((h.lower - b.lower).abs())
        } else {
            (h.upper - b.upper).max(b.lower - h.lower).max(0.0)
        };
        summary.record(dev, CONTAINMENT_TOLERANCE);
    }
    summary
}

/// Random score sets (n up to 500) with heavy injected ties; the rank-based
/// AUROC must equal pair counting exactly.
pub fn check_auroc(trials: usize, seed: u64) -> CheckSummary {
    let mut rng = rng_for(seed, 4);
    let mut summary = CheckSummary::default();
    for _ in 0..trials {
        let n = rng.random_range(2..=500);
        let levels = rng.random_range(1..=n.max(2));
        let mut scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        let mut ood: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        ood[0] = false;
        ood[n - 1] = true;
        // Sprinkle exact duplicates of other samples' scores.
        for _ in 0..n / 5 {
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            scores[a] = scores[b];
        }
        let samples: Vec<ScoredBinarySample> =
            scores.iter().zip(&ood).map(|(&score, &ood)| ScoredBinarySample { score, ood }).collect();
        let rank = auroc(&samples).expect("both classes present");
        let pairs = pair_count_auroc(&scores, &ood).expect("both classes present");
        summary.record((rank - pairs).abs(), 0.0);
    }
    summary
}

/// Runs every oracle family with `trials` instances each.
pub fn run_oracle_suite(trials: usize, seed: u64) -> Result<OracleReport, OracleError> {
    Ok(OracleReport {
        box_grid: check_box_grid(trials, seed)?,
        box_descent: check_box_descent(trials, seed),
        hull_containment: check_hull_containment(trials, seed),
        auroc: check_auroc(trials, seed),
    })
}
