//! Acceptance criteria 1-10 of the specification, one test each.
//!
//! Every test prints a `[criterion N] ...` line with the measured numbers
//! (visible with `-- --nocapture`).

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use credro::data::{gen_dataset, Dataset, DatasetKind, DatasetSpec};
use credro::entropy::{box_entropy_bounds, hull_entropy_bounds, shannon_entropy};
use credro::eval::{auroc, auroc_from_scores, ece, ScoredBinarySample, ECE_BINS};
use credro::measures::{entropy_difference_eu, hull_entropy_difference_eu, mi_decomposition};
use credro::oracle::pair_count_auroc;
use credro::simplex::{extract_intervals, mean_prediction, softmax, MemberSet, ProbVector};
use credro::train::{
    backward_batch, delta_schedule, mean_loss, predict_ensemble, select_top_delta, selection_count, train_deep_ensemble,
    train_ensemble, train_with_deltas, DenseLayer, EnsembleArtifact, MlpModel, TrainConfig,
};
use credro::verify::{check_box_descent, check_box_grid, random_member_set};

fn report(n: u32, passed: bool, detail: &str) {
    println!("[criterion {n}] {} {detail}", if passed { "PASS" } else { "FAIL" });
}

// ---------------------------------------------------------------- 1

#[test]
fn criterion_01_delta_schedule_reproduces_table_7() {
    let start = Instant::now();
    // (delta_G, deltas as numerator / 1000, selected counts at eta = 128)
    let table: [(f64, [u32; 5], [usize; 5]); 3] = [
        (0.5, [500, 625, 750, 875, 1000], [64, 80, 96, 112, 128]),
        (0.7, [700, 775, 850, 925, 1000], [89, 99, 108, 118, 128]),
        (0.9, [900, 925, 950, 975, 1000], [115, 118, 121, 124, 128]),
    ];
    for (delta_g, deltas, counts) in table {
        let schedule = delta_schedule(delta_g, 5).unwrap();
        let expected: Vec<f64> = deltas.iter().map(|&d| f64::from(d) / 1000.0).collect();
        assert_eq!(schedule, expected, "delta_G = {delta_g}");
        let got: Vec<usize> = schedule.iter().map(|&d| selection_count(d, 128)).collect();
        assert_eq!(got, counts, "delta_G = {delta_g}");
        // The selection itself keeps exactly that many samples of a 128-batch.
        let losses: Vec<f64> = (0..128).map(|i| f64::from((i * 37) % 128)).collect();
        for (&d, &c) in schedule.iter().zip(&counts) {
            assert_eq!(select_top_delta(&losses, d).unwrap().len(), c);
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0);
    report(1, true, &format!("Table 7 schedules and counts match exactly ({elapsed:?})"));
}

// ---------------------------------------------------------------- 2

#[test]
fn criterion_02_entropy_solvers_match_oracles() {
    let start = Instant::now();
    let grid = check_box_grid(1000, 2024).unwrap();
    let descent = check_box_descent(1000, 2024);
    let elapsed = start.elapsed();
    let passed = grid.passed() && descent.passed() && grid.checked == 1000 && descent.checked == 1000;
    report(
        2,
        passed,
        &format!(
            "grid (C=2..4): {} sets, max |diff| {:.2e} nats (tol 1e-6); descent (C=5,6): {} sets, max |diff| {:.2e} (tol 1e-9); {elapsed:?}",
            grid.checked, grid.max_deviation, descent.checked, descent.max_deviation
        ),
    );
    assert!(passed, "{grid:?} {descent:?}");
    assert!(elapsed.as_secs() < 120);
}

// ---------------------------------------------------------------- 3

#[test]
fn criterion_03_hull_inside_box_and_binary_equality() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let (mut worst_upper, mut worst_lower, mut worst_binary) = (f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
    let mut binary = 0;
    for t in 0..1000 {
        let m = rng.random_range(2..=8);
        // Every fourth set is binary so the equality branch is well covered.
        let c = if t % 4 == 0 { 2 } else { rng.random_range(3..=6) };
        let ms = random_member_set(&mut rng, m, c);
        let b = box_entropy_bounds(&extract_intervals(&ms));
        let h = hull_entropy_bounds(&ms);
        worst_upper = worst_upper.max(h.upper - b.upper);
        worst_lower = worst_lower.max(b.lower - h.lower);
        if c == 2 {
            binary += 1;
            worst_binary = worst_binary.max((h.upper - b.upper).abs()).max((h.lower - b.lower).abs());
        }
    }
    let passed = worst_upper <= 1e-9 && worst_lower <= 1e-9 && worst_binary <= 1e-9;
    report(
        3,
        passed,
        &format!(
            "1000 sets: max(H̄_C - H̄_B) = {worst_upper:.2e}, max(H̲_B - H̲_C) = {worst_lower:.2e}; {binary} binary sets max |diff| {worst_binary:.2e}"
        ),
    );
    assert!(passed);
}

// ---------------------------------------------------------------- 4

fn small_blobs(n: usize, seed: u64) -> Dataset {
    gen_dataset(&DatasetSpec { n, classes: 3, sigma: 0.4, seed, ..DatasetSpec::default() }).unwrap()
}

fn param_bits(art: &EnsembleArtifact) -> Vec<Vec<u64>> {
    art.members.iter().map(|m| m.params().iter().map(|x| x.to_bits()).collect()).collect()
}

#[test]
fn criterion_04_all_ones_deltas_reduce_to_deep_ensemble() {
    let data = small_blobs(600, 4);
    let config = TrainConfig {
        ensemble_size: 5,
        epochs: 8,
        batch_size: 64,
        seed: 404,
        layer_dims: vec![2, 16, 16, 3],
        ..TrainConfig::for_shape(2, 3)
    };
    let forced = train_with_deltas(&config, &data, vec![1.0; 5]).unwrap();
    let de = train_deep_ensemble(&config, &data).unwrap();
    // delta_G = 1 gives the all-ones schedule through the regular path too.
    let via_schedule = train_ensemble(&TrainConfig { delta_g: 1.0, ..config.clone() }, &data).unwrap();
    let identical = param_bits(&forced) == param_bits(&de) && param_bits(&via_schedule) == param_bits(&de);
    // Sanity: a genuinely robust schedule does change the members.
    let robust = train_ensemble(&config, &data).unwrap();
    let differs = param_bits(&robust) != param_bits(&de);
    report(
        4,
        identical && differs,
        &format!("5 members x {} parameters bitwise identical to DE; delta_G = 0.5 differs: {differs}", de.members[0].param_count()),
    );
    assert!(identical);
    assert!(differs);
}

// ---------------------------------------------------------------- 5

fn with_params(model: &MlpModel, params: &[f64]) -> MlpModel {
    let mut it = params.iter().copied();
    let layers = model
        .layers()
        .iter()
        .map(|l| DenseLayer {
            inputs: l.inputs,
            outputs: l.outputs,
            weights: it.by_ref().take(l.weights.len()).collect(),
            bias: it.by_ref().take(l.bias.len()).collect(),
        })
        .collect();
    MlpModel::from_layers(layers).unwrap()
}

#[test]
fn criterion_05_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for trial in 0..20 {
        let inputs = rng.random_range(1..5);
        let classes = rng.random_range(2..6);
        let mut dims = vec![inputs];
        for _ in 0..rng.random_range(1..=3) {
            dims.push(rng.random_range(2..9));
        }
        dims.push(classes);
        let base = MlpModel::init(&dims, &mut rng).unwrap();
        // Nonzero biases keep the check away from all-dead or uniform-output models.
        let params: Vec<f64> = base.params().iter().map(|p| p + rng.random_range(-0.3..0.3)).collect();
        let model = with_params(&base, &params);

        let n = rng.random_range(2..10);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..inputs).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let mut selected: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.7)).collect();
        if selected.is_empty() {
            selected.push(0);
        }

        let analytic = backward_batch(&model, &refs, &labels, &selected).unwrap().flatten();
        let numeric: Vec<f64> = (0..params.len())
            .map(|i| {
                let mut up = params.clone();
                up[i] += h;
                let mut down = params.clone();
                down[i] -= h;
                let f_up = mean_loss(&with_params(&base, &up), &refs, &labels, &selected);
                let f_down = mean_loss(&with_params(&base, &down), &refs, &labels, &selected);
                (f_up - f_down) / (2.0 * h)
            })
            .collect();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let scale = norm(&analytic).max(norm(&numeric));
        assert!(scale > 1e-8, "trial {trial}: degenerate zero gradient");
        let rel = norm(&diff) / scale;
        worst = worst.max(rel);
        assert!(rel < 1e-5, "trial {trial}: dims {dims:?}, relative error {rel:e}");
    }
    report(5, true, &format!("20 random MLPs, worst relative error {worst:.2e} (tol 1e-5)"));
}

// ---------------------------------------------------------------- 6

struct SeedResult {
    de_accuracy: f64,
    de_mi: f64,
    credro_box: f64,
    credro_hull: f64,
}

fn blobs_spec(n: usize, seed: u64) -> DatasetSpec {
    DatasetSpec { kind: DatasetKind::Blobs, n, classes: 4, radius: 1.0, sigma: 0.36, seed }
}

fn predictions(art: &EnsembleArtifact, data: &Dataset) -> Vec<MemberSet> {
    data.rows().map(|x| predict_ensemble(art, x).unwrap()).collect()
}

/// The specification's desk-scale defaults: hidden [64, 64], 50 epochs,
/// SGD lr 0.05 with momentum 0.9, batch 128, M = 5, delta_G = 0.5.
fn ood_config(seed: u64) -> TrainConfig {
    TrainConfig { ensemble_size: 5, delta_g: 0.5, seed, ..TrainConfig::for_shape(2, 4) }
}

fn ood_seed(seed: u64) -> (SeedResult, Vec<MemberSet>) {
    let all = gen_dataset(&blobs_spec(4000, 1000 + seed)).unwrap();
    let (train, test) = (all.slice(0..3000), all.slice(3000..4000));
    let ood = gen_dataset(&DatasetSpec { kind: DatasetKind::RingOod, n: 2000, ..blobs_spec(2000, 2000 + seed) }).unwrap();
    let config = ood_config(seed);

    let de = train_deep_ensemble(&config, &train).unwrap();
    let credro = train_ensemble(&config, &train).unwrap();

    let (de_id, de_ood) = (predictions(&de, &test), predictions(&de, &ood));
    let (cr_id, cr_ood) = (predictions(&credro, &test), predictions(&credro, &ood));
    let de_accuracy = de_id
        .iter()
        .enumerate()
        .filter(|(i, ms)| mean_prediction(ms).argmax() as i64 == test.label(*i))
        .count() as f64
        / test.len() as f64;

    let score = |id: &[MemberSet], ood: &[MemberSet], f: &dyn Fn(&MemberSet) -> f64| {
        let a: Vec<f64> = id.iter().map(f).collect();
        let b: Vec<f64> = ood.iter().map(f).collect();
        auroc_from_scores(&a, &b).unwrap()
    };
    let result = SeedResult {
        de_accuracy,
        de_mi: score(&de_id, &de_ood, &|ms| mi_decomposition(ms).epistemic),
        credro_box: score(&cr_id, &cr_ood, &|ms| entropy_difference_eu(&extract_intervals(ms))),
        credro_hull: score(&cr_id, &cr_ood, &hull_entropy_difference_eu),
    };
    let mut evaluated = de_id;
    evaluated.extend(de_ood);
    evaluated.extend(cr_id);
    evaluated.extend(cr_ood);
    (result, evaluated)
}

struct OodExperiment {
    results: Vec<SeedResult>,
    /// Every member set scored in the experiment (ID and OOD, both ensembles).
    evaluated: Vec<MemberSet>,
    elapsed: std::time::Duration,
}

/// Trains the criterion 6 ensembles once per test process; criterion 7 reuses
/// the scored instances.
fn ood_experiment() -> &'static OodExperiment {
    static EXPERIMENT: OnceLock<OodExperiment> = OnceLock::new();
    EXPERIMENT.get_or_init(|| {
        let start = Instant::now();
        let mut results = Vec::new();
        let mut evaluated = Vec::new();
        for seed in 0..5 {
            let (r, sets) = ood_seed(seed);
            println!(
                "[criterion 6] seed {seed}: DE test acc {:.3}, AUROC DE-MI {:.4}, CreDRO box-ED {:.4}, CreDRO hull-ED {:.4}",
                r.de_accuracy, r.de_mi, r.credro_box, r.credro_hull
            );
            results.push(r);
            evaluated.extend(sets);
        }
        OodExperiment { results, evaluated, elapsed: start.elapsed() }
    })
}

#[test]
fn criterion_06_desk_scale_ood_directional() {
    let exp = ood_experiment();
    let mean = |f: fn(&SeedResult) -> f64| exp.results.iter().map(f).sum::<f64>() / exp.results.len() as f64;
    let (acc, mi, bx, hull) = (mean(|r| r.de_accuracy), mean(|r| r.de_mi), mean(|r| r.credro_box), mean(|r| r.credro_hull));
    let (a, b) = (bx - mi, bx - hull);
    let accuracy_in_band = (0.92..=0.97).contains(&acc);
    let (pass_a, pass_b) = (a >= -0.005, b >= -0.005);
    report(
        6,
        pass_a && pass_b && accuracy_in_band,
        &format!("5 seeds, DE test accuracy {acc:.4} (band 0.92-0.97), {:?}", exp.elapsed),
    );
    println!(
        "[criterion 6a] {} CreDRO entropy-difference AUROC {bx:.4} vs DE mutual-information AUROC {mi:.4}: diff {a:+.4} (need >= -0.005)",
        if pass_a { "PASS" } else { "FAIL" }
    );
    println!(
        "[criterion 6b] {} box-EU AUROC {bx:.4} vs hull-EU AUROC {hull:.4}: diff {b:+.4} (need >= -0.005)",
        if pass_b { "PASS" } else { "FAIL" }
    );
    assert!(accuracy_in_band, "DE accuracy {acc} outside 0.92-0.97");
    assert!(exp.elapsed.as_secs() < 300);
    assert!(pass_b, "box-EU AUROC below hull-EU AUROC by {b}");
    assert!(pass_a, "CreDRO entropy-difference AUROC below DE mutual-information AUROC by {a}");
}

// ---------------------------------------------------------------- 7

#[test]
fn criterion_07_uncertainty_ordering() {
    let mut instances: Vec<&MemberSet> = ood_experiment().evaluated.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let random: Vec<MemberSet> = (0..2000)
        .map(|_| {
            let (m, c) = (rng.random_range(1..=8), rng.random_range(2..=8));
            random_member_set(&mut rng, m, c)
        })
        .collect();
    instances.extend(&random);

    // Round-off slack on the chain of inequalities; the bounds themselves are
    // exact up to a few ulps.
    let slack = 1e-12;
    let mut min_epistemic = f64::INFINITY;
    let mut violations = 0;
    for ms in &instances {
        let bounds = box_entropy_bounds(&extract_intervals(ms));
        let h_mean = shannon_entropy(&mean_prediction(ms));
        let ln_c = (ms.classes() as f64).ln();
        let ordered = -slack <= bounds.lower
            && bounds.lower <= h_mean + slack
            && h_mean <= bounds.upper + slack
            && bounds.upper <= ln_c + slack;
        let epistemic = mi_decomposition(ms).epistemic;
        min_epistemic = min_epistemic.min(epistemic);
        if !ordered || epistemic < -1e-9 {
            violations += 1;
        }
    }
    report(
        7,
        violations == 0,
        &format!("{} instances, {violations} ordering violations, min MI epistemic {min_epistemic:.2e}", instances.len()),
    );
    assert_eq!(violations, 0);
}

// ---------------------------------------------------------------- 8

#[test]
fn criterion_08_rank_auroc_equals_pair_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut tied_sets = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=500);
        let levels = rng.random_range(2..=n.max(3));
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.1).collect();
        let mut ood: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        ood[0] = !ood[n - 1];
        let samples: Vec<ScoredBinarySample> = scores.iter().zip(&ood).map(|(&score, &ood)| ScoredBinarySample { score, ood }).collect();
        let rank = auroc(&samples).unwrap();
        let pairs = pair_count_auroc(&scores, &ood).unwrap();
        assert_eq!(rank.to_bits(), pairs.to_bits(), "n = {n}");
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        tied_sets += usize::from(sorted.windows(2).any(|w| w[0] == w[1]));
    }
    report(8, true, &format!("100 score sets (n <= 500), {tied_sets} with ties: exact equality"));
}

// ---------------------------------------------------------------- 9

#[test]
fn criterion_09_ece_sanity() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let calibrated: Vec<(ProbVector, usize)> = (0..10_000)
        .map(|_| {
            let c = rng.random_range(2..=5);
            let logits: Vec<f64> = (0..c).map(|_| rng.random_range(-3.0..3.0)).collect();
            let p = softmax(&logits).unwrap();
            // The label is drawn from the predicted distribution itself.
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let label = p.iter().position(|&q| {
                acc += q;
                u < acc
            });
            (p.clone(), label.unwrap_or(c - 1))
        })
        .collect();
    let e = ece(&calibrated, ECE_BINS).unwrap();
    let one_hot: Vec<(ProbVector, usize)> = (0..1000)
        .map(|i| {
            let mut v = vec![0.0; 4];
            v[i % 4] = 1.0;
            (ProbVector::new(v).unwrap(), i % 4)
        })
        .collect();
    let zero = ece(&one_hot, ECE_BINS).unwrap();
    let passed = e <= 0.02 && zero == 0.0;
    report(9, passed, &format!("calibrated n = 10000: ECE {e:.4} (<= 0.02); one-hot correct: ECE {zero}"));
    assert!(passed);
}

// ---------------------------------------------------------------- 10

fn credro(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_credro")).args(args).output().unwrap();
    assert!(out.status.success(), "credro {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

/// Runs gen-data -> train -> predict -> uq -> eval in `dir` with `threads`
/// workers and returns every produced file (sorted by name) with its bytes.
fn pipeline(dir: &Path, threads: usize) -> Vec<(PathBuf, Vec<u8>)> {
    let t = threads.to_string();
    let run = |args: &[&str]| {
        let mut all = vec!["--threads", t.as_str()];
        all.extend_from_slice(args);
        credro(&all);
    };
    std::fs::write(dir.join("id.spec"), "kind = blobs\nn = 1200\nclasses = 4\nsigma = 0.36\nseed = 10\n").unwrap();
    std::fs::write(dir.join("ood.spec"), "kind = ring_ood\nn = 600\nclasses = 4\nsigma = 0.36\nseed = 11\n").unwrap();
    std::fs::write(
        dir.join("train.cfg"),
        "layer_dims = 2,16,16,4\nensemble_size = 5\ndelta_g = 0.5\nepochs = 6\nbatch_size = 64\nseed = 12\n",
    )
    .unwrap();
    run(&["gen-data", "--spec", &p(dir, "id.spec"), "--out", &p(dir, "id.csv")]);
    run(&["gen-data", "--spec", &p(dir, "ood.spec"), "--out", &p(dir, "ood.csv")]);
    run(&["train", "--config", &p(dir, "train.cfg"), "--data", &p(dir, "id.csv"), "--out", &p(dir, "model")]);
    run(&["predict", "--model-dir", &p(dir, "model"), "--data", &p(dir, "id.csv"), "--out", &p(dir, "id.pred")]);
    run(&["predict", "--model-dir", &p(dir, "model"), "--data", &p(dir, "ood.csv"), "--out", &p(dir, "ood.pred")]);
    for set in ["box", "hull"] {
        for (split, _) in [("id", 0), ("ood", 1)] {
            run(&["uq", "--pred", &p(dir, &format!("{split}.pred")), "--set", set, "--out", &p(dir, &format!("{split}.{set}.uq"))]);
        }
        run(&[
            "eval-ood",
            "--id",
            &p(dir, &format!("id.{set}.uq")),
            "--ood",
            &p(dir, &format!("ood.{set}.uq")),
            "--out",
            &p(dir, &format!("ood.{set}.report")),
        ]);
        run(&["eval-select", "--pred", &p(dir, "id.pred"), "--set", set, "--out", &p(dir, &format!("select.{set}.report"))]);
    }
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push((path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn criterion_10_pipeline_is_byte_deterministic_across_thread_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let single = pipeline(a.path(), 1);
    let multi = pipeline(b.path(), 4);
    let names: Vec<_> = single.iter().map(|(n, _)| n.clone()).collect();
    assert_eq!(names, multi.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>());
    let mismatched: Vec<_> = single.iter().zip(&multi).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.display().to_string()).collect();
    let bytes: usize = single.iter().map(|(_, b)| b.len()).sum();
    report(
        10,
        mismatched.is_empty(),
        &format!("{} files ({bytes} bytes) identical with 1 and 4 threads; mismatches: {mismatched:?}", single.len()),
    );
    assert!(mismatched.is_empty());
}
