use std::fmt::{self, Write as _};
use std::path::Path;

use rayon::prelude::*;

use credro::data::gen_dataset;
use credro::eval::{accuracy_rejection, auroc_from_scores, ece, normalized_ar, pil_summary, ECE_BINS};
use credro::io::{self, FormatError, PredictionRecord, UqRow};
use credro::measures::{evaluate, CredalKind, Measure};
use credro::simplex::{extract_intervals, mean_prediction};
use credro::train::{predict_ensemble, train_deep_ensemble, train_ensemble};
use credro::verify::{run_oracle_suite, CheckSummary};

use crate::Command;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

/// Missing inputs are usage errors; anything wrong inside a file is a data error.
fn read_err(path: &Path) -> impl Fn(FormatError) -> CliError + '_ {
    move |e| match &e {
        FormatError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => CliError::Usage(e.to_string()),
        _ => CliError::Data(format!("{}: {e}", path.display())),
    }
}

fn write_err(e: FormatError) -> CliError {
    CliError::Data(e.to_string())
}

fn write_report(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn parse_choice<T: std::str::FromStr>(value: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| CliError::Usage(e.to_string()))
}

fn resolve_measure(measure: Option<&str>, classes: usize) -> Result<Measure, CliError> {
    match measure {
        Some(m) => parse_choice(m),
        None => Ok(Measure::default_for(classes)),
    }
}

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::GenData { spec, out } => gen_data(&spec, &out),
        Command::Train { config, data, out, deep_ensemble } => train(&config, &data, &out, deep_ensemble),
        Command::Predict { model_dir, data, out } => predict(&model_dir, &data, &out),
        Command::Uq(args) => uq(&args.pred, &args.set, args.measure.as_deref(), &args.out),
        Command::EvalOod { id, ood, out } => eval_ood(&id, &ood, &out),
        Command::EvalSelect { pred, measure, set, out } => eval_select(&pred, measure.as_deref(), &set, &out),
        Command::OracleCheck { trials, seed } => oracle_check(trials, seed),
    }
}

fn gen_data(spec_path: &Path, out: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(spec_path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", spec_path.display())))?;
    let spec = io::parse_dataset_spec(&text).map_err(|e| CliError::Data(format!("{}: {e}", spec_path.display())))?;
    let data = gen_dataset(&spec).map_err(|e| CliError::Data(e.to_string()))?;
    io::write_dataset(out, &data).map_err(write_err)
}

fn train(config_path: &Path, data_path: &Path, out: &Path, deep_ensemble: bool) -> Result<(), CliError> {
    let config = io::read_train_config(config_path).map_err(read_err(config_path))?;
    let data = io::read_dataset(data_path).map_err(read_err(data_path))?;
    let trained = if deep_ensemble { train_deep_ensemble(&config, &data) } else { train_ensemble(&config, &data) };
    let artifact = trained.map_err(|e| match e {
        credro::train::TrainError::Diverged { .. } | credro::train::TrainError::NonFiniteLoss(_) => {
            CliError::Numeric(e.to_string())
        }
        _ => CliError::Data(e.to_string()),
    })?;
    io::save_ensemble(out, &artifact).map_err(write_err)
}

fn predict(model_dir: &Path, data_path: &Path, out: &Path) -> Result<(), CliError> {
    if !model_dir.is_dir() {
        return Err(CliError::Usage(format!("model directory {} does not exist", model_dir.display())));
    }
    let artifact = io::load_ensemble(model_dir).map_err(read_err(model_dir))?;
    let data = io::read_dataset(data_path).map_err(read_err(data_path))?;
    let classes = artifact.config.classes() as i64;
    if let Some(i) = (0..data.len()).find(|&i| data.label(i) < -1 || data.label(i) >= classes) {
        return Err(CliError::Data(format!("row {i}: label {} outside -1..{classes}", data.label(i))));
    }
    let records = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let members = predict_ensemble(&artifact, data.row(i)).map_err(|e| CliError::Data(format!("row {i}: {e}")))?;
            Ok(PredictionRecord { instance_id: i as u64, label: data.label(i), members })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    io::write_predictions(out, &records).map_err(write_err)
}

fn read_records(path: &Path) -> Result<Vec<PredictionRecord>, CliError> {
    let records = io::read_predictions(path).map_err(read_err(path))?;
    if records.is_empty() {
        return Err(CliError::Data(format!("{}: no instances", path.display())));
    }
    Ok(records)
}

fn uq_values(records: &[PredictionRecord], set: CredalKind, measure: Measure) -> Result<Vec<f64>, CliError> {
    records
        .par_iter()
        .map(|r| {
            let v = evaluate(&r.members, set, measure).map_err(|e| CliError::Usage(e.to_string()))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::Numeric(format!("instance {}: non-finite {measure}", r.instance_id)))
            }
        })
        .collect()
}

fn uq(pred: &Path, set: &str, measure: Option<&str>, out: &Path) -> Result<(), CliError> {
    let set: CredalKind = parse_choice(set)?;
    let records = read_records(pred)?;
    let measure = resolve_measure(measure, records[0].members.classes())?;
    let values = uq_values(&records, set, measure)?;
    let rows: Vec<UqRow> = records
        .iter()
        .zip(values)
        .map(|(r, value)| UqRow {
            instance_id: r.instance_id,
            label: r.label,
            set: set.name().to_string(),
            measure: measure.name().to_string(),
            value,
        })
        .collect();
    io::write_uq_table(out, &rows).map_err(write_err)
}

/// Reads a UQ table and checks that it holds a single (set, measure) pair.
fn read_uq(path: &Path) -> Result<(Vec<f64>, String, String), CliError> {
    let rows = io::read_uq_table(path).map_err(read_err(path))?;
    let first = rows.first().ok_or_else(|| CliError::Data(format!("{}: no rows", path.display())))?;
    let (set, measure) = (first.set.clone(), first.measure.clone());
    if let Some(r) = rows.iter().find(|r| r.set != set || r.measure != measure) {
        return Err(CliError::Data(format!(
            "{}: instance {} has {}/{}, expected {set}/{measure}",
            path.display(),
            r.instance_id,
            r.set,
            r.measure
        )));
    }
    Ok((rows.iter().map(|r| r.value).collect(), set, measure))
}

fn eval_ood(id: &Path, ood: &Path, out: &Path) -> Result<(), CliError> {
    let (id_scores, set, measure) = read_uq(id)?;
    let (ood_scores, ood_set, ood_measure) = read_uq(ood)?;
    if (&set, &measure) != (&ood_set, &ood_measure) {
        return Err(CliError::Data(format!(
            "ID file holds {set}/{measure} but OOD file holds {ood_set}/{ood_measure}"
        )));
    }
    let value = auroc_from_scores(&id_scores, &ood_scores).map_err(|e| CliError::Numeric(e.to_string()))?;
    let mut report = String::from("metric,value\n");
    let _ = writeln!(report, "set,{set}");
    let _ = writeln!(report, "measure,{measure}");
    let _ = writeln!(report, "n_id,{}", id_scores.len());
    let _ = writeln!(report, "n_ood,{}", ood_scores.len());
    let _ = writeln!(report, "auroc,{value}");
    write_report(out, &report)
}

fn eval_select(pred: &Path, measure: Option<&str>, set: &str, out: &Path) -> Result<(), CliError> {
    let set: CredalKind = parse_choice(set)?;
    let records = read_records(pred)?;
    if let Some(r) = records.iter().find(|r| r.label < 0) {
        return Err(CliError::Data(format!("instance {} is unlabeled; eval-select needs labels", r.instance_id)));
    }
    let measure = resolve_measure(measure, records[0].members.classes())?;
    let eu = uq_values(&records, set, measure)?;
    let means: Vec<_> = records.iter().map(|r| (mean_prediction(&r.members), r.label as usize)).collect();
    let correct: Vec<bool> = means.iter().map(|(p, y)| p.argmax() == *y).collect();
    let curve = accuracy_rejection(&eu, &correct).map_err(|e| CliError::Numeric(e.to_string()))?;
    let normalized = normalized_ar(&curve).ok();
    let calibration = ece(&means, ECE_BINS).map_err(|e| CliError::Numeric(e.to_string()))?;
    let boxes: Vec<_> = records.iter().map(|r| extract_intervals(&r.members)).collect();
    let pil = pil_summary(&boxes).map_err(|e| CliError::Numeric(e.to_string()))?;

    let na = "NA".to_string();
    let mut report = String::from("metric,value\n");
    let _ = writeln!(report, "set,{set}");
    let _ = writeln!(report, "measure,{measure}");
    let _ = writeln!(report, "n,{}", records.len());
    let _ = writeln!(report, "accuracy,{}", curve.accuracies[0]);
    let _ = writeln!(report, "ece,{calibration}");
    let _ = writeln!(report, "ar_auc,{}", curve.auc);
    let _ = writeln!(report, "normalized_ar_auc,{}", normalized.as_ref().map_or(na.clone(), |c| c.auc.to_string()));
    let _ = writeln!(report, "pil_mean,{}", pil.mean);
    let _ = writeln!(report, "pil_std,{}", pil.std);
    report.push_str("\nrejection_rate,accuracy,normalized_accuracy\n");
    for (i, (r, a)) in curve.rejection_rates.iter().zip(&curve.accuracies).enumerate() {
        let n = normalized.as_ref().map_or(na.clone(), |c| c.accuracies[i].to_string());
        let _ = writeln!(report, "{r},{a},{n}");
    }
    write_report(out, &report)
}

fn summary_line(name: &str, s: &CheckSummary) -> String {
    format!(
        "{name:<18} checked {:>6}  failures {:>4}  max deviation {:.3e}  {}",
        s.checked,
        s.failures,
        s.max_deviation,
        if s.passed() { "PASS" } else { "FAIL" }
    )
}

fn oracle_check(trials: usize, seed: u64) -> Result<(), CliError> {
    if trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let report = run_oracle_suite(trials, seed).map_err(|e| CliError::Numeric(e.to_string()))?;
    println!("{}", summary_line("box vs grid", &report.box_grid));
    println!("{}", summary_line("box vs descent", &report.box_descent));
    println!("{}", summary_line("hull in box", &report.hull_containment));
    println!("{}", summary_line("auroc vs pairs", &report.auroc));
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Numeric("oracle mismatch".into()))
    }
}
