//! Flat `key = value` configuration files. Blank lines and `#` comments are
//! ignored; unknown or repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{parse_f64, parse_int, read_text, write_text, FormatError};
use crate::data::DatasetSpec;
use crate::train::TrainConfig;

pub(crate) type Pairs = BTreeMap<String, (usize, String)>;

pub(crate) fn parse_pairs(text: &str) -> Result<Pairs, FormatError> {
    let mut pairs = Pairs::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap().trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| FormatError::parse(line, format!("expected `key = value`, found `{content}`")))?;
        let key = key.trim().to_string();
        if pairs.contains_key(&key) {
            return Err(FormatError::DuplicateKey { line, key });
        }
        pairs.insert(key, (line, value.trim().to_string()));
    }
    Ok(pairs)
}

fn parse_bool(value: &str, line: usize) -> Result<bool, FormatError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(FormatError::parse(line, format!("`{other}` is not true/false"))),
    }
}

pub(crate) fn train_config_from_pairs(mut pairs: Pairs) -> Result<TrainConfig, FormatError> {
    let (dims_line, dims_text) = pairs.remove("layer_dims").ok_or_else(|| FormatError::MissingKey("layer_dims".into()))?;
    let layer_dims = dims_text.split(',').map(|d| parse_int::<usize>(d, dims_line)).collect::<Result<Vec<_>, _>>()?;
    let mut cfg = TrainConfig { layer_dims: layer_dims.clone(), ..TrainConfig::for_shape(1, 2) };
    for (key, (line, value)) in pairs {
        match key.as_str() {
            "delta_g" => cfg.delta_g = parse_f64(&value, line)?,
            "ensemble_size" => cfg.ensemble_size = parse_int(&value, line)?,
            "batch_size" => cfg.batch_size = parse_int(&value, line)?,
            "epochs" => cfg.epochs = parse_int(&value, line)?,
            "learning_rate" => cfg.learning_rate = parse_f64(&value, line)?,
            "momentum" => cfg.momentum = parse_f64(&value, line)?,
            "seed" => cfg.seed = parse_int(&value, line)?,
            "shuffle" => cfg.shuffle = parse_bool(&value, line)?,
            _ => return Err(FormatError::UnknownKey { line, key }),
        }
    }
    cfg.validate().map_err(|e| FormatError::InvalidConfig(e.to_string()))?;
    Ok(cfg)
}

pub fn parse_train_config(text: &str) -> Result<TrainConfig, FormatError> {
    train_config_from_pairs(parse_pairs(text)?)
}

pub(crate) fn write_train_config_text(cfg: &TrainConfig) -> String {
    let dims: Vec<String> = cfg.layer_dims.iter().map(usize::to_string).collect();
    let mut out = String::new();
    let _ = writeln!(out, "delta_g = {}", cfg.delta_g);
    let _ = writeln!(out, "ensemble_size = {}", cfg.ensemble_size);
    let _ = writeln!(out, "batch_size = {}", cfg.batch_size);
    let _ = writeln!(out, "epochs = {}", cfg.epochs);
    let _ = writeln!(out, "learning_rate = {}", cfg.learning_rate);
    let _ = writeln!(out, "momentum = {}", cfg.momentum);
    let _ = writeln!(out, "seed = {}", cfg.seed);
    let _ = writeln!(out, "layer_dims = {}", dims.join(","));
    let _ = writeln!(out, "shuffle = {}", cfg.shuffle);
    out
}

pub fn write_train_config(path: &Path, cfg: &TrainConfig) -> Result<(), FormatError> {
    write_text(path, &write_train_config_text(cfg))
}

pub fn parse_dataset_spec(text: &str) -> Result<DatasetSpec, FormatError> {
    let mut spec = DatasetSpec::default();
    for (key, (line, value)) in parse_pairs(text)? {
        match key.as_str() {
            "kind" => spec.kind = value.parse().map_err(|e: crate::data::DataError| FormatError::parse(line, e.to_string()))?,
            "n" => spec.n = parse_int(&value, line)?,
            "classes" => spec.classes = parse_int(&value, line)?,
            "radius" => spec.radius = parse_f64(&value, line)?,
            "sigma" => spec.sigma = parse_f64(&value, line)?,
            "seed" => spec.seed = parse_int(&value, line)?,
            _ => return Err(FormatError::UnknownKey { line, key }),
        }
    }
    spec.validate().map_err(|e| FormatError::InvalidConfig(e.to_string()))?;
    Ok(spec)
}

pub fn write_dataset_spec(path: &Path, spec: &DatasetSpec) -> Result<(), FormatError> {
    let text = format!(
        "kind = {}\nn = {}\nclasses = {}\nradius = {}\nsigma = {}\nseed = {}\n",
        spec.kind, spec.n, spec.classes, spec.radius, spec.sigma, spec.seed
    );
    write_text(path, &text)
}

/// Reads a training config from disk.
pub fn read_train_config(path: &Path) -> Result<TrainConfig, FormatError> {
    parse_train_config(&read_text(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DatasetKind;

    #[test]
    fn train_config_round_trip() {
        let cfg = TrainConfig { delta_g: 0.7, seed: 99, shuffle: false, ..TrainConfig::for_shape(2, 4) };
        assert_eq!(parse_train_config(&write_train_config_text(&cfg)).unwrap(), cfg);
    }

    #[test]
    fn partial_config_uses_defaults() {
        let cfg = parse_train_config("# tiny\nlayer_dims = 2, 8, 3\nepochs = 4\n").unwrap();
        assert_eq!(cfg.layer_dims, vec![2, 8, 3]);
        assert_eq!(cfg.epochs, 4);
        assert_eq!(cfg.delta_g, 0.5);
        assert_eq!(cfg.batch_size, 128);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(parse_train_config("epochs = 3\n"), Err(FormatError::MissingKey(_))));
        assert!(matches!(
            parse_train_config("layer_dims = 2,3\nlerning_rate = 0.1\n"),
            Err(FormatError::UnknownKey { line: 2, .. })
        ));
        assert!(matches!(parse_train_config("layer_dims = 2,3\nseed = 1\nseed = 2\n"), Err(FormatError::DuplicateKey { line: 3, .. })));
        assert!(matches!(parse_train_config("layer_dims = 2,3\ndelta_g = 0.2\n"), Err(FormatError::InvalidConfig(_))));
        assert!(matches!(parse_train_config("layer_dims = 2,3\nepochs\n"), Err(FormatError::Parse { line: 2, .. })));
        assert!(matches!(parse_train_config("layer_dims = 2,3\nshuffle = yes\n"), Err(FormatError::Parse { line: 2, .. })));
    }

    #[test]
    fn dataset_spec_parsing() {
        let spec = parse_dataset_spec("kind = ring_ood\nn = 50\nsigma = 0.1\nseed = 3\n").unwrap();
        assert_eq!(spec.kind, DatasetKind::RingOod);
        assert_eq!((spec.n, spec.seed, spec.sigma), (50, 3, 0.1));
        assert!(matches!(parse_dataset_spec("kind = spiral\n"), Err(FormatError::Parse { line: 1, .. })));
        assert!(matches!(parse_dataset_spec("classes = 9\nn = 3\n"), Err(FormatError::InvalidConfig(_))));
        assert!(matches!(parse_dataset_spec("noise = 1\n"), Err(FormatError::UnknownKey { .. })));
    }
}
