//! Binary model files and ensemble directories.
//!
//! Model layout (all integers and floats little-endian):
//!
//! ```text
//! "CREDRO1"                      7 bytes
//! n_dims: u64, dims: n_dims x u64
//! per layer: weights (out x in, row-major) f64, bias (out) f64
//! checksum: u64                  wrapping sum of all preceding bytes
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::config::{parse_pairs, train_config_from_pairs, write_train_config_text};
use super::{parse_f64, parse_int, read_text, write_text, FormatError};
use crate::train::{DenseLayer, EnsembleArtifact, MlpModel};

pub const MODEL_MAGIC: &[u8; 7] = b"CREDRO1";

const METADATA_FILE: &str = "ensemble.txt";
const TRACE_FILE: &str = "loss_trace.csv";

fn checksum(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0u64, |acc, &b| acc.wrapping_add(u64::from(b)))
}

pub fn encode_model(model: &MlpModel) -> Vec<u8> {
    let dims = model.layer_dims();
    let mut out = Vec::with_capacity(16 + 8 * (dims.len() + model.param_count()));
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&(dims.len() as u64).to_le_bytes());
    for d in &dims {
        out.extend_from_slice(&(*d as u64).to_le_bytes());
    }
    for layer in model.layers() {
        for x in layer.weights.iter().chain(&layer.bias) {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    let sum = checksum(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], FormatError> {
        if self.bytes.len() - self.offset < n {
            return Err(FormatError::Corrupt { offset: self.offset, message: format!("need {n} more bytes") });
        }
        let s = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decodes a model file, verifying the trailing checksum before anything else.
pub fn decode_model(bytes: &[u8]) -> Result<MlpModel, FormatError> {
    if bytes.len() < MODEL_MAGIC.len() + 8 {
        let stored = 0;
        return Err(FormatError::Checksum { stored, computed: checksum(bytes) });
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    let computed = checksum(body);
    if stored != computed {
        return Err(FormatError::Checksum { stored, computed });
    }

    let mut cur = Cursor { bytes: body, offset: 0 };
    if cur.take(MODEL_MAGIC.len())? != MODEL_MAGIC {
        return Err(FormatError::Corrupt { offset: 0, message: "bad magic".into() });
    }
    let n_dims = cur.u64()? as usize;
    if !(2..=64).contains(&n_dims) {
        return Err(FormatError::Corrupt { offset: 7, message: format!("implausible layer count {n_dims}") });
    }
    let mut dims = Vec::with_capacity(n_dims);
    for _ in 0..n_dims {
        let at = cur.offset;
        let d = cur.u64()?;
        if d == 0 || d > (1 << 24) {
            return Err(FormatError::Corrupt { offset: at, message: format!("implausible layer size {d}") });
        }
        dims.push(d as usize);
    }
    let mut layers = Vec::with_capacity(n_dims - 1);
    for w in dims.windows(2) {
        let (inputs, outputs) = (w[0], w[1]);
        let weights = (0..inputs * outputs).map(|_| cur.f64()).collect::<Result<Vec<_>, _>>()?;
        let bias = (0..outputs).map(|_| cur.f64()).collect::<Result<Vec<_>, _>>()?;
        layers.push(DenseLayer { inputs, outputs, weights, bias });
    }
    if cur.offset != body.len() {
        return Err(FormatError::Corrupt { offset: cur.offset, message: "trailing bytes after parameters".into() });
    }
    MlpModel::from_layers(layers).map_err(|e| FormatError::Corrupt { offset: cur.offset, message: e.to_string() })
}

pub fn write_model(path: &Path, model: &MlpModel) -> Result<(), FormatError> {
    std::fs::write(path, encode_model(model)).map_err(|e| FormatError::io(path, e))
}

pub fn read_model(path: &Path) -> Result<MlpModel, FormatError> {
    decode_model(&std::fs::read(path).map_err(|e| FormatError::io(path, e))?)
}

fn member_file(i: usize) -> String {
    format!("member_{i:03}.bin")
}

/// Writes `member_NNN.bin` per member, `ensemble.txt` (deltas and training
/// configuration) and `loss_trace.csv`.
pub fn save_ensemble(dir: &Path, artifact: &EnsembleArtifact) -> Result<(), FormatError> {
    std::fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))?;
    for (i, m) in artifact.members.iter().enumerate() {
        write_model(&dir.join(member_file(i)), m)?;
    }
    let mut meta = String::new();
    let _ = writeln!(meta, "members = {}", artifact.members.len());
    let deltas: Vec<String> = artifact.deltas.iter().map(|d| d.to_string()).collect();
    let _ = writeln!(meta, "deltas = {}", deltas.join(","));
    meta.push_str(&write_train_config_text(&artifact.config));
    write_text(&dir.join(METADATA_FILE), &meta)?;

    let mut trace = String::from("member,step,loss\n");
    for (i, t) in artifact.loss_traces.iter().enumerate() {
        for (s, l) in t.iter().enumerate() {
            let _ = writeln!(trace, "{i},{s},{l}");
        }
    }
    write_text(&dir.join(TRACE_FILE), &trace)
}

pub fn load_ensemble(dir: &Path) -> Result<EnsembleArtifact, FormatError> {
    let meta_text = read_text(&dir.join(METADATA_FILE))?;
    let mut pairs = parse_pairs(&meta_text)?;
    let (members_line, members) = pairs.remove("members").ok_or_else(|| FormatError::MissingKey("members".into()))?;
    let count: usize = parse_int(&members, members_line)?;
    let (deltas_line, deltas_text) = pairs.remove("deltas").ok_or_else(|| FormatError::MissingKey("deltas".into()))?;
    let deltas = deltas_text.split(',').map(|d| parse_f64(d, deltas_line)).collect::<Result<Vec<_>, _>>()?;
    if deltas.len() != count {
        return Err(FormatError::parse(deltas_line, format!("{} deltas for {count} members", deltas.len())));
    }
    let config = train_config_from_pairs(pairs)?;

    let members = (0..count).map(|i| read_model(&dir.join(member_file(i)))).collect::<Result<Vec<_>, _>>()?;
    if let Some(m) = members.iter().find(|m| m.layer_dims() != config.layer_dims) {
        return Err(FormatError::InvalidConfig(format!(
            "member has layer_dims {:?}, metadata says {:?}",
            m.layer_dims(),
            config.layer_dims
        )));
    }

    let mut loss_traces = vec![Vec::new(); count];
    let trace_path = dir.join(TRACE_FILE);
    if trace_path.exists() {
        for (i, raw) in read_text(&trace_path)?.lines().enumerate().skip(1) {
            let line = i + 1;
            let fields: Vec<&str> = raw.split(',').collect();
            if fields.len() != 3 {
                return Err(FormatError::parse(line, "expected member,step,loss"));
            }
            let member: usize = parse_int(fields[0], line)?;
            let trace = loss_traces.get_mut(member).ok_or_else(|| FormatError::parse(line, format!("no member {member}")))?;
            trace.push(parse_f64(fields[2], line)?);
        }
    }
    Ok(EnsembleArtifact { members, deltas, config, loss_traces })
}
