//! On-disk formats.
//!
//! * Feature file: `"TICF"`, `u32` version 1, `u64` count, `u32` dim (all
//!   little-endian), then `count * dim` little-endian `f32` values, row-major.
//! * Meta file: one JSON object per feature row,
//!   `{"id", "time": "HH:MM", "lat", "lon", "date", "brightness"}` with
//!   `null` for absent fields.
//! * Model file: JSON with `format_version` 1, the model config plus loss
//!   mode, both MLPs as `[{"w": rows, "b": values}]`, and `log_tau`.
//!
//! Every write goes to a temporary file in the target directory and is
//! renamed into place.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DenseLayer, Mlp, ModelConfig, ModelParams, TimeInput, TimeInputKind};
use crate::time::{parse_clock, Dataset, FeatureRecord};
use crate::train::LossMode;

pub const FEATURE_MAGIC: &[u8; 4] = b"TICF";
pub const FEATURE_VERSION: u32 = 1;
pub const FEATURE_HEADER_BYTES: usize = 20;
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Writes `bytes` to `path` through a sibling temporary file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Serializes feature rows; values are narrowed to `f32`.
pub fn encode_features(dim: usize, rows: &[&[f64]]) -> Vec<u8> {
    let mut out = Vec::with_capacity(FEATURE_HEADER_BYTES + 4 * rows.len() * dim);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(rows.len() as u64).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for row in rows {
        debug_assert_eq!(row.len(), dim);
        for &v in *row {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

/// Parses a feature file held in memory. `path` only labels errors.
pub fn decode_features(path: &Path, bytes: &[u8]) -> Result<(usize, Vec<Vec<f64>>)> {
    if bytes.len() < FEATURE_HEADER_BYTES {
        return Err(Error::format(
            path,
            format!("header truncated: {} bytes, need {FEATURE_HEADER_BYTES}", bytes.len()),
        ));
    }
    if &bytes[0..4] != FEATURE_MAGIC {
        return Err(Error::format(path, format!("bad magic {:?} at byte 0, expected \"TICF\"", &bytes[0..4])));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FEATURE_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported version {version} at byte 4, expected {FEATURE_VERSION}"),
        ));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let dim = u32::from_le_bytes(bytes[16..20].try_into().expect("4 bytes")) as usize;
    let expected = (count as u128) * (dim as u128) * 4 + FEATURE_HEADER_BYTES as u128;
    if bytes.len() as u128 != expected {
        return Err(Error::format(
            path,
            format!(
                "length mismatch: header at byte 8 declares {count} rows x {dim} dims = {expected} bytes, file has {}",
                bytes.len()
            ),
        ));
    }
    let values: Vec<f64> = bytes[FEATURE_HEADER_BYTES..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(
            path,
            format!(
                "non-finite value at byte {} (row {}, column {})",
                FEATURE_HEADER_BYTES + 4 * i,
                i / dim.max(1),
                i % dim.max(1)
            ),
        ));
    }
    let rows = if dim == 0 {
        vec![Vec::new(); count as usize]
    } else {
        values.chunks_exact(dim).map(<[f64]>::to_vec).collect()
    };
    Ok((dim, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MetaLine {
    id: String,
    time: String,
    lat: Option<f64>,
    lon: Option<f64>,
    date: Option<String>,
    brightness: Option<f64>,
}

pub fn encode_meta(dataset: &Dataset) -> Vec<u8> {
    let mut out = Vec::new();
    for r in dataset.records() {
        let line = MetaLine {
            id: r.id.clone(),
            time: r.time.to_string(),
            lat: r.lat,
            lon: r.lon,
            date: r.date.clone(),
            brightness: r.brightness,
        };
        serde_json::to_writer(&mut out, &line).expect("plain struct serializes");
        out.push(b'\n');
    }
    out
}

/// Joins feature rows with parsed meta lines into records.
pub fn decode_meta(path: &Path, text: &str, rows: Vec<Vec<f64>>) -> Result<Vec<FeatureRecord>> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() != rows.len() {
        return Err(Error::format(
            path,
            format!("{} metadata lines for {} feature rows", lines.len(), rows.len()),
        ));
    }
    lines
        .iter()
        .zip(rows)
        .enumerate()
        .map(|(i, (line, features))| {
            let at = |msg: String| Error::format(path, format!("line {}: {msg}", i + 1));
            let m: MetaLine = serde_json::from_str(line).map_err(|e| at(e.to_string()))?;
            let time = parse_clock(&m.time).map_err(|e| at(e.to_string()))?;
            Ok(FeatureRecord {
                id: m.id,
                features,
                time,
                lat: m.lat,
                lon: m.lon,
                date: m.date,
                brightness: m.brightness,
            })
        })
        .collect()
}

pub fn write_dataset(dataset: &Dataset, features: &Path, meta: &Path) -> Result<()> {
    let rows: Vec<&[f64]> = dataset.records().iter().map(|r| r.features.as_slice()).collect();
    write_atomic(features, &encode_features(dataset.dim(), &rows))?;
    write_atomic(meta, &encode_meta(dataset))
}

pub fn read_dataset(features: &Path, meta: &Path) -> Result<Dataset> {
    let (dim, rows) = decode_features(features, &read_bytes(features)?)?;
    let text = String::from_utf8(read_bytes(meta)?).map_err(|e| Error::format(meta, e.to_string()))?;
    let records = decode_meta(meta, &text, rows)?;
    Dataset::new(dim, records).map_err(|e| Error::format(meta, e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFile {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFileConfig {
    #[serde(flatten)]
    pub model: ModelConfig,
    pub loss_mode: LossMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub config: ModelFileConfig,
    /// Sampled encoder state for non-one-hot time inputs.
    pub time_input: TimeInput,
    pub time_encoder: Vec<LayerFile>,
    pub adaptor: Vec<LayerFile>,
    pub log_tau: f64,
}

fn layers_to_file(mlp: &Mlp) -> Vec<LayerFile> {
    mlp.layers()
        .iter()
        .map(|l| LayerFile {
            w: l.weights.rows().into_iter().map(|r| r.to_vec()).collect(),
            b: l.bias.to_vec(),
        })
        .collect()
}

fn layers_from_file(path: &Path, name: &str, layers: &[LayerFile], dims: &[usize]) -> Result<Vec<DenseLayer>> {
    if layers.len() + 1 != dims.len() {
        return Err(Error::format(
            path,
            format!("{name}: {} layers, config implies {}", layers.len(), dims.len() - 1),
        ));
    }
    layers
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let (din, dout) = (dims[i], dims[i + 1]);
            let shape_err = |what: String| Error::format(path, format!("{name} layer {i}: {what}"));
            if l.w.len() != dout {
                return Err(shape_err(format!("w has {} rows, expected {dout}", l.w.len())));
            }
            if let Some(r) = l.w.iter().position(|row| row.len() != din) {
                return Err(shape_err(format!("w row {r} has {} columns, expected {din}", l.w[r].len())));
            }
            if l.b.len() != dout {
                return Err(shape_err(format!("b has {} values, expected {dout}", l.b.len())));
            }
            let w = Array2::from_shape_vec((dout, din), l.w.concat()).expect("shape checked");
            DenseLayer::new(w, Array1::from(l.b.clone())).map_err(|e| shape_err(e.to_string()))
        })
        .collect()
}

impl ModelFile {
    pub fn from_params(params: &ModelParams, loss_mode: LossMode) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            config: ModelFileConfig {
                model: params.config.clone(),
                loss_mode,
            },
            time_input: params.time_input.clone(),
            time_encoder: layers_to_file(&params.time_encoder),
            adaptor: layers_to_file(&params.adaptor),
            log_tau: params.log_tau,
        }
    }

    /// Rebuilds parameters, checking every shape against the config.
    pub fn into_params(self, path: &Path) -> Result<(ModelParams, LossMode)> {
        let cfg = self.config.model;
        cfg.validate().map_err(|e| Error::format(path, format!("config: {e}")))?;
        let kind_matches = matches!(
            (&cfg.time_input, &self.time_input),
            (TimeInputKind::OneHot, TimeInput::OneHot)
                | (TimeInputKind::Rff { .. }, TimeInput::Rff(_))
                | (TimeInputKind::Time2Vec { .. }, TimeInput::Time2Vec(_))
        );
        if !kind_matches {
            return Err(Error::format(path, "time_input does not match config.time_input"));
        }
        let mut time_dims = vec![self.time_input.dim(cfg.num_classes)];
        time_dims.extend(&cfg.time_hidden);
        time_dims.push(cfg.embed_dim);
        let mut adaptor_dims = vec![cfg.feature_dim];
        adaptor_dims.extend(&cfg.adaptor_hidden);
        adaptor_dims.push(cfg.embed_dim);
        let te = layers_from_file(path, "time_encoder", &self.time_encoder, &time_dims)?;
        let ad = layers_from_file(path, "adaptor", &self.adaptor, &adaptor_dims)?;
        if !self.log_tau.is_finite() {
            return Err(Error::format(path, "log_tau is not finite"));
        }
        let to_fmt = |e: Error| Error::format(path, e.to_string());
        let params = ModelParams {
            time_encoder: Mlp::new(te, cfg.activation, false).map_err(to_fmt)?,
            adaptor: Mlp::new(ad, cfg.activation, cfg.adaptor_is_residual()).map_err(to_fmt)?,
            time_input: self.time_input,
            log_tau: self.log_tau,
            config: cfg,
        };
        Ok((params, self.config.loss_mode))
    }
}

pub fn model_to_json(params: &ModelParams, loss_mode: LossMode) -> String {
    serde_json::to_string_pretty(&ModelFile::from_params(params, loss_mode)).expect("model serializes")
}

pub fn model_from_json(path: &Path, text: &str) -> Result<(ModelParams, LossMode)> {
    let raw: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::format(path, e.to_string()))?;
    match raw.get("format_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == MODEL_FORMAT_VERSION as u64 => {}
        Some(v) => {
            return Err(Error::format(
                path,
                format!("format_version {v} is not supported (expected {MODEL_FORMAT_VERSION})"),
            ))
        }
        None => return Err(Error::format(path, "missing integer format_version")),
    }
    let file: ModelFile = serde_json::from_value(raw).map_err(|e| Error::format(path, e.to_string()))?;
    file.into_params(path)
}

pub fn save_model(path: &Path, params: &ModelParams, loss_mode: LossMode) -> Result<()> {
    write_atomic(path, model_to_json(params, loss_mode).as_bytes())
}

pub fn load_model(path: &Path) -> Result<(ModelParams, LossMode)> {
    let text = String::from_utf8(read_bytes(path)?).map_err(|e| Error::format(path, e.to_string()))?;
    model_from_json(path, &text)
}
