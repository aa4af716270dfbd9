//! Tabular ingestion: schema-typed records, one-hot/min-max encoding, splits,
//! and a synthetic two-blob generator so the whole pipeline runs without any
//! dataset download.
//!
//! File reading lives in the companion crate; everything here operates on
//! in-memory string records.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::DenseTensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Label,
    Ignore,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

/// How the raw label column maps onto the binary task.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LabelRule {
    /// Values in the set map to 0 (benign), everything else to 1.
    BenignSet(Vec<String>),
    /// The column already holds `0`/`1`.
    Direct01,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureSchema {
    pub columns: Vec<ColumnSpec>,
    pub label_rule: LabelRule,
}

impl FeatureSchema {
    pub fn new(columns: Vec<ColumnSpec>, label_rule: LabelRule) -> Result<Self> {
        let labels = columns.iter().filter(|c| c.kind == ColumnKind::Label).count();
        let features = columns
            .iter()
            .filter(|c| matches!(c.kind, ColumnKind::Numeric | ColumnKind::Categorical))
            .count();
        if labels != 1 {
            return Err(Error::InvalidParameter {
                context: "FeatureSchema",
                message: format!("expected exactly one label column, found {labels}"),
            });
        }
        if features == 0 {
            return Err(Error::InvalidParameter {
                context: "FeatureSchema",
                message: String::from("no feature columns"),
            });
        }
        Ok(Self { columns, label_rule })
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    fn feature_columns(&self) -> impl Iterator<Item = (usize, &ColumnSpec)> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| matches!(c.kind, ColumnKind::Numeric | ColumnKind::Categorical))
    }

    /// All-numeric schema used by the synthetic generator.
    pub fn numeric(dim: usize) -> Self {
        let mut columns: Vec<ColumnSpec> = (0..dim)
            .map(|i| ColumnSpec { name: format!("f{i}"), kind: ColumnKind::Numeric })
            .collect();
        columns.push(ColumnSpec { name: String::from("label"), kind: ColumnKind::Label });
        Self { columns, label_rule: LabelRule::Direct01 }
    }

    /// The standard NSL-KDD layout: 41 features, label, difficulty (dropped).
    pub fn nsl_kdd() -> Self {
        const NAMES: &[&str] = &[
            "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes", "land",
            "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in",
            "num_compromised", "root_shell", "su_attempted", "num_root", "num_file_creations",
            "num_shells", "num_access_files", "num_outbound_cmds", "is_host_login",
            "is_guest_login", "count", "srv_count", "serror_rate", "srv_serror_rate",
            "rerror_rate", "srv_rerror_rate", "same_srv_rate", "diff_srv_rate",
            "srv_diff_host_rate", "dst_host_count", "dst_host_srv_count",
            "dst_host_same_srv_rate", "dst_host_diff_srv_rate", "dst_host_same_src_port_rate",
            "dst_host_srv_diff_host_rate", "dst_host_serror_rate", "dst_host_srv_serror_rate",
            "dst_host_rerror_rate", "dst_host_srv_rerror_rate",
        ];
        const CATEGORICAL: &[&str] = &["protocol_type", "service", "flag"];
        let mut columns: Vec<ColumnSpec> = NAMES
            .iter()
            .map(|&name| ColumnSpec {
                name: name.to_string(),
                kind: if CATEGORICAL.contains(&name) {
                    ColumnKind::Categorical
                } else {
                    ColumnKind::Numeric
                },
            })
            .collect();
        columns.push(ColumnSpec { name: String::from("label"), kind: ColumnKind::Label });
        columns.push(ColumnSpec { name: String::from("difficulty"), kind: ColumnKind::Ignore });
        Self { columns, label_rule: LabelRule::BenignSet(vec![String::from("normal")]) }
    }

    /// The official UNSW-NB15 train/test split layout.
    pub fn unsw_nb15() -> Self {
        const NAMES: &[&str] = &[
            "id", "dur", "proto", "service", "state", "spkts", "dpkts", "sbytes", "dbytes",
            "rate", "sttl", "dttl", "sload", "dload", "sloss", "dloss", "sinpkt", "dinpkt",
            "sjit", "djit", "swin", "stcpb", "dtcpb", "dwin", "tcprtt", "synack", "ackdat",
            "smean", "dmean", "trans_depth", "response_body_len", "ct_srv_src", "ct_state_ttl",
            "ct_dst_ltm", "ct_src_dport_ltm", "ct_dst_sport_ltm", "ct_dst_src_ltm",
            "is_ftp_login", "ct_ftp_cmd", "ct_flw_http_mthd", "ct_src_ltm", "ct_srv_dst",
            "is_sm_ips_ports", "attack_cat", "label",
        ];
        const CATEGORICAL: &[&str] = &["proto", "service", "state"];
        const IGNORED: &[&str] = &["id", "attack_cat"];
        let columns = NAMES
            .iter()
            .map(|&name| ColumnSpec {
                name: name.to_string(),
                kind: if name == "label" {
                    ColumnKind::Label
                } else if IGNORED.contains(&name) {
                    ColumnKind::Ignore
                } else if CATEGORICAL.contains(&name) {
                    ColumnKind::Categorical
                } else {
                    ColumnKind::Numeric
                },
            })
            .collect();
        Self { columns, label_rule: LabelRule::Direct01 }
    }
}

/// One parsed value of a feature column.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FieldValue {
    Numeric(f64),
    Categorical(String),
}

/// A schema-typed row: feature values in schema order plus the binary label.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TypedRecord {
    pub fields: Vec<FieldValue>,
    pub label: usize,
}

/// Applies the schema to raw string rows; `line_offset` shifts the reported
/// line numbers past any header line.
pub fn typed_records(
    rows: &[Vec<String>],
    schema: &FeatureSchema,
    line_offset: usize,
) -> Result<Vec<TypedRecord>> {
    let mut out = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let line = line_offset + i + 1;
        if row.len() != schema.column_count() {
            return Err(Error::MalformedRow {
                line,
                message: format!(
                    "expected {} columns, found {}",
                    schema.column_count(),
                    row.len()
                ),
            });
        }
        let mut fields = Vec::new();
        let mut label = None;
        for (spec, value) in schema.columns.iter().zip(row) {
            match spec.kind {
                ColumnKind::Ignore => {}
                ColumnKind::Numeric => {
                    let v: f64 = value.trim().parse().map_err(|_| Error::MalformedRow {
                        line,
                        message: format!("column {}: cannot parse {value:?} as a number", spec.name),
                    })?;
                    fields.push(FieldValue::Numeric(v));
                }
                ColumnKind::Categorical => {
                    fields.push(FieldValue::Categorical(value.trim().to_string()));
                }
                ColumnKind::Label => {
                    let v = value.trim();
                    label = Some(match &schema.label_rule {
                        LabelRule::BenignSet(benign) => {
                            usize::from(!benign.iter().any(|b| b == v))
                        }
                        LabelRule::Direct01 => match v {
                            "0" => 0,
                            "1" => 1,
                            other => {
                                return Err(Error::MalformedRow {
                                    line,
                                    message: format!("unknown label {other:?}"),
                                })
                            }
                        },
                    });
                }
            }
        }
        out.push(TypedRecord { fields, label: label.expect("schema has a label column") });
    }
    Ok(out)
}

/// Per-column state learned from the training records only.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ColumnEncoder {
    /// Min-max range; constant columns widen to `(min, min + 1)`.
    Numeric { name: String, min: f64, max: f64 },
    /// Vocabulary in first-appearance order; transforms to a one-hot block.
    Categorical { name: String, vocabulary: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EncoderState {
    pub columns: Vec<ColumnEncoder>,
}

impl EncoderState {
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for col in &self.columns {
            match col {
                ColumnEncoder::Numeric { name, .. } => names.push(name.clone()),
                ColumnEncoder::Categorical { name, vocabulary } => {
                    for v in vocabulary {
                        names.push(format!("{name}={v}"));
                    }
                }
            }
        }
        names
    }

    pub fn output_width(&self) -> usize {
        self.columns
            .iter()
            .map(|c| match c {
                ColumnEncoder::Numeric { .. } => 1,
                ColumnEncoder::Categorical { vocabulary, .. } => vocabulary.len(),
            })
            .sum()
    }
}

pub fn fit_encoder(records: &[TypedRecord], schema: &FeatureSchema) -> Result<EncoderState> {
    if records.is_empty() {
        return Err(Error::EmptyInput { context: "fit_encoder" });
    }
    let mut columns = Vec::new();
    for (field_idx, (_, spec)) in schema.feature_columns().enumerate() {
        match spec.kind {
            ColumnKind::Numeric => {
                let mut min = f64::INFINITY;
                let mut max = f64::NEG_INFINITY;
                for r in records {
                    if let FieldValue::Numeric(v) = &r.fields[field_idx] {
                        min = min.min(*v);
                        max = max.max(*v);
                    }
                }
                if max <= min {
                    max = min + 1.0;
                }
                columns.push(ColumnEncoder::Numeric { name: spec.name.clone(), min, max });
            }
            ColumnKind::Categorical => {
                let mut vocabulary: Vec<String> = Vec::new();
                for r in records {
                    if let FieldValue::Categorical(v) = &r.fields[field_idx] {
                        if !vocabulary.iter().any(|seen| seen == v) {
                            vocabulary.push(v.clone());
                        }
                    }
                }
                columns
                    .push(ColumnEncoder::Categorical { name: spec.name.clone(), vocabulary });
            }
            _ => unreachable!("feature_columns filters"),
        }
    }
    Ok(EncoderState { columns })
}

/// Encoded instances ready for the models: features in `[0,1]`, binary labels.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset {
    pub features: DenseTensor,
    pub labels: Vec<usize>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn rows(&self) -> usize {
        self.features.rows()
    }

    pub fn width(&self) -> usize {
        self.features.cols()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        (self.labels.len() - ones, ones)
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// One-hot categorical blocks, min-max scaled numerics clamped to `[0,1]`.
/// Unseen categories encode as an all-zero block.
pub fn transform(records: &[TypedRecord], encoder: &EncoderState) -> Result<Dataset> {
    if records.is_empty() {
        return Err(Error::EmptyInput { context: "transform" });
    }
    let width = encoder.output_width();
    let mut features = DenseTensor::zeros(records.len(), width);
    let mut labels = Vec::with_capacity(records.len());
    for (r, record) in records.iter().enumerate() {
        if record.fields.len() != encoder.columns.len() {
            return Err(Error::MalformedRow {
                line: r + 1,
                message: format!(
                    "record has {} fields, encoder expects {}",
                    record.fields.len(),
                    encoder.columns.len()
                ),
            });
        }
        let row = features.row_mut(r);
        let mut offset = 0;
        for (field, col) in record.fields.iter().zip(&encoder.columns) {
            match (field, col) {
                (FieldValue::Numeric(v), ColumnEncoder::Numeric { min, max, .. }) => {
                    row[offset] = ((v - min) / (max - min)).clamp(0.0, 1.0);
                    offset += 1;
                }
                (FieldValue::Categorical(v), ColumnEncoder::Categorical { vocabulary, .. }) => {
                    if let Some(idx) = vocabulary.iter().position(|seen| seen == v) {
                        row[offset + idx] = 1.0;
                    }
                    offset += vocabulary.len();
                }
                _ => {
                    return Err(Error::MalformedRow {
                        line: r + 1,
                        message: String::from("field type does not match encoder column"),
                    })
                }
            }
        }
        labels.push(record.label);
    }
    Ok(Dataset { features, labels, feature_names: encoder.feature_names() })
}

/// Disjoint shuffled split; `fractions` must sum to 1.
pub fn split(dataset: &Dataset, fractions: (f64, f64), rng: &mut Rng) -> Result<(Dataset, Dataset)> {
    if (fractions.0 + fractions.1 - 1.0).abs() > 1e-9 || fractions.0 < 0.0 || fractions.1 < 0.0 {
        return Err(Error::InvalidParameter {
            context: "split",
            message: format!("fractions {:?} must be non-negative and sum to 1", fractions),
        });
    }
    let n = dataset.rows();
    let mut indices: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut indices);
    let first = (fractions.0 * n as f64 + 0.5) as usize;
    let (a, b) = indices.split_at(first.min(n));
    Ok((dataset.select(a), dataset.select(b)))
}

/// Reproducible subsample; stratified keeps the class ratio within one
/// instance.
pub fn subsample(dataset: &Dataset, n: usize, stratified: bool, rng: &mut Rng) -> Result<Dataset> {
    if n > dataset.rows() {
        return Err(Error::InvalidParameter {
            context: "subsample",
            message: format!("requested {n} rows from a dataset of {}", dataset.rows()),
        });
    }
    if !stratified {
        let mut indices: Vec<usize> = (0..dataset.rows()).collect();
        rng.shuffle(&mut indices);
        indices.truncate(n);
        return Ok(dataset.select(&indices));
    }
    let mut class0: Vec<usize> = Vec::new();
    let mut class1: Vec<usize> = Vec::new();
    for (i, &l) in dataset.labels.iter().enumerate() {
        if l == 0 {
            class0.push(i);
        } else {
            class1.push(i);
        }
    }
    rng.shuffle(&mut class0);
    rng.shuffle(&mut class1);
    let total = dataset.rows();
    let want0 = ((n * class0.len()) as f64 / total as f64 + 0.5) as usize;
    let take0 = want0.min(class0.len()).max(n.saturating_sub(class1.len()));
    let take1 = n - take0;
    let mut indices: Vec<usize> = class0[..take0].to_vec();
    indices.extend_from_slice(&class1[..take1]);
    rng.shuffle(&mut indices);
    Ok(dataset.select(&indices))
}

/// Two Gaussian blobs on opposite corners of a band inside `[0,1]^dim`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BlobConfig {
    pub dim: usize,
    /// Distance between the class centers along every coordinate.
    pub separation: f64,
    /// Per-coordinate standard deviation within a blob.
    pub noise_std: f64,
}

impl Default for BlobConfig {
    fn default() -> Self {
        Self { dim: 20, separation: 0.3, noise_std: 0.1 }
    }
}

/// Balanced samples as typed records, ready for the encoder pipeline.
pub fn synthetic_blobs(config: &BlobConfig, n: usize, rng: &mut Rng) -> Vec<TypedRecord> {
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        let center = if label == 0 {
            0.5 - config.separation / 2.0
        } else {
            0.5 + config.separation / 2.0
        };
        let fields = (0..config.dim)
            .map(|_| FieldValue::Numeric((center + config.noise_std * rng.normal()).clamp(0.0, 1.0)))
            .collect();
        records.push(TypedRecord { fields, label });
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    order.into_iter().map(|i| records[i].clone()).collect()
}
