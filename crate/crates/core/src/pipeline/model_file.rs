//! Versioned JSON detector files.
//!
//! Every real number is stored as a hex-float string (authoritative) next to
//! its shortest decimal rendering; matrices are row-major.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::hexfloat;
use super::DetectorModel;
use crate::classifier::{TrainedTree, TreeNode};
use crate::error::{Error, Result};
use crate::observer::ObserverConfig;
use crate::sysid::LtiModel;
use crate::timeseries::DelayConfig;

pub const FORMAT_NAME: &str = "faultwatch-detector";
pub const FORMAT_VERSION: u32 = 1;
const ORDERING: &str = "newest-first";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Num {
    hex: String,
    decimal: f64,
}

impl Num {
    fn new(v: f64) -> Self {
        Self { hex: hexfloat::format(v), decimal: v }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixDoc {
    rows: usize,
    cols: usize,
    hex: Vec<String>,
    decimal: Vec<f64>,
}

impl MatrixDoc {
    fn new(m: &DMatrix<f64>) -> Self {
        let values: Vec<f64> = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect();
        Self { rows: m.nrows(), cols: m.ncols(), hex: values.iter().map(|v| hexfloat::format(*v)).collect(), decimal: values }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingDoc {
    stride: usize,
    delays: usize,
    ordering: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObserverDoc {
    gain: Num,
    window: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum NodeDoc {
    Leaf { class: u8, counts: [Num; 2] },
    Split { feature: usize, threshold: Num, counts: [Num; 2], left: Box<NodeDoc>, right: Box<NodeDoc> },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeDoc {
    max_depth: usize,
    feature_names: Vec<String>,
    root: NodeDoc,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    format: String,
    format_version: u32,
    state_channel: String,
    input_channels: Vec<String>,
    embedding: EmbeddingDoc,
    a: MatrixDoc,
    b: MatrixDoc,
    observer: ObserverDoc,
    feature_schema: Vec<String>,
    tree: TreeDoc,
}

#[derive(Deserialize)]
struct Header {
    format: Option<String>,
    format_version: Option<u32>,
}

fn node_doc(node: &TreeNode) -> NodeDoc {
    match node {
        TreeNode::Leaf { class, counts } => NodeDoc::Leaf { class: *class, counts: counts.map(Num::new) },
        TreeNode::Split { feature, threshold, counts, left, right } => NodeDoc::Split {
            feature: *feature,
            threshold: Num::new(*threshold),
            counts: counts.map(Num::new),
            left: Box::new(node_doc(left)),
            right: Box::new(node_doc(right)),
        },
    }
}

/// Serializes `model`; identical models give identical text.
pub fn model_to_json(model: &DetectorModel) -> Result<String> {
    model.validate()?;
    let doc = ModelDoc {
        format: FORMAT_NAME.into(),
        format_version: model.format_version,
        state_channel: model.lti.state_channel.clone(),
        input_channels: model.lti.input_channels.clone(),
        embedding: EmbeddingDoc {
            stride: model.lti.delay.stride,
            delays: model.lti.delay.delays,
            ordering: ORDERING.into(),
        },
        a: MatrixDoc::new(&model.lti.a),
        b: MatrixDoc::new(&model.lti.b),
        observer: ObserverDoc { gain: Num::new(model.observer.gain), window: model.observer.window },
        feature_schema: model.feature_schema.clone(),
        tree: TreeDoc {
            max_depth: model.tree.max_depth,
            feature_names: model.tree.feature_names.clone(),
            root: node_doc(&model.tree.root),
        },
    };
    let mut text = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Parse { location: "model".into(), message: e.to_string() })?;
    text.push('\n');
    Ok(text)
}

struct Decoder<'a> {
    source: &'a str,
}

impl Decoder<'_> {
    fn err(&self, field: &str, message: impl Into<String>) -> Error {
        Error::Parse { location: format!("{}: {field}", self.source), message: message.into() }
    }

    fn real(&self, hex: &str, decimal: f64, field: &str) -> Result<f64> {
        let v = hexfloat::parse(hex).map_err(|m| self.err(field, m))?;
        if !v.is_finite() {
            return Err(self.err(field, format!("non-finite value {hex}")));
        }
        if v != decimal {
            return Err(self.err(field, format!("decimal {decimal} disagrees with hex {hex} ({v})")));
        }
        Ok(v)
    }

    fn num(&self, n: &Num, field: &str) -> Result<f64> {
        self.real(&n.hex, n.decimal, field)
    }

    fn matrix(&self, m: &MatrixDoc, field: &str) -> Result<DMatrix<f64>> {
        let count = m.rows * m.cols;
        if m.hex.len() != count || m.decimal.len() != count {
            return Err(self.err(
                field,
                format!("{}x{} matrix needs {count} entries, got {} hex and {} decimal", m.rows, m.cols, m.hex.len(), m.decimal.len()),
            ));
        }
        let values = m
            .hex
            .iter()
            .zip(&m.decimal)
            .enumerate()
            .map(|(i, (h, d))| self.real(h, *d, &format!("{field}[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_row_slice(m.rows, m.cols, &values))
    }

    fn node(&self, n: &NodeDoc, field: &str) -> Result<TreeNode> {
        let counts = |c: &[Num; 2]| -> Result<[f64; 2]> {
            Ok([self.num(&c[0], &format!("{field}.counts[0]"))?, self.num(&c[1], &format!("{field}.counts[1]"))?])
        };
        Ok(match n {
            NodeDoc::Leaf { class, counts: c } => TreeNode::Leaf { class: *class, counts: counts(c)? },
            NodeDoc::Split { feature, threshold, counts: c, left, right } => TreeNode::Split {
                feature: *feature,
                threshold: self.num(threshold, &format!("{field}.threshold"))?,
                counts: counts(c)?,
                left: Box::new(self.node(left, &format!("{field}.left"))?),
                right: Box::new(self.node(right, &format!("{field}.right"))?),
            },
        })
    }
}

fn json_error(source: &str, e: serde_json::Error) -> Error {
    Error::Parse { location: format!("{source}:{}:{}", e.line(), e.column()), message: e.to_string() }
}

/// Parses a model document; `source` names the input in error locations.
pub fn model_from_json(text: &str, source: &str) -> Result<DetectorModel> {
    let header: Header = serde_json::from_str(text).map_err(|e| json_error(source, e))?;
    if header.format.as_deref() != Some(FORMAT_NAME) {
        return Err(Error::Parse {
            location: format!("{source}: format"),
            message: format!("expected format `{FORMAT_NAME}`, found {:?}", header.format),
        });
    }
    let version = header.format_version.ok_or_else(|| Error::Parse {
        location: format!("{source}: format_version"),
        message: "missing format_version".into(),
    })?;
    if version != FORMAT_VERSION {
        return Err(Error::IncompatibleVersion { found: version, supported: FORMAT_VERSION });
    }
    let doc: ModelDoc = serde_json::from_str(text).map_err(|e| json_error(source, e))?;
    let d = Decoder { source };
    if doc.embedding.ordering != ORDERING {
        return Err(d.err("embedding.ordering", format!("unsupported ordering `{}`", doc.embedding.ordering)));
    }
    let delay = DelayConfig::new(doc.embedding.stride, doc.embedding.delays).map_err(|e| d.err("embedding", e.to_string()))?;
    let lti = LtiModel::new(d.matrix(&doc.a, "a")?, d.matrix(&doc.b, "b")?, delay, doc.state_channel, doc.input_channels)
        .map_err(|e| d.err("a/b", e.to_string()))?;
    let observer = ObserverConfig::new(d.num(&doc.observer.gain, "observer.gain")?, doc.observer.window)
        .map_err(|e| d.err("observer", e.to_string()))?;
    let root = d.node(&doc.tree.root, "tree.root")?;
    let tree = TrainedTree::from_parts(root, doc.tree.feature_names, doc.tree.max_depth)
        .map_err(|e| d.err("tree", e.to_string()))?;
    let model = DetectorModel { lti, observer, tree, feature_schema: doc.feature_schema, format_version: version };
    model.validate().map_err(|e| d.err("feature_schema", e.to_string()))?;
    Ok(model)
}

pub fn save_model(model: &DetectorModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_json(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DetectorModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text, &path.display().to_string())
}
