//! Layer-graph representation of one training iteration.
//!
//! A workload is a DAG whose nodes are layers and whose edges are tensor
//! dependencies. Edges are always stored in forward orientation (src runs
//! before dst); gradient transfers are the same edge tagged
//! [`EdgeDirection::Backward`], which keeps the edge list acyclic.
//!
//! Per-layer features concatenate four segments, in this order:
//! hyperparameters, device characteristics, structural dimensions, and
//! computational/memory counts (FLOPs, parameters, activation bytes).

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::cmp::Reverse;
use thiserror::Error;

use crate::comm::CommConfig;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("malformed document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("node id {0:?} appears more than once")]
    DuplicateNodeId(String),
    #[error("node id must be non-empty")]
    EmptyNodeId,
    #[error("duplicate edge {src} -> {dst} ({direction})")]
    DuplicateEdge { src: String, dst: String, direction: EdgeDirection },
    #[error("edge endpoint {0:?} is not a node in the graph")]
    UnknownEndpoint(String),
    #[error("edge {0} -> {0} is a self-loop")]
    SelfLoop(String),
    #[error("graph has a cycle through {0:?}")]
    Cycle(String),
    #[error("node {node}: missing required dimension {key:?}")]
    MissingDim { node: String, key: &'static str },
    #[error("node {node}: dimension {key:?} must be a positive integer")]
    ZeroDim { node: String, key: String },
    #[error("node {node}: {what} count overflows 64 bits")]
    CountOverflow { node: String, what: &'static str },
    #[error("layer kind tagged other requires a non-empty name")]
    EmptyOtherName,
    #[error("unknown layer kind {0:?}; custom kinds must be written as other:<name>")]
    UnknownKind(String),
    #[error("hyperparameter {0:?} is required")]
    MissingHp(&'static str),
    #[error("hyperparameter {key:?} = {value} must be a positive integer")]
    BadIntegerHp { key: &'static str, value: f64 },
    #[error("hyperparameter {key:?} = {value} is not finite")]
    BadHpValue { key: String, value: f64 },
    #[error("device feature {key:?} = {value} must be positive and finite")]
    BadDevValue { key: String, value: f64 },
    #[error("iterations_per_epoch must be >= 1")]
    ZeroIterations,
    #[error("bytes_per_elem must be >= 1")]
    ZeroBytesPerElem,
    #[error("hp n_workers = {hp} disagrees with comm n_workers = {comm}")]
    WorkerMismatch { hp: u64, comm: u32 },
    #[error("invalid communication section: {0}")]
    Comm(String),
}

/// Layer category. Custom categories use `Other` with a non-empty name and a
/// generic feature schema.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LayerKind {
    Linear,
    Attention,
    LayerNorm,
    Embedding,
    Conv2d,
    Activation,
    Pooling,
    Other(String),
}

/// All concrete kinds, in one-hot encoding order. `Other` occupies the final
/// slot regardless of its name.
pub const KIND_COUNT: usize = 8;

impl LayerKind {
    pub fn as_str(&self) -> String {
        match self {
            LayerKind::Linear => "linear".into(),
            LayerKind::Attention => "attention".into(),
            LayerKind::LayerNorm => "layernorm".into(),
            LayerKind::Embedding => "embedding".into(),
            LayerKind::Conv2d => "conv2d".into(),
            LayerKind::Activation => "activation".into(),
            LayerKind::Pooling => "pooling".into(),
            LayerKind::Other(name) => format!("other:{name}"),
        }
    }

    pub fn from_str_tag(tag: &str) -> Result<LayerKind, GraphError> {
        Ok(match tag {
            "linear" => LayerKind::Linear,
            "attention" => LayerKind::Attention,
            "layernorm" => LayerKind::LayerNorm,
            "embedding" => LayerKind::Embedding,
            "conv2d" => LayerKind::Conv2d,
            "activation" => LayerKind::Activation,
            "pooling" => LayerKind::Pooling,
            other => match other.strip_prefix("other:") {
                Some("") => return Err(GraphError::EmptyOtherName),
                Some(name) => LayerKind::Other(name.to_string()),
                None => return Err(GraphError::UnknownKind(other.to_string())),
            },
        })
    }

    /// Index into the one-hot kind encoding.
    pub fn one_hot_index(&self) -> usize {
        match self {
            LayerKind::Linear => 0,
            LayerKind::Attention => 1,
            LayerKind::LayerNorm => 2,
            LayerKind::Embedding => 3,
            LayerKind::Conv2d => 4,
            LayerKind::Activation => 5,
            LayerKind::Pooling => 6,
            LayerKind::Other(_) => 7,
        }
    }

    /// Elementwise layers are fusion candidates in execution backends.
    pub fn is_elementwise(&self) -> bool {
        matches!(self, LayerKind::Activation | LayerKind::Pooling)
    }

    /// Structural dimension keys, in feature order.
    pub fn struct_schema(&self) -> &'static [&'static str] {
        match self {
            LayerKind::Linear => &["d_in", "d_out"],
            LayerKind::Attention => &["seq", "d_model", "heads"],
            LayerKind::LayerNorm => &["seq", "d_model"],
            LayerKind::Embedding => &["vocab", "d_model", "seq"],
            LayerKind::Conv2d => &["h_out", "w_out", "c_in", "c_out", "kernel"],
            LayerKind::Activation | LayerKind::Pooling => &["elements"],
            LayerKind::Other(_) => &[],
        }
    }
}

impl std::fmt::Display for LayerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.as_str())
    }
}

impl Serialize for LayerKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.as_str())
    }
}

impl<'de> Deserialize<'de> for LayerKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let tag = String::deserialize(d)?;
        LayerKind::from_str_tag(&tag).map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeDirection {
    Forward,
    Backward,
}

impl std::fmt::Display for EdgeDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EdgeDirection::Forward => "forward",
            EdgeDirection::Backward => "backward",
        })
    }
}

/// Tensor dependency. `src`/`dst` are in execution (forward) order even for
/// gradient transfers, which are tagged `Backward` instead of reversed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeDep {
    pub src: String,
    pub dst: String,
    pub tensor_bytes: u64,
    pub direction: EdgeDirection,
}

/// One layer. `dims` holds the structural dimensions named by the kind's
/// schema; computational counts are derived on demand, not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerNode {
    pub id: String,
    pub kind: LayerKind,
    #[serde(default)]
    pub dims: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelGraph {
    pub name: String,
    pub nodes: Vec<LayerNode>,
    pub edges: Vec<EdgeDep>,
}

/// Computational and memory counts for one layer under one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CmFeatures {
    pub flops: u64,
    pub params: u64,
    pub activation_bytes: u64,
}

/// Per-run settings: hyperparameters, device characteristics, epoch length,
/// and the communication setup. `hp` must contain `batch_size`; when both
/// `hp["n_workers"]` and `comm.n_workers` are present they must agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub hp: BTreeMap<String, f64>,
    #[serde(default = "default_optimizer")]
    pub optimizer: String,
    pub dev: BTreeMap<String, f64>,
    pub iterations_per_epoch: u64,
    #[serde(default = "default_bytes_per_elem")]
    pub bytes_per_elem: u32,
    pub comm: CommConfig,
}

fn default_optimizer() -> String {
    "sgd".to_string()
}

fn default_bytes_per_elem() -> u32 {
    4
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), GraphError> {
        for (key, &value) in &self.hp {
            if !value.is_finite() {
                return Err(GraphError::BadHpValue { key: key.clone(), value });
            }
        }
        self.batch_size()?;
        for (key, &value) in &self.dev {
            if !(value > 0.0) || !value.is_finite() {
                return Err(GraphError::BadDevValue { key: key.clone(), value });
            }
        }
        if self.iterations_per_epoch < 1 {
            return Err(GraphError::ZeroIterations);
        }
        if self.bytes_per_elem < 1 {
            return Err(GraphError::ZeroBytesPerElem);
        }
        self.comm.validate().map_err(|e| GraphError::Comm(e.to_string()))?;
        if let Some(&n) = self.hp.get("n_workers") {
            let n = int_hp("n_workers", n)?;
            if n != u64::from(self.comm.n_workers) {
                return Err(GraphError::WorkerMismatch { hp: n, comm: self.comm.n_workers });
            }
        }
        Ok(())
    }

    pub fn batch_size(&self) -> Result<u64, GraphError> {
        let value = *self.hp.get("batch_size").ok_or(GraphError::MissingHp("batch_size"))?;
        int_hp("batch_size", value)
    }
}

fn int_hp(key: &'static str, value: f64) -> Result<u64, GraphError> {
    if !value.is_finite() || value < 1.0 || value.fract() != 0.0 || value > 2f64.powi(53) {
        return Err(GraphError::BadIntegerHp { key, value });
    }
    Ok(value as u64)
}

pub fn parse_model_graph(document: &str) -> Result<ModelGraph, GraphError> {
    let g: ModelGraph = serde_json::from_str(document)?;
    validate_graph(&g)?;
    Ok(g)
}

pub fn serialize_model_graph(g: &ModelGraph) -> String {
    let mut out = serde_json::to_string_pretty(g).expect("graph serialization cannot fail");
    out.push('\n');
    out
}

pub fn parse_run_config(document: &str) -> Result<RunConfig, GraphError> {
    let cfg: RunConfig = serde_json::from_str(document)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn validate_graph(g: &ModelGraph) -> Result<(), GraphError> {
    let mut ids = BTreeSet::new();
    for node in &g.nodes {
        if node.id.is_empty() {
            return Err(GraphError::EmptyNodeId);
        }
        if !ids.insert(node.id.as_str()) {
            return Err(GraphError::DuplicateNodeId(node.id.clone()));
        }
        if let LayerKind::Other(name) = &node.kind {
            if name.is_empty() {
                return Err(GraphError::EmptyOtherName);
            }
        }
        for (key, &value) in &node.dims {
            if value == 0 {
                return Err(GraphError::ZeroDim { node: node.id.clone(), key: key.clone() });
            }
        }
        for key in node.kind.struct_schema() {
            if !node.dims.contains_key(*key) {
                return Err(GraphError::MissingDim { node: node.id.clone(), key });
            }
        }
    }
    let mut seen = BTreeSet::new();
    for edge in &g.edges {
        if edge.src == edge.dst {
            return Err(GraphError::SelfLoop(edge.src.clone()));
        }
        for end in [&edge.src, &edge.dst] {
            if !ids.contains(end.as_str()) {
                return Err(GraphError::UnknownEndpoint(end.clone()));
            }
        }
        if !seen.insert((edge.src.as_str(), edge.dst.as_str(), edge.direction)) {
            return Err(GraphError::DuplicateEdge {
                src: edge.src.clone(),
                dst: edge.dst.clone(),
                direction: edge.direction,
            });
        }
    }
    topological_order(g).map(|_| ())
}

/// Kahn's algorithm over src -> dst for every edge, ties broken by taking the
/// lexicographically smallest ready node id.
pub fn topological_order(g: &ModelGraph) -> Result<Vec<String>, GraphError> {
    let mut indegree: BTreeMap<&str, usize> = g.nodes.iter().map(|n| (n.id.as_str(), 0)).collect();
    let mut out_edges: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for edge in &g.edges {
        *indegree.get_mut(edge.dst.as_str()).ok_or_else(|| GraphError::UnknownEndpoint(edge.dst.clone()))? += 1;
        out_edges.entry(edge.src.as_str()).or_default().push(edge.dst.as_str());
    }
    let mut ready: BinaryHeap<Reverse<&str>> =
        indegree.iter().filter(|(_, &d)| d == 0).map(|(&id, _)| Reverse(id)).collect();
    let mut order = Vec::with_capacity(g.nodes.len());
    while let Some(Reverse(id)) = ready.pop() {
        order.push(id.to_string());
        if let Some(dsts) = out_edges.get(id) {
            for &dst in dsts {
                let d = indegree.get_mut(dst).expect("endpoint checked above");
                *d -= 1;
                if *d == 0 {
                    ready.push(Reverse(dst));
                }
            }
        }
    }
    if order.len() != g.nodes.len() {
        let stuck = indegree
            .iter()
            .filter(|(_, &d)| d > 0)
            .map(|(&id, _)| id)
            .next()
            .unwrap_or("<none>");
        return Err(GraphError::Cycle(stuck.to_string()));
    }
    Ok(order)
}

fn dim(node: &LayerNode, key: &'static str) -> Result<u64, GraphError> {
    node.dims.get(key).copied().ok_or(GraphError::MissingDim { node: node.id.clone(), key })
}

struct Counter<'a> {
    node: &'a LayerNode,
}

impl Counter<'_> {
    fn mul(&self, what: &'static str, terms: &[u64]) -> Result<u64, GraphError> {
        let mut acc: u64 = 1;
        for &t in terms {
            acc = acc
                .checked_mul(t)
                .ok_or_else(|| GraphError::CountOverflow { node: self.node.id.clone(), what })?;
        }
        Ok(acc)
    }

    fn add(&self, what: &'static str, a: u64, b: u64) -> Result<u64, GraphError> {
        a.checked_add(b)
            .ok_or_else(|| GraphError::CountOverflow { node: self.node.id.clone(), what })
    }
}

/// FLOPs for one training iteration at batch size `b`.
///
/// Standard textbook counts, one multiply-accumulate = 2 FLOPs. The per-kind
/// regressors absorb constant-factor error, so these are deliberately simple:
///
/// * Linear: `2*b*d_in*d_out + b*d_out`
/// * Attention (s tokens, model dim d): `8*b*s*d^2 + 4*b*s^2*d`
/// * LayerNorm: `5*b*s*d`
/// * Embedding: `0` (table lookup)
/// * Conv2d: `2*b*H_out*W_out*C_out*C_in*k^2`
/// * Activation/Pooling: `b*elements`
/// * Other: the `flops` dim if declared, else 0
pub fn kind_flops(node: &LayerNode, b: u64) -> Result<u64, GraphError> {
    let c = Counter { node };
    match &node.kind {
        LayerKind::Linear => {
            let (din, dout) = (dim(node, "d_in")?, dim(node, "d_out")?);
            c.add("flops", c.mul("flops", &[2, b, din, dout])?, c.mul("flops", &[b, dout])?)
        }
        LayerKind::Attention => {
            let (s, d) = (dim(node, "seq")?, dim(node, "d_model")?);
            c.add(
                "flops",
                c.mul("flops", &[8, b, s, d, d])?,
                c.mul("flops", &[4, b, s, s, d])?,
            )
        }
        LayerKind::LayerNorm => {
            let (s, d) = (dim(node, "seq")?, dim(node, "d_model")?);
            c.mul("flops", &[5, b, s, d])
        }
        LayerKind::Embedding => Ok(0),
        LayerKind::Conv2d => {
            let dims: Vec<u64> = ["h_out", "w_out", "c_in", "c_out", "kernel"]
                .iter()
                .map(|k| dim(node, k))
                .collect::<Result<_, _>>()?;
            c.mul("flops", &[2, b, dims[0], dims[1], dims[2], dims[3], dims[4], dims[4]])
        }
        LayerKind::Activation | LayerKind::Pooling => c.mul("flops", &[b, dim(node, "elements")?]),
        LayerKind::Other(_) => Ok(node.dims.get("flops").copied().unwrap_or(0)),
    }
}

/// Trainable parameter count (batch-independent).
pub fn kind_params(node: &LayerNode) -> Result<u64, GraphError> {
    let c = Counter { node };
    match &node.kind {
        LayerKind::Linear => {
            let (din, dout) = (dim(node, "d_in")?, dim(node, "d_out")?);
            c.add("params", c.mul("params", &[din, dout])?, dout)
        }
        LayerKind::Attention => {
            let d = dim(node, "d_model")?;
            c.add("params", c.mul("params", &[4, d, d])?, c.mul("params", &[4, d])?)
        }
        LayerKind::LayerNorm => c.mul("params", &[2, dim(node, "d_model")?]),
        LayerKind::Embedding => c.mul("params", &[dim(node, "vocab")?, dim(node, "d_model")?]),
        LayerKind::Conv2d => {
            let (ci, co, k) = (dim(node, "c_in")?, dim(node, "c_out")?, dim(node, "kernel")?);
            c.add("params", c.mul("params", &[ci, co, k, k])?, co)
        }
        LayerKind::Activation | LayerKind::Pooling => Ok(0),
        LayerKind::Other(_) => Ok(node.dims.get("params").copied().unwrap_or(0)),
    }
}

/// Output tensor element count for one sample (batch dimension excluded).
pub fn kind_out_elements(node: &LayerNode) -> Result<u64, GraphError> {
    let c = Counter { node };
    match &node.kind {
        LayerKind::Linear => dim(node, "d_out"),
        LayerKind::Attention | LayerKind::LayerNorm => {
            c.mul("output elements", &[dim(node, "seq")?, dim(node, "d_model")?])
        }
        LayerKind::Embedding => c.mul("output elements", &[dim(node, "seq")?, dim(node, "d_model")?]),
        LayerKind::Conv2d => {
            c.mul("output elements", &[dim(node, "h_out")?, dim(node, "w_out")?, dim(node, "c_out")?])
        }
        LayerKind::Activation | LayerKind::Pooling => dim(node, "elements"),
        LayerKind::Other(_) => Ok(node.dims.get("elements").copied().unwrap_or(0)),
    }
}

/// FLOPs, params, and activation bytes for `node` under `cfg`.
pub fn compute_layer_cm(node: &LayerNode, cfg: &RunConfig) -> Result<CmFeatures, GraphError> {
    let b = cfg.batch_size()?;
    let c = Counter { node };
    let activation_bytes =
        c.mul("activation bytes", &[b, kind_out_elements(node)?, u64::from(cfg.bytes_per_elem)])?;
    Ok(CmFeatures { flops: kind_flops(node, b)?, params: kind_params(node)?, activation_bytes })
}

/// Ordered numeric features for one layer: hp, dev, struct, cm segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub kind: LayerKind,
    pub values: Vec<f64>,
}

/// Column names matching [`assemble_feature_vector`] output, determined by
/// the kind's schema and the config's hp/dev key sets (sorted).
pub fn feature_names(kind: &LayerKind, cfg: &RunConfig) -> Vec<String> {
    let mut names: Vec<String> = cfg.hp.keys().map(|k| format!("hp_{k}")).collect();
    names.extend(cfg.dev.keys().map(|k| format!("dev_{k}")));
    names.extend(kind.struct_schema().iter().map(|k| format!("struct_{k}")));
    names.extend(["cm_flops", "cm_params", "cm_activation_bytes"].map(String::from));
    names
}

/// Concatenates hp (sorted keys), dev (sorted keys), structural dims in
/// schema order, and cm counts into one vector.
pub fn assemble_feature_vector(node: &LayerNode, cfg: &RunConfig) -> Result<FeatureVector, GraphError> {
    let cm = compute_layer_cm(node, cfg)?;
    let mut values: Vec<f64> = cfg.hp.values().copied().collect();
    values.extend(cfg.dev.values().copied());
    for key in node.kind.struct_schema() {
        values.push(dim(node, key)? as f64);
    }
    values.extend([cm.flops as f64, cm.params as f64, cm.activation_bytes as f64]);
    Ok(FeatureVector { kind: node.kind.clone(), values })
}
