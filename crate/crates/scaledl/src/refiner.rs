//! Graph attention network producing the scaling factors alpha and beta.
//!
//! One TransformerConv layer attends over each node's in-neighborhood (plus
//! a self-edge), mixing scaled dot-product scores with a learned edge-feature
//! term. Mean-pooled node embeddings are concatenated with an encoded global
//! feature vector and mapped through an MLP to two scalars, pushed through a
//! shifted softplus so an all-zero head yields exactly alpha = beta = 1 (the
//! plain additive model). Training minimizes the mean squared relative error
//! of `alpha*T_sum + beta*T_comm` against measured iteration times.
//!
//! Gradients are exact reverse-mode derivations written out by hand (no
//! autodiff); [`grad_check`] verifies every parameter against central finite
//! differences. All graph reductions (softmax denominators, neighborhood
//! aggregation, pooling) sum in a canonical value-sorted order, which makes
//! [`predict_scaling`] bit-identical under any relabeling of the nodes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::model_graph::{
    compute_layer_cm, EdgeDirection, GraphError, ModelGraph, RunConfig, KIND_COUNT,
};

pub const GNN_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RefinerError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("node {0} has no feature row of the expected width")]
    BadNodeFeatures(usize),
    #[error("edge {0} references node {1}, but the graph has {2} nodes")]
    BadEdgeEndpoint(usize, usize, usize),
    #[error("edge {index} carries {got} features, expected {expected}")]
    BadEdgeFeatures { index: usize, got: usize, expected: usize },
    #[error("global feature vector has {got} entries, expected {expected}")]
    BadGlobals { got: usize, expected: usize },
    #[error("non-finite value in sample {0}")]
    NonFiniteSample(usize),
    #[error("head index {0} out of range ({1} heads)")]
    BadHead(usize, usize),
    #[error("node {0} has an empty neighborhood; self-edges were not supplied")]
    EmptyNeighborhood(usize),
    #[error("loss became non-finite on sample {sample} (epoch {epoch})")]
    NonFiniteLoss { sample: usize, epoch: usize },
    #[error("sample {index}: t_iter must be positive and finite, t_sum/t_comm non-negative")]
    BadSampleTimes { index: usize },
    #[error("epsilon {0} outside [1e-7, 1e-3]")]
    BadEpsilon(f64),
    #[error("{0} must be >= 1")]
    ZeroSetting(&'static str),
    #[error("missing per-layer time for node {0:?}")]
    MissingNodeTime(String),
    #[error("model artifact version {0} is not supported (expected {GNN_VERSION})")]
    WrongVersion(u32),
    #[error("malformed model artifact: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Dense row-major matrix. Kept deliberately minimal: the refiner controls
/// its own summation order for reproducibility, so only matrix-vector
/// products and outer-product accumulation are needed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Mat {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn identity(n: usize) -> Mat {
        Mat::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// `W x`, length `rows`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut out = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            out[r] = row.iter().zip(x).map(|(w, v)| w * v).sum();
        }
        out
    }

    /// `W^T y`, length `cols`.
    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * y[r];
            }
        }
        out
    }

    /// `self += y x^T` (gradient accumulation for `y = W x`).
    pub fn add_outer(&mut self, y: &[f64], x: &[f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for r in 0..self.rows {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (w, v) in row.iter_mut().zip(x) {
                *w += y[r] * v;
            }
        }
    }
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `ln(1 + (e-1) e^x)`: softplus shifted so that `f(0) = 1` exactly, with a
/// linear asymptote for large inputs. Strictly positive everywhere.
pub fn shifted_softplus(x: f64) -> f64 {
    if x == 0.0 {
        return 1.0;
    }
    let c = std::f64::consts::E - 1.0;
    let out = if x > 30.0 { x + c.ln() + ((-x).exp() / c).ln_1p() } else { (c * x.exp()).ln_1p() };
    out.max(1e-300)
}

pub fn shifted_softplus_grad(x: f64) -> f64 {
    if x > 30.0 {
        return 1.0;
    }
    let u = (std::f64::consts::E - 1.0) * x.exp();
    u / (1.0 + u)
}

/// Multi-layer perceptron: ReLU after every layer except the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub weights: Vec<Mat>,
    pub biases: Vec<Vec<f64>>,
}

struct MlpTrace {
    /// activations[0] is the input; activations[l+1] the output of layer l
    /// (post-ReLU except for the last layer).
    activations: Vec<Vec<f64>>,
    /// pre[l] is the affine output of layer l before any ReLU.
    pre: Vec<Vec<f64>>,
}

impl Mlp {
    fn init(dims: &[usize], rng: &mut ChaCha8Rng) -> Mlp {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = (6.0 / (fan_in + fan_out) as f64).sqrt();
            weights.push(Mat::from_fn(fan_out, fan_in, |_, _| rng.gen_range(-scale..scale)));
            biases.push(vec![0.0; fan_out]);
        }
        Mlp { weights, biases }
    }

    fn zeros_like(&self) -> Mlp {
        Mlp {
            weights: self.weights.iter().map(|w| Mat::zeros(w.rows, w.cols)).collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    fn forward_trace(&self, input: &[f64]) -> MlpTrace {
        let mut activations = vec![input.to_vec()];
        let mut pre = Vec::new();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w.matvec(activations.last().expect("nonempty"));
            for (zi, bi) in z.iter_mut().zip(b) {
                *zi += bi;
            }
            pre.push(z.clone());
            if l + 1 < self.weights.len() {
                for zi in z.iter_mut() {
                    *zi = relu(*zi);
                }
            }
            activations.push(z);
        }
        MlpTrace { activations, pre }
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the input. `dout` is the gradient at the (linear)
    /// final output.
    fn backward(&self, trace: &MlpTrace, dout: &[f64], grads: &mut Mlp) -> Vec<f64> {
        let mut dz = dout.to_vec();
        for l in (0..self.weights.len()).rev() {
            grads.weights[l].add_outer(&dz, &trace.activations[l]);
            for (g, d) in grads.biases[l].iter_mut().zip(&dz) {
                *g += d;
            }
            let dx = self.weights[l].matvec_t(&dz);
            if l == 0 {
                return dx;
            }
            dz = dx
                .iter()
                .zip(&trace.pre[l - 1])
                .map(|(d, z)| d * relu_grad(*z))
                .collect();
        }
        dout.to_vec()
    }
}

/// Query/key/value projections for one attention head (`d_k x d_model`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub w_q: Mat,
    pub w_k: Mat,
    pub w_v: Mat,
}

/// Every trainable tensor of the refiner, grouped so gradients can reuse the
/// exact same structure and flattening order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnParams {
    pub heads: Vec<HeadParams>,
    /// Edge projection, shared across heads; scores add relu(w_edge.e + b_edge).
    pub w_edge: Vec<f64>,
    pub b_edge: f64,
    pub encoder: Mlp,
    pub head_mlp: Mlp,
}

impl GnnParams {
    pub fn zeros_like(&self) -> GnnParams {
        GnnParams {
            heads: self
                .heads
                .iter()
                .map(|h| HeadParams {
                    w_q: Mat::zeros(h.w_q.rows, h.w_q.cols),
                    w_k: Mat::zeros(h.w_k.rows, h.w_k.cols),
                    w_v: Mat::zeros(h.w_v.rows, h.w_v.cols),
                })
                .collect(),
            w_edge: vec![0.0; self.w_edge.len()],
            b_edge: 0.0,
            encoder: self.encoder.zeros_like(),
            head_mlp: self.head_mlp.zeros_like(),
        }
    }

    /// Canonical parameter order: per head q/k/v row-major, then the edge
    /// projection and bias, then encoder layers, then the output MLP.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for h in &self.heads {
            out.extend_from_slice(&h.w_q.data);
            out.extend_from_slice(&h.w_k.data);
            out.extend_from_slice(&h.w_v.data);
        }
        out.extend_from_slice(&self.w_edge);
        out.push(self.b_edge);
        for mlp in [&self.encoder, &self.head_mlp] {
            for (w, b) in mlp.weights.iter().zip(&mlp.biases) {
                out.extend_from_slice(&w.data);
                out.extend_from_slice(b);
            }
        }
        out
    }

    /// Inverse of [`GnnParams::flat`]; panics on length mismatch.
    pub fn assign(&mut self, flat: &[f64]) {
        let mut at = 0usize;
        let mut take = |n: usize| {
            let slice = &flat[at..at + n];
            at += n;
            slice.to_vec()
        };
        for h in &mut self.heads {
            h.w_q.data = take(h.w_q.data.len());
            h.w_k.data = take(h.w_k.data.len());
            h.w_v.data = take(h.w_v.data.len());
        }
        self.w_edge = take(self.w_edge.len());
        self.b_edge = take(1)[0];
        for mlp in [&mut self.encoder, &mut self.head_mlp] {
            for i in 0..mlp.weights.len() {
                mlp.weights[i].data = take(mlp.weights[i].data.len());
                mlp.biases[i] = take(mlp.biases[i].len());
            }
        }
        assert_eq!(at, flat.len(), "flat parameter length mismatch");
    }
}

/// Architecture knobs. `d_model`, `d_edge`, and `d_z` come from the feature
/// layout; the rest default to a configuration small enough for exhaustive
/// finite-difference checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GnnConfig {
    pub d_model: usize,
    pub d_edge: usize,
    pub d_z: usize,
    pub d_k: usize,
    pub n_heads: usize,
    pub enc_hidden: usize,
    pub enc_out: usize,
    pub head_hidden: usize,
    pub use_global_encoder: bool,
}

impl GnnConfig {
    pub fn new(d_model: usize, d_edge: usize, d_z: usize) -> GnnConfig {
        GnnConfig {
            d_model,
            d_edge,
            d_z,
            d_k: 16,
            n_heads: 4,
            enc_hidden: 32,
            enc_out: 32,
            head_hidden: 64,
            use_global_encoder: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnModel {
    pub version: u32,
    pub d_model: usize,
    pub d_edge: usize,
    pub d_z: usize,
    pub d_k: usize,
    pub use_global_encoder: bool,
    pub params: GnnParams,
    /// Fingerprint of the training settings and seed that produced this
    /// model; 0 for hand-built models.
    pub config_fingerprint: u64,
    /// Diagnostic only: excludes one head from the forward pass so its
    /// parameters are provably outside the loss path. Never serialized.
    #[serde(skip)]
    pub head_mask: Option<usize>,
}

impl GnnModel {
    /// Seeded initialization. The final output layer starts at zero, so the
    /// untrained refiner emits alpha = beta = 1 and reproduces the plain
    /// additive model.
    pub fn init(cfg: &GnnConfig, seed: u64) -> GnnModel {
        let mut rng = crate::rng::stream(seed, "gnn-init");
        let scale = (6.0 / (cfg.d_model + cfg.d_k) as f64).sqrt();
        let heads = (0..cfg.n_heads)
            .map(|_| HeadParams {
                w_q: Mat::from_fn(cfg.d_k, cfg.d_model, |_, _| rng.gen_range(-scale..scale)),
                w_k: Mat::from_fn(cfg.d_k, cfg.d_model, |_, _| rng.gen_range(-scale..scale)),
                w_v: Mat::from_fn(cfg.d_k, cfg.d_model, |_, _| rng.gen_range(-scale..scale)),
            })
            .collect();
        let edge_scale = (6.0 / (cfg.d_edge + 1) as f64).sqrt();
        let w_edge = (0..cfg.d_edge).map(|_| rng.gen_range(-edge_scale..edge_scale)).collect();
        let encoder = if cfg.use_global_encoder {
            Mlp::init(&[cfg.d_z, cfg.enc_hidden, cfg.enc_out], &mut rng)
        } else {
            Mlp { weights: Vec::new(), biases: Vec::new() }
        };
        let enc_out = if cfg.use_global_encoder { cfg.enc_out } else { 0 };
        let mut head_mlp =
            Mlp::init(&[cfg.d_k + enc_out, cfg.head_hidden, cfg.head_hidden, 2], &mut rng);
        let last = head_mlp.weights.len() - 1;
        head_mlp.weights[last] = Mat::zeros(2, cfg.head_hidden);
        head_mlp.biases[last] = vec![0.0; 2];
        GnnModel {
            version: GNN_VERSION,
            d_model: cfg.d_model,
            d_edge: cfg.d_edge,
            d_z: cfg.d_z,
            d_k: cfg.d_k,
            use_global_encoder: cfg.use_global_encoder,
            params: GnnParams { heads, w_edge, b_edge: 0.0, encoder, head_mlp },
            config_fingerprint: 0,
            head_mask: None,
        }
    }

    fn active_heads(&self) -> Vec<usize> {
        (0..self.params.heads.len()).filter(|&h| self.head_mask != Some(h)).collect()
    }
}

/// Positive per-graph multipliers for computation and communication time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFactors {
    pub alpha: f64,
    pub beta: f64,
}

/// One directed dependency in feature space; `dst` attends over `src`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeInput {
    pub src: usize,
    pub dst: usize,
    pub features: Vec<f64>,
}

/// Numeric inputs to the refiner for one workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFeatures {
    pub node_features: Vec<Vec<f64>>,
    pub edges: Vec<EdgeInput>,
    pub globals: Vec<f64>,
}

fn validate_features(model: &GnnModel, f: &GraphFeatures) -> Result<(), RefinerError> {
    let n = f.node_features.len();
    if n == 0 {
        return Err(RefinerError::EmptyDataset);
    }
    for (i, row) in f.node_features.iter().enumerate() {
        if row.len() != model.d_model || row.iter().any(|v| !v.is_finite()) {
            return Err(RefinerError::BadNodeFeatures(i));
        }
    }
    for (i, e) in f.edges.iter().enumerate() {
        if e.src >= n || e.dst >= n {
            return Err(RefinerError::BadEdgeEndpoint(i, e.src.max(e.dst), n));
        }
        if e.features.len() != model.d_edge {
            return Err(RefinerError::BadEdgeFeatures {
                index: i,
                got: e.features.len(),
                expected: model.d_edge,
            });
        }
        if e.features.iter().any(|v| !v.is_finite()) {
            return Err(RefinerError::BadNodeFeatures(i));
        }
    }
    let expected_z = if model.use_global_encoder { model.d_z } else { f.globals.len() };
    if f.globals.len() != expected_z || f.globals.iter().any(|v| !v.is_finite()) {
        return Err(RefinerError::BadGlobals { got: f.globals.len(), expected: model.d_z });
    }
    Ok(())
}

/// One attention entry: `dst` attends over `src`. `edge` indexes the real
/// edge list; `None` marks the synthetic self-edge with zero edge features.
#[derive(Debug, Clone, Copy)]
struct Entry {
    src: usize,
    dst: usize,
    edge: Option<usize>,
}

fn build_entries(f: &GraphFeatures) -> (Vec<Entry>, Vec<Vec<usize>>) {
    let n = f.node_features.len();
    let mut entries: Vec<Entry> = f
        .edges
        .iter()
        .enumerate()
        .map(|(idx, e)| Entry { src: e.src, dst: e.dst, edge: Some(idx) })
        .collect();
    entries.extend((0..n).map(|i| Entry { src: i, dst: i, edge: None }));
    let mut incoming = vec![Vec::new(); n];
    for (idx, entry) in entries.iter().enumerate() {
        incoming[entry.dst].push(idx);
    }
    (entries, incoming)
}

/// Sums values in ascending `total_cmp` order: the result is independent of
/// the caller's ordering, which keeps graph relabelings bit-exact.
fn canonical_sum(values: &mut Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    values.iter().sum()
}

struct HeadTrace {
    q: Vec<Vec<f64>>,
    k: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
    omega: Vec<f64>,
    /// Pre-activation aggregate per node.
    a: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
}

struct Trace {
    entries: Vec<Entry>,
    incoming: Vec<Vec<usize>>,
    edge_pre: Vec<f64>,
    active: Vec<usize>,
    heads: Vec<Option<HeadTrace>>,
    vprime: Vec<Vec<f64>>,
    enc: Option<MlpTrace>,
    head_trace: MlpTrace,
    y: [f64; 2],
    alpha: f64,
    beta: f64,
}

fn forward(model: &GnnModel, f: &GraphFeatures) -> Result<Trace, RefinerError> {
    validate_features(model, f)?;
    let n = f.node_features.len();
    let (entries, incoming) = build_entries(f);
    let zero_edge = vec![0.0; model.d_edge];

    // Shared edge term: relu(w_edge . e + b_edge); self-edges use e = 0.
    let mut edge_pre = Vec::with_capacity(entries.len());
    for entry in &entries {
        let e = entry.edge.map_or(zero_edge.as_slice(), |idx| f.edges[idx].features.as_slice());
        let pre = model.params.w_edge.iter().zip(e).map(|(w, v)| w * v).sum::<f64>()
            + model.params.b_edge;
        edge_pre.push(pre);
    }
    let edge_term: Vec<f64> = edge_pre.iter().map(|&p| relu(p)).collect();

    let active = model.active_heads();
    if active.is_empty() {
        return Err(RefinerError::BadHead(0, 0));
    }
    let sqrt_dk = (model.d_k as f64).sqrt();
    let mut heads: Vec<Option<HeadTrace>> = Vec::with_capacity(model.params.heads.len());
    for (h_idx, head) in model.params.heads.iter().enumerate() {
        if !active.contains(&h_idx) {
            heads.push(None);
            continue;
        }
        let q: Vec<Vec<f64>> = f.node_features.iter().map(|v| head.w_q.matvec(v)).collect();
        let k: Vec<Vec<f64>> = f.node_features.iter().map(|v| head.w_k.matvec(v)).collect();
        let u: Vec<Vec<f64>> = f.node_features.iter().map(|v| head.w_v.matvec(v)).collect();
        let scores: Vec<f64> = entries
            .iter()
            .zip(&edge_term)
            .map(|(entry, &t)| {
                let dot: f64 =
                    q[entry.dst].iter().zip(&k[entry.src]).map(|(a, b)| a * b).sum();
                dot / sqrt_dk + t
            })
            .collect();
        // Stable softmax per destination node over its incoming entries.
        let mut omega = vec![0.0; entries.len()];
        for (i, inc) in incoming.iter().enumerate() {
            if inc.is_empty() {
                return Err(RefinerError::EmptyNeighborhood(i));
            }
            let max = inc.iter().map(|&e| scores[e]).fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = inc.iter().map(|&e| (scores[e] - max).exp()).collect();
            let denom = canonical_sum(&mut exps.clone());
            for (&e, &x) in inc.iter().zip(&exps) {
                omega[e] = x / denom;
            }
        }
        // Aggregate neighbor values in a canonical order: sort entries by
        // (weight, value vector) so relabelings sum identically.
        let mut a = vec![vec![0.0; model.d_k]; n];
        for (i, inc) in incoming.iter().enumerate() {
            let mut order: Vec<usize> = inc.clone();
            order.sort_by(|&x, &y| {
                omega[x]
                    .total_cmp(&omega[y])
                    .then_with(|| {
                        let (ux, uy) = (&u[entries[x].src], &u[entries[y].src]);
                        for (vx, vy) in ux.iter().zip(uy) {
                            let ord = vx.total_cmp(vy);
                            if ord != std::cmp::Ordering::Equal {
                                return ord;
                            }
                        }
                        std::cmp::Ordering::Equal
                    })
            });
            for &e in &order {
                let w = omega[e];
                for (acc, v) in a[i].iter_mut().zip(&u[entries[e].src]) {
                    *acc += w * v;
                }
            }
        }
        let h: Vec<Vec<f64>> =
            a.iter().map(|row| row.iter().map(|&v| relu(v)).collect()).collect();
        heads.push(Some(HeadTrace { q, k, u, omega, a, h }));
    }

    // Mean over active heads, then mean pooling over nodes (value-sorted).
    let l_active = active.len() as f64;
    let mut vprime = vec![vec![0.0; model.d_k]; n];
    for &h_idx in &active {
        let head = heads[h_idx].as_ref().expect("active head has a trace");
        for (vp, h_row) in vprime.iter_mut().zip(&head.h) {
            for (acc, v) in vp.iter_mut().zip(h_row) {
                *acc += v / l_active;
            }
        }
    }
    let mut rows: Vec<&Vec<f64>> = vprime.iter().collect();
    rows.sort_by(|a, b| {
        for (x, y) in a.iter().zip(b.iter()) {
            let ord = x.total_cmp(y);
            if ord != std::cmp::Ordering::Equal {
                return ord;
            }
        }
        std::cmp::Ordering::Equal
    });
    let mut pooled = vec![0.0; model.d_k];
    for row in rows {
        for (acc, v) in pooled.iter_mut().zip(row) {
            *acc += v;
        }
    }
    for p in pooled.iter_mut() {
        *p /= n as f64;
    }

    let enc = if model.use_global_encoder {
        Some(model.params.encoder.forward_trace(&f.globals))
    } else {
        None
    };
    let mut head_in = pooled.clone();
    if let Some(trace) = &enc {
        head_in.extend_from_slice(trace.activations.last().expect("encoder output"));
    }
    let head_trace = model.params.head_mlp.forward_trace(&head_in);
    let out = head_trace.activations.last().expect("head output");
    let y = [out[0], out[1]];
    Ok(Trace {
        entries,
        incoming,
        edge_pre,
        active,
        heads,
        vprime,
        enc,
        head_trace,
        y,
        alpha: shifted_softplus(y[0]),
        beta: shifted_softplus(y[1]),
    })
}

/// Raw attention scores for one head over every entry (real edges first,
/// then one self-edge per node). Returned as (dst, src, score).
pub fn attention_scores(
    model: &GnnModel,
    f: &GraphFeatures,
    head: usize,
) -> Result<Vec<(usize, usize, f64)>, RefinerError> {
    if head >= model.params.heads.len() {
        return Err(RefinerError::BadHead(head, model.params.heads.len()));
    }
    validate_features(model, f)?;
    let params = &model.params.heads[head];
    let (entries, _) = build_entries(f);
    let zero_edge = vec![0.0; model.d_edge];
    let sqrt_dk = (model.d_k as f64).sqrt();
    let q: Vec<Vec<f64>> = f.node_features.iter().map(|v| params.w_q.matvec(v)).collect();
    let k: Vec<Vec<f64>> = f.node_features.iter().map(|v| params.w_k.matvec(v)).collect();
    Ok(entries
        .iter()
        .map(|entry| {
            let e = entry.edge.map_or(zero_edge.as_slice(), |i| f.edges[i].features.as_slice());
            let t = relu(
                model.params.w_edge.iter().zip(e).map(|(w, v)| w * v).sum::<f64>()
                    + model.params.b_edge,
            );
            let dot: f64 = q[entry.dst].iter().zip(&k[entry.src]).map(|(a, b)| a * b).sum();
            (entry.dst, entry.src, dot / sqrt_dk + t)
        })
        .collect())
}

/// Normalizes scores to attention weights per destination node with a
/// max-subtracted softmax. Output aligns with the input order; every one of
/// the `n_nodes` destinations must appear at least once.
pub fn normalize_attention(
    scores: &[(usize, usize, f64)],
    n_nodes: usize,
) -> Result<Vec<f64>, RefinerError> {
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n_nodes];
    for (idx, &(dst, src, _)) in scores.iter().enumerate() {
        if dst >= n_nodes || src >= n_nodes {
            return Err(RefinerError::BadEdgeEndpoint(idx, dst.max(src), n_nodes));
        }
        groups[dst].push(idx);
    }
    let mut omega = vec![0.0; scores.len()];
    for (i, group) in groups.iter().enumerate() {
        if group.is_empty() {
            return Err(RefinerError::EmptyNeighborhood(i));
        }
        let max = group.iter().map(|&e| scores[e].2).fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = group.iter().map(|&e| (scores[e].2 - max).exp()).collect();
        let denom = canonical_sum(&mut exps.clone());
        for (&e, &x) in group.iter().zip(&exps) {
            omega[e] = x / denom;
        }
    }
    Ok(omega)
}

/// Updated node embeddings: per head, attention-weighted value aggregation
/// through ReLU, then the mean across heads.
pub fn transformer_conv(model: &GnnModel, f: &GraphFeatures) -> Result<Vec<Vec<f64>>, RefinerError> {
    Ok(forward(model, f)?.vprime)
}

/// Scaling factors for one workload graph.
pub fn predict_scaling(model: &GnnModel, f: &GraphFeatures) -> Result<ScalingFactors, RefinerError> {
    let trace = forward(model, f)?;
    Ok(ScalingFactors { alpha: trace.alpha, beta: trace.beta })
}

/// One refiner training example. `t_iter` is the measured iteration time;
/// `t_sum`/`t_comm` are the additive model's components for the same run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSample {
    pub features: GraphFeatures,
    pub t_sum: f64,
    pub t_comm: f64,
    pub t_iter: f64,
}

fn validate_sample(index: usize, s: &TrainSample) -> Result<(), RefinerError> {
    let ok = s.t_iter > 0.0
        && s.t_iter.is_finite()
        && s.t_sum >= 0.0
        && s.t_sum.is_finite()
        && s.t_comm >= 0.0
        && s.t_comm.is_finite();
    if !ok {
        return Err(RefinerError::BadSampleTimes { index });
    }
    Ok(())
}

/// Squared relative error of the refined prediction for one sample.
pub fn sample_loss(model: &GnnModel, s: &TrainSample) -> Result<f64, RefinerError> {
    let trace = forward(model, &s.features)?;
    let pred = trace.alpha * s.t_sum + trace.beta * s.t_comm;
    let r = (pred - s.t_iter) / s.t_iter;
    Ok(r * r)
}

/// Reverse pass for one sample; accumulates parameter gradients into `grads`
/// (unscaled, caller averages) and returns the loss.
fn backward(model: &GnnModel, s: &TrainSample, grads: &mut GnnParams) -> Result<f64, RefinerError> {
    let trace = forward(model, &s.features)?;
    let f = &s.features;
    let n = f.node_features.len();
    let pred = trace.alpha * s.t_sum + trace.beta * s.t_comm;
    let r = (pred - s.t_iter) / s.t_iter;
    let loss = r * r;

    let dalpha = 2.0 * r * s.t_sum / s.t_iter;
    let dbeta = 2.0 * r * s.t_comm / s.t_iter;
    let dy = [dalpha * shifted_softplus_grad(trace.y[0]), dbeta * shifted_softplus_grad(trace.y[1])];

    let dhead_in = model.params.head_mlp.backward(&trace.head_trace, &dy, &mut grads.head_mlp);
    let dpooled = &dhead_in[..model.d_k];
    if let Some(enc_trace) = &trace.enc {
        let denc = &dhead_in[model.d_k..];
        model.params.encoder.backward(enc_trace, denc, &mut grads.encoder);
    }

    // Mean pooling then mean over active heads.
    let l_active = trace.active.len() as f64;
    let dvprime: Vec<f64> = dpooled.iter().map(|d| d / n as f64).collect();
    let mut dedge_term = vec![0.0; trace.entries.len()];
    let sqrt_dk = (model.d_k as f64).sqrt();
    for &h_idx in &trace.active {
        let head = trace.heads[h_idx].as_ref().expect("active head trace");
        let mut dq = vec![vec![0.0; model.d_k]; n];
        let mut dk = vec![vec![0.0; model.d_k]; n];
        let mut du = vec![vec![0.0; model.d_k]; n];
        let mut domega = vec![0.0; trace.entries.len()];
        // dh = dvprime / L for every node; through ReLU at the aggregate.
        for (i, inc) in trace.incoming.iter().enumerate() {
            let da: Vec<f64> = head.a[i]
                .iter()
                .zip(&dvprime)
                .map(|(a, d)| d / l_active * relu_grad(*a))
                .collect();
            for &e in inc {
                let src = trace.entries[e].src;
                // a_i = sum_e omega_e u_src: split into both factors.
                domega[e] = da.iter().zip(&head.u[src]).map(|(d, v)| d * v).sum();
                for (acc, d) in du[src].iter_mut().zip(&da) {
                    *acc += head.omega[e] * d;
                }
            }
            // Softmax backward: ds_e = w_e (dw_e - sum_k w_k dw_k).
            let inner: f64 = inc.iter().map(|&e| head.omega[e] * domega[e]).sum();
            for &e in inc {
                let ds = head.omega[e] * (domega[e] - inner);
                let (src, dst) = (trace.entries[e].src, trace.entries[e].dst);
                for (dqv, kv) in dq[dst].iter_mut().zip(&head.k[src]) {
                    *dqv += ds * kv / sqrt_dk;
                }
                for (dkv, qv) in dk[src].iter_mut().zip(&head.q[dst]) {
                    *dkv += ds * qv / sqrt_dk;
                }
                dedge_term[e] += ds;
            }
        }
        let gh = &mut grads.heads[h_idx];
        for i in 0..n {
            gh.w_q.add_outer(&dq[i], &f.node_features[i]);
            gh.w_k.add_outer(&dk[i], &f.node_features[i]);
            gh.w_v.add_outer(&du[i], &f.node_features[i]);
        }
    }
    // Shared edge projection: gradients flow from every head's scores.
    let zero_edge = vec![0.0; model.d_edge];
    for (e, entry) in trace.entries.iter().enumerate() {
        let dpre = dedge_term[e] * relu_grad(trace.edge_pre[e]);
        if dpre == 0.0 {
            continue;
        }
        let feat = entry.edge.map_or(zero_edge.as_slice(), |i| f.edges[i].features.as_slice());
        for (g, v) in grads.w_edge.iter_mut().zip(feat) {
            *g += dpre * v;
        }
        grads.b_edge += dpre;
    }
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Epochs without improvement before the learning rate halves.
    pub plateau_patience: usize,
    pub d_k: usize,
    pub n_heads: usize,
    pub enc_hidden: usize,
    pub enc_out: usize,
    pub head_hidden: usize,
    pub use_global_encoder: bool,
}

impl Default for TrainSettings {
    fn default() -> TrainSettings {
        TrainSettings {
            epochs: 200,
            learning_rate: 1e-3,
            batch_size: 16,
            plateau_patience: 20,
            d_k: 16,
            n_heads: 4,
            enc_hidden: 32,
            enc_out: 32,
            head_hidden: 64,
            use_global_encoder: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: GnnModel,
    pub log: Vec<EpochLog>,
}

/// Minibatch Adam on the squared-relative-error loss. Deterministic per
/// seed: initialization and shuffling draw from named substreams of `seed`.
pub fn train_gnn(
    train: &[TrainSample],
    val: &[TrainSample],
    settings: &TrainSettings,
    seed: u64,
) -> Result<TrainOutcome, RefinerError> {
    if train.is_empty() {
        return Err(RefinerError::EmptyDataset);
    }
    if settings.epochs < 1 {
        return Err(RefinerError::ZeroSetting("epochs"));
    }
    if settings.batch_size < 1 {
        return Err(RefinerError::ZeroSetting("batch_size"));
    }
    for (i, s) in train.iter().enumerate().chain(val.iter().enumerate()) {
        validate_sample(i, s)?;
    }
    let f0 = &train[0].features;
    let mut cfg = GnnConfig::new(
        f0.node_features.first().map_or(0, Vec::len),
        f0.edges.first().map_or(2, |e| e.features.len()),
        f0.globals.len(),
    );
    cfg.d_k = settings.d_k;
    cfg.n_heads = settings.n_heads;
    cfg.enc_hidden = settings.enc_hidden;
    cfg.enc_out = settings.enc_out;
    cfg.head_hidden = settings.head_hidden;
    cfg.use_global_encoder = settings.use_global_encoder;
    let mut model = GnnModel::init(&cfg, seed);
    model.config_fingerprint = crate::rng::fingerprint(&format!(
        "{}|seed={seed}",
        serde_json::to_string(settings).expect("settings serialize")
    ));

    let mut theta = model.params.flat();
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    let (beta1, beta2, eps_adam): (f64, f64, f64) = (0.9, 0.999, 1e-8);
    let mut step = 0u32;
    let mut lr = settings.learning_rate;
    let mut rng = crate::rng::stream(seed, "gnn-shuffle");
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(settings.epochs);
    let mut best = f64::INFINITY;
    let mut plateau = 0usize;

    for epoch in 0..settings.epochs {
        use rand::seq::SliceRandom;
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(settings.batch_size) {
            let mut grads = model.params.zeros_like();
            let mut batch_loss = 0.0;
            for &idx in batch {
                let loss = backward(&model, &train[idx], &mut grads)?;
                if !loss.is_finite() {
                    return Err(RefinerError::NonFiniteLoss { sample: idx, epoch });
                }
                batch_loss += loss;
            }
            epoch_loss += batch_loss;
            let scale = 1.0 / batch.len() as f64;
            let g = grads.flat();
            step += 1;
            let bc1 = 1.0 - beta1.powi(step as i32);
            let bc2 = 1.0 - beta2.powi(step as i32);
            for i in 0..theta.len() {
                let gi = g[i] * scale;
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                theta[i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps_adam);
            }
            model.params.assign(&theta);
        }
        let train_loss = epoch_loss / train.len() as f64;
        let val_loss = if val.is_empty() {
            None
        } else {
            let mut acc = 0.0;
            for s in val {
                acc += sample_loss(&model, s)?;
            }
            Some(acc / val.len() as f64)
        };
        log.push(EpochLog { epoch, train_loss, val_loss, learning_rate: lr });
        // Plateau detection on the monitored loss (validation when present).
        let monitored = val_loss.unwrap_or(train_loss);
        if monitored < best - 1e-12 {
            best = monitored;
            plateau = 0;
        } else {
            plateau += 1;
            if plateau >= settings.plateau_patience {
                lr *= 0.5;
                plateau = 0;
            }
        }
    }
    Ok(TrainOutcome { model, log })
}

/// Maximum relative disagreement between analytic gradients and central
/// finite differences over every parameter. The denominator is floored at
/// 1e-3 so near-zero gradient pairs compare absolutely.
pub fn grad_check(model: &GnnModel, sample: &TrainSample, epsilon: f64) -> Result<f64, RefinerError> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(RefinerError::BadEpsilon(epsilon));
    }
    validate_sample(0, sample)?;
    let mut grads = model.params.zeros_like();
    backward(model, sample, &mut grads)?;
    let analytic = grads.flat();
    let base = model.params.flat();
    let mut work = model.clone();
    let mut max_rel = 0.0f64;
    for i in 0..base.len() {
        let mut probe = base.clone();
        probe[i] = base[i] + epsilon;
        work.params.assign(&probe);
        let up = sample_loss(&work, sample)?;
        probe[i] = base[i] - epsilon;
        work.params.assign(&probe);
        let down = sample_loss(&work, sample)?;
        let numeric = (up - down) / (2.0 * epsilon);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-3);
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}

/// Analytic gradient vector in flat parameter order (diagnostics/tests).
pub fn analytic_gradients(model: &GnnModel, sample: &TrainSample) -> Result<Vec<f64>, RefinerError> {
    let mut grads = model.params.zeros_like();
    backward(model, sample, &mut grads)?;
    Ok(grads.flat())
}

pub fn model_to_json(model: &GnnModel) -> String {
    let mut out = serde_json::to_string(model).expect("model serialization cannot fail");
    out.push('\n');
    out
}

pub fn model_from_json(text: &str) -> Result<GnnModel, RefinerError> {
    let model: GnnModel = serde_json::from_str(text)?;
    if model.version != GNN_VERSION {
        return Err(RefinerError::WrongVersion(model.version));
    }
    Ok(model)
}

pub(crate) fn optimizer_one_hot(tag: &str) -> [f64; 4] {
    match tag {
        "sgd" => [1.0, 0.0, 0.0, 0.0],
        "adam" => [0.0, 1.0, 0.0, 0.0],
        "adamw" => [0.0, 0.0, 1.0, 0.0],
        _ => [0.0, 0.0, 0.0, 1.0],
    }
}

/// Width of the node feature rows produced by [`build_gnn_inputs`].
pub const NODE_FEATURE_DIM: usize = KIND_COUNT + 3;
/// Width of the edge feature rows produced by [`build_gnn_inputs`].
pub const EDGE_FEATURE_DIM: usize = 2;

/// Assembles refiner inputs from a layer graph, its run configuration, and
/// per-node predicted times.
///
/// Node rows: one-hot kind, log1p FLOPs, log1p params, raw predicted time.
/// Edge rows: log1p tensor bytes, direction flag (0 forward, 1 backward).
/// Globals: log1p batch size, optimizer one-hot, log1p device features in
/// sorted key order, log1p worker count.
pub fn build_gnn_inputs(
    g: &ModelGraph,
    cfg: &RunConfig,
    layer_times: &BTreeMap<String, f64>,
) -> Result<GraphFeatures, RefinerError> {
    let index: BTreeMap<&str, usize> =
        g.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
    let mut node_features = Vec::with_capacity(g.nodes.len());
    for node in &g.nodes {
        let cm = compute_layer_cm(node, cfg)?;
        let t = *layer_times
            .get(&node.id)
            .ok_or_else(|| RefinerError::MissingNodeTime(node.id.clone()))?;
        let mut row = vec![0.0; KIND_COUNT];
        row[node.kind.one_hot_index()] = 1.0;
        row.push((cm.flops as f64).ln_1p());
        row.push((cm.params as f64).ln_1p());
        row.push(t);
        node_features.push(row);
    }
    let edges = g
        .edges
        .iter()
        .map(|e| EdgeInput {
            src: index[e.src.as_str()],
            dst: index[e.dst.as_str()],
            features: vec![
                (e.tensor_bytes as f64).ln_1p(),
                if e.direction == EdgeDirection::Backward { 1.0 } else { 0.0 },
            ],
        })
        .collect();
    let mut globals = vec![(cfg.batch_size()? as f64).ln_1p()];
    globals.extend(optimizer_one_hot(&cfg.optimizer));
    globals.extend(cfg.dev.values().map(|v| v.ln_1p()));
    globals.push(f64::from(cfg.comm.n_workers).ln_1p());
    Ok(GraphFeatures { node_features, edges, globals })
}
