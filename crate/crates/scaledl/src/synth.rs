//! Synthetic workload generator and ground-truth runtime oracle.
//!
//! Five transformer-like architecture families provide structurally distinct
//! layer graphs, and a hidden roofline cost model produces their "measured"
//! runtimes: per-layer time is the max of a compute and a memory term, fused
//! adjacent elementwise layers get a discount, batch/worker-dependent
//! congestion and per-optimizer update overhead multiply the compute sum,
//! and lognormal jitter lands on the iteration time. The oracle stands in
//! for real benchmark hardware,
//! so end-to-end behavior (sampling, training, ablations) can be exercised
//! and verified deterministically on a desk-scale machine.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::comm::{allreduce_time, gradient_payload_bits, CommConfig, CommError};
use crate::design::{fedorov_exchange_standardized, DesignError, DesignProblem};
use crate::model_graph::{
    compute_layer_cm, parse_model_graph, serialize_model_graph, validate_graph, EdgeDep,
    EdgeDirection, GraphError, LayerKind, LayerNode, ModelGraph, RunConfig,
};

pub const ORACLE_PARAMS_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("unknown architecture family {0:?}")]
    UnknownFamily(String),
    #[error("{0} must be positive")]
    BadKnob(&'static str),
    #[error("oracle params: {0}")]
    BadParams(String),
    #[error("oracle params version {0} is not supported (expected {ORACLE_PARAMS_VERSION})")]
    WrongVersion(u32),
    #[error("config grid is empty")]
    EmptyGrid,
    #[error("budget {budget} exceeds grid size {grid}")]
    BudgetTooLarge { budget: usize, grid: usize },
    #[error("budget must be >= 1")]
    ZeroBudget,
    #[error("dataset row {row}: {message}")]
    BadRow { row: usize, message: String },
    #[error("dataset is missing column {0:?}")]
    MissingColumn(&'static str),
    #[error("per-layer column {column:?} on row {row} names a node absent from the graph")]
    UnknownLayerColumn { row: usize, column: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Comm(#[from] CommError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed oracle params: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Architecture families. The tags shape the block structure only; all
/// families share the same layer vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    T5Like,
    Gpt2Like,
    BertLike,
    VitLike,
    DeitLike,
}

pub const FAMILIES: [Family; 5] =
    [Family::T5Like, Family::Gpt2Like, Family::BertLike, Family::VitLike, Family::DeitLike];

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::T5Like => "t5-like",
            Family::Gpt2Like => "gpt2-like",
            Family::BertLike => "bert-like",
            Family::VitLike => "vit-like",
            Family::DeitLike => "deit-like",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Family, SynthError> {
        FAMILIES
            .iter()
            .copied()
            .find(|f| f.tag() == tag)
            .ok_or_else(|| SynthError::UnknownFamily(tag.to_string()))
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Structural scale knobs for the generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchKnobs {
    /// Encoder/decoder blocks per stack.
    pub depth: u32,
    /// Model width d.
    pub width: u64,
    /// Sequence length (token count).
    pub seq: u64,
}

struct GraphBuilder {
    g: ModelGraph,
    bytes_per_tok: u64,
}

impl GraphBuilder {
    fn new(name: String, seq: u64, width: u64) -> GraphBuilder {
        GraphBuilder {
            g: ModelGraph { name, nodes: Vec::new(), edges: Vec::new() },
            bytes_per_tok: seq * width * 4,
        }
    }

    fn node(&mut self, id: String, kind: LayerKind, dims: &[(&str, u64)]) -> String {
        self.g.nodes.push(LayerNode {
            id: id.clone(),
            kind,
            dims: dims.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        });
        id
    }

    /// Forward activation edge plus the mirrored gradient edge.
    fn link(&mut self, src: &str, dst: &str, tensor_bytes: u64) {
        for direction in [EdgeDirection::Forward, EdgeDirection::Backward] {
            self.g.edges.push(EdgeDep {
                src: src.to_string(),
                dst: dst.to_string(),
                tensor_bytes,
                direction,
            });
        }
    }

    /// Appends one transformer block after `prev` and returns the block's
    /// last node. `fused_tail` appends an adjacent Activation/Pooling pair.
    fn block(&mut self, prev: &str, prefix: &str, k: &ArchKnobs, fused_tail: bool) -> String {
        let (d, s) = (k.width, k.seq);
        let attn = self.node(
            format!("{prefix}.attn"),
            LayerKind::Attention,
            &[("seq", s), ("d_model", d), ("heads", 8)],
        );
        let ln1 =
            self.node(format!("{prefix}.ln1"), LayerKind::LayerNorm, &[("seq", s), ("d_model", d)]);
        let fc1 =
            self.node(format!("{prefix}.fc1"), LayerKind::Linear, &[("d_in", d), ("d_out", 4 * d)]);
        let act =
            self.node(format!("{prefix}.act"), LayerKind::Activation, &[("elements", s * 4 * d)]);
        let fc2 =
            self.node(format!("{prefix}.fc2"), LayerKind::Linear, &[("d_in", 4 * d), ("d_out", d)]);
        let ln2 =
            self.node(format!("{prefix}.ln2"), LayerKind::LayerNorm, &[("seq", s), ("d_model", d)]);
        let tok = self.bytes_per_tok;
        self.link(prev, &attn, tok);
        self.link(&attn, &ln1, tok);
        self.link(&ln1, &fc1, tok);
        self.link(&fc1, &act, 4 * tok);
        self.link(&act, &fc2, 4 * tok);
        self.link(&fc2, &ln2, tok);
        if !fused_tail {
            return ln2;
        }
        let act2 =
            self.node(format!("{prefix}.act2"), LayerKind::Activation, &[("elements", s * d)]);
        let pool =
            self.node(format!("{prefix}.pool"), LayerKind::Pooling, &[("elements", s * d)]);
        self.link(&ln2, &act2, tok);
        self.link(&act2, &pool, tok);
        pool
    }
}

/// Builds a family-shaped layer graph, deterministic per (family, knobs,
/// seed). The seed only jitters the vocabulary size, giving light diversity
/// across datasets without changing the block structure.
pub fn generate_architectures(
    family: Family,
    knobs: &ArchKnobs,
    seed: u64,
) -> Result<ModelGraph, SynthError> {
    if knobs.depth == 0 {
        return Err(SynthError::BadKnob("depth"));
    }
    if knobs.width == 0 {
        return Err(SynthError::BadKnob("width"));
    }
    if knobs.seq == 0 {
        return Err(SynthError::BadKnob("seq"));
    }
    let mut rng = crate::rng::stream(seed, "arch-gen");
    let vocab: u64 = 12_000 + 2_000 * rng.gen_range(0..9u64);
    let (d, s) = (knobs.width, knobs.seq);
    let name = format!("{}/d{}-w{d}-s{s}-v{vocab}", family.tag(), knobs.depth);
    let mut b = GraphBuilder::new(name, s, d);
    let tok = b.bytes_per_tok;
    match family {
        Family::BertLike => {
            let mut prev = b.node(
                "emb".into(),
                LayerKind::Embedding,
                &[("vocab", vocab), ("d_model", d), ("seq", s)],
            );
            for i in 0..knobs.depth {
                prev = b.block(&prev, &format!("blk{i}"), knobs, false);
            }
        }
        Family::Gpt2Like => {
            let mut prev = b.node(
                "emb".into(),
                LayerKind::Embedding,
                &[("vocab", vocab), ("d_model", d), ("seq", s)],
            );
            for i in 0..knobs.depth {
                prev = b.block(&prev, &format!("dec{i}"), knobs, false);
            }
            let head =
                b.node("head".into(), LayerKind::Linear, &[("d_in", d), ("d_out", vocab)]);
            b.link(&prev, &head, tok);
        }
        Family::T5Like => {
            let mut enc = b.node(
                "enc_emb".into(),
                LayerKind::Embedding,
                &[("vocab", vocab), ("d_model", d), ("seq", s)],
            );
            for i in 0..knobs.depth {
                enc = b.block(&enc, &format!("enc{i}"), knobs, false);
            }
            let mut dec = b.node(
                "dec_emb".into(),
                LayerKind::Embedding,
                &[("vocab", vocab), ("d_model", d), ("seq", s)],
            );
            for i in 0..knobs.depth {
                let block_last = b.block(&dec, &format!("dec{i}"), knobs, false);
                if i == 0 {
                    // Cross-attention context from the encoder stack.
                    b.link(&enc.clone(), &format!("dec{i}.attn"), tok);
                }
                dec = block_last;
            }
            let head =
                b.node("head".into(), LayerKind::Linear, &[("d_in", d), ("d_out", vocab)]);
            b.link(&dec, &head, tok);
        }
        Family::VitLike | Family::DeitLike => {
            let side = (s as f64).sqrt().ceil() as u64;
            let mut prev = b.node(
                "patch".into(),
                LayerKind::Conv2d,
                &[("h_out", side), ("w_out", side), ("c_in", 3), ("c_out", d), ("kernel", 16)],
            );
            let fused = family == Family::DeitLike;
            for i in 0..knobs.depth {
                prev = b.block(&prev, &format!("blk{i}"), knobs, fused);
            }
            let pool = b.node("pool".into(), LayerKind::Pooling, &[("elements", s * d)]);
            let head = b.node("head".into(), LayerKind::Linear, &[("d_in", d), ("d_out", 1000)]);
            b.link(&prev, &pool, tok);
            b.link(&pool, &head, d * 4);
        }
    }
    validate_graph(&b.g)?;
    Ok(b.g)
}

/// Hidden cost model parameters. These define the ground truth the rest of
/// the toolkit is evaluated against; they are never visible to the learned
/// predictors except through the generated samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleParams {
    pub version: u32,
    /// Peak device compute, FLOPs per second.
    pub peak_flops_per_s: f64,
    /// Peak device memory bandwidth, bytes per second.
    pub mem_bw_bytes_per_s: f64,
    /// Interconnect bandwidth used for generated run configs, bits/s.
    pub net_bandwidth_bps: f64,
    /// Per-message interconnect latency used for generated run configs.
    pub net_latency_s: f64,
    /// Fraction of peak each layer kind achieves, keyed by kind token.
    pub kind_efficiency: BTreeMap<String, f64>,
    pub default_efficiency: f64,
    /// Time multiplier (1 - discount) on the second layer of each adjacent
    /// elementwise pair.
    pub fusion_discount: f64,
    /// Congestion at batch 8 on one worker; 1.0 disables congestion exactly.
    pub congestion_base: f64,
    pub congestion_batch_coef: f64,
    pub congestion_worker_coef: f64,
    /// Lognormal sigma applied once per sample at the iteration level.
    pub noise_sigma: f64,
    /// Compute-sum multiplier per optimizer (parameter-update overhead);
    /// missing optimizers cost 1.0.
    #[serde(default)]
    pub optimizer_overhead: BTreeMap<String, f64>,
    pub seed: u64,
    /// Epoch size; iterations per epoch = ceil(size / batch).
    pub epoch_dataset_size: u64,
}

impl Default for OracleParams {
    fn default() -> OracleParams {
        let kind_efficiency: BTreeMap<String, f64> = [
            ("linear", 0.62),
            ("attention", 0.50),
            ("layernorm", 0.80),
            ("embedding", 0.80),
            ("conv2d", 0.55),
            ("activation", 0.90),
            ("pooling", 0.90),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        OracleParams {
            version: ORACLE_PARAMS_VERSION,
            peak_flops_per_s: 5e13,
            mem_bw_bytes_per_s: 1e12,
            net_bandwidth_bps: 2.5e11,
            net_latency_s: 5e-5,
            kind_efficiency,
            default_efficiency: 0.7,
            fusion_discount: 0.25,
            congestion_base: 1.15,
            congestion_batch_coef: 0.04,
            congestion_worker_coef: 0.08,
            noise_sigma: 0.03,
            optimizer_overhead: [("sgd", 1.0), ("adam", 1.12), ("adamw", 1.06)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            seed: 0,
            epoch_dataset_size: 8192,
        }
    }
}

impl OracleParams {
    /// Neutral regime: no fusion, no congestion, no noise, no optimizer
    /// overhead. In this regime the oracle is exactly the additive model.
    pub fn additive() -> OracleParams {
        OracleParams {
            fusion_discount: 0.0,
            congestion_base: 1.0,
            noise_sigma: 0.0,
            optimizer_overhead: BTreeMap::new(),
            ..OracleParams::default()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.version != ORACLE_PARAMS_VERSION {
            return Err(SynthError::WrongVersion(self.version));
        }
        let positive = [
            ("peak_flops_per_s", self.peak_flops_per_s),
            ("mem_bw_bytes_per_s", self.mem_bw_bytes_per_s),
            ("net_bandwidth_bps", self.net_bandwidth_bps),
            ("congestion_base", self.congestion_base),
            ("default_efficiency", self.default_efficiency),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SynthError::BadParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.fusion_discount) {
            return Err(SynthError::BadParams(format!(
                "fusion_discount must be in [0, 1), got {}",
                self.fusion_discount
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(SynthError::BadParams("noise_sigma must be >= 0".into()));
        }
        if self.net_latency_s < 0.0 {
            return Err(SynthError::BadParams("net_latency_s must be >= 0".into()));
        }
        for (k, &v) in &self.kind_efficiency {
            if !(v.is_finite() && v > 0.0 && v <= 1.0) {
                return Err(SynthError::BadParams(format!("efficiency for {k} must be in (0,1]")));
            }
        }
        for (k, &v) in &self.optimizer_overhead {
            if !(v.is_finite() && v > 0.0) {
                return Err(SynthError::BadParams(format!(
                    "optimizer_overhead for {k} must be positive, got {v}"
                )));
            }
        }
        if self.epoch_dataset_size == 0 {
            return Err(SynthError::BadParams("epoch_dataset_size must be >= 1".into()));
        }
        Ok(())
    }

    fn efficiency(&self, kind: &LayerKind) -> f64 {
        self.kind_efficiency.get(&kind.as_str()).copied().unwrap_or(self.default_efficiency)
    }

    /// Compute-sum multiplier for the parameter-update cost of `optimizer`;
    /// exactly 1 for anything not in the table.
    pub fn overhead(&self, optimizer: &str) -> f64 {
        self.optimizer_overhead.get(optimizer).copied().unwrap_or(1.0)
    }

    /// Compute-sum multiplier; exactly 1 when the base is 1.
    pub fn congestion(&self, batch: u64, workers: u32) -> f64 {
        if self.congestion_base == 1.0 {
            return 1.0;
        }
        let b_term = self.congestion_batch_coef * (batch as f64 / 8.0).log2();
        let n_term = self.congestion_worker_coef * f64::from(workers).log2();
        1.0 + (self.congestion_base - 1.0) * (1.0 + b_term + n_term)
    }
}

pub fn params_to_json(p: &OracleParams) -> String {
    let mut out = serde_json::to_string_pretty(p).expect("params serialization cannot fail");
    out.push('\n');
    out
}

pub fn params_from_json(text: &str) -> Result<OracleParams, SynthError> {
    let p: OracleParams = serde_json::from_str(text)?;
    p.validate()?;
    Ok(p)
}

/// One benchmarked workload: a graph, the run configuration, and the
/// oracle's (or hardware's) measured times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSample {
    pub family: String,
    pub graph: ModelGraph,
    pub cfg: RunConfig,
    pub measured_iter_s: f64,
    pub measured_epoch_s: f64,
    /// Noise-free, congestion-free per-layer times (fusion included); empty
    /// when the data source did not instrument layers.
    pub per_layer_times: BTreeMap<String, f64>,
}

fn standard_normal(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    // Box-Muller; u1 shifted into (0, 1].
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Runs the hidden cost model on one (graph, config) pair.
///
/// Per-layer time is `max(flops/(peak*eff), bytes/(bw*eff))`; the second
/// layer of each forward-adjacent elementwise pair is multiplied by
/// `1 - fusion_discount`;
/// `T_iter = congestion * overhead * sum + allreduce + jitter`;
/// `T_epoch = I * T_iter` exactly.
pub fn oracle_runtime(
    g: &ModelGraph,
    cfg: &RunConfig,
    params: &OracleParams,
) -> Result<WorkloadSample, SynthError> {
    params.validate()?;
    validate_graph(g)?;
    cfg.validate()?;
    let batch = cfg.batch_size()?;

    // Second member of every forward-adjacent elementwise pair is fused.
    let kind_of: BTreeMap<&str, &LayerKind> =
        g.nodes.iter().map(|n| (n.id.as_str(), &n.kind)).collect();
    let mut fused: std::collections::BTreeSet<&str> = std::collections::BTreeSet::new();
    for e in &g.edges {
        if e.direction == EdgeDirection::Forward
            && kind_of[e.src.as_str()].is_elementwise()
            && kind_of[e.dst.as_str()].is_elementwise()
        {
            fused.insert(e.dst.as_str());
        }
    }

    let mut per_layer_times = BTreeMap::new();
    for node in &g.nodes {
        let cm = compute_layer_cm(node, cfg)?;
        let eff = params.efficiency(&node.kind);
        let compute = cm.flops as f64 / (params.peak_flops_per_s * eff);
        let memory = cm.activation_bytes as f64 / (params.mem_bw_bytes_per_s * eff);
        let mut t = compute.max(memory);
        if fused.contains(node.id.as_str()) {
            t *= 1.0 - params.fusion_discount;
        }
        per_layer_times.insert(node.id.clone(), t);
    }
    // Ascending-id summation, matching the additive predictor's convention.
    let t_sum: f64 = per_layer_times.values().sum();

    let payload = match cfg.comm.payload_bits {
        Some(bits) => bits,
        None => gradient_payload_bits(g, 32)?,
    };
    let t_comm = allreduce_time(&cfg.comm.with_payload(payload))?;

    let clean =
        params.congestion(batch, cfg.comm.n_workers) * params.overhead(&cfg.optimizer) * t_sum
            + t_comm;
    let measured_iter_s = if params.noise_sigma > 0.0 {
        let key = format!(
            "oracle-noise|{}|{}",
            g.name,
            serde_json::to_string(cfg).expect("config serialization cannot fail")
        );
        let mut rng = crate::rng::stream(params.seed, &key);
        let z = standard_normal(&mut rng);
        let sigma = params.noise_sigma;
        clean * (sigma * z - 0.5 * sigma * sigma).exp()
    } else {
        clean
    };
    let measured_epoch_s = cfg.iterations_per_epoch as f64 * measured_iter_s;
    let family = g.name.split('/').next().unwrap_or(&g.name).to_string();
    Ok(WorkloadSample {
        family,
        graph: g.clone(),
        cfg: cfg.clone(),
        measured_iter_s,
        measured_epoch_s,
        per_layer_times,
    })
}

/// Optimizers the sweep grid cycles through; anything else is treated as a
/// fourth "other" category by the feature encodings.
pub const OPTIMIZERS: [&str; 3] = ["sgd", "adam", "adamw"];

/// One point of the benchmark configuration grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SweepPoint {
    pub family: Family,
    pub batch: u64,
    pub seq: u64,
    pub depth: u32,
    pub width: u64,
    pub workers: u32,
    pub optimizer: &'static str,
}

/// Full factorial grid over the default scale ranges (960 points), cycling
/// optimizers across points (3 and the 4-long worker axis are coprime, so
/// no optimizer sticks to one worker count).
pub fn default_grid(family: Family) -> Vec<SweepPoint> {
    let mut grid = Vec::new();
    for &batch in &[8u64, 16, 32, 64] {
        for &seq in &[64u64, 128, 256, 512] {
            for &depth in &[2u32, 4, 6, 8, 12] {
                for &width in &[256u64, 512, 768] {
                    for &workers in &[1u32, 2, 4, 8] {
                        let optimizer = OPTIMIZERS[grid.len() % OPTIMIZERS.len()];
                        grid.push(SweepPoint {
                            family,
                            batch,
                            seq,
                            depth,
                            width,
                            workers,
                            optimizer,
                        });
                    }
                }
            }
        }
    }
    grid
}

/// Seeded subsample preserving grid order (e.g. the 200-config working set).
pub fn subsample_grid(grid: &[SweepPoint], count: usize, seed: u64) -> Vec<SweepPoint> {
    if count >= grid.len() {
        return grid.to_vec();
    }
    let mut rng = crate::rng::stream(seed, "grid-subsample");
    let mut picked = rand::seq::index::sample(&mut rng, grid.len(), count).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| grid[i]).collect()
}

/// Descriptor row for one grid point: log scales plus dummy-coded optimizer
/// indicators with "sgd" as the reference category (8 columns). Selection
/// expands these into bin indicators via
/// [`crate::design::indicator_rows`]; see there for why the indicator basis
/// suits forest-backed pipelines.
pub fn config_features(p: &SweepPoint) -> Vec<f64> {
    let mut row = vec![
        (p.batch as f64).ln(),
        (p.seq as f64).ln(),
        (f64::from(p.depth)).ln(),
        (p.width as f64).ln(),
        (f64::from(p.workers)).ln(),
    ];
    row.extend(crate::refiner::optimizer_one_hot(p.optimizer)[1..].iter().copied());
    row
}

/// Bin cap for [`crate::design::indicator_rows`] over grid descriptors:
/// covers every level of the default scale axes (the densest has five)
/// while keeping the indicator column count below sensible budgets.
pub const DESIGN_BINS: usize = 6;

/// Interaction pairs for grid selection, by [`config_features`] position:
/// batch x seq, batch x width, and seq x width pin the joint cells the
/// per-layer regressors key on (their features move with those three axes
/// only), and batch x workers pins the congestion surface the refiner fits.
pub const DESIGN_PAIRS: &[(usize, usize)] = &[(0, 1), (0, 3), (1, 3), (0, 4)];

/// Run configuration for one grid point under the oracle's device profile.
pub fn make_run_config(p: &SweepPoint, params: &OracleParams) -> RunConfig {
    let iterations = params.epoch_dataset_size.div_ceil(p.batch);
    RunConfig {
        hp: [
            ("batch_size".to_string(), p.batch as f64),
            ("n_workers".to_string(), f64::from(p.workers)),
        ]
        .into(),
        optimizer: p.optimizer.to_string(),
        dev: [
            ("mem_bw".to_string(), params.mem_bw_bytes_per_s),
            ("peak_flops".to_string(), params.peak_flops_per_s),
        ]
        .into(),
        iterations_per_epoch: iterations,
        bytes_per_elem: 4,
        comm: CommConfig {
            n_workers: p.workers,
            payload_bits: None,
            bandwidth_bps: params.net_bandwidth_bps,
            latency_s: params.net_latency_s,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    DOptimal,
    Random,
    Full,
}

/// Benchmarks a subset of the grid chosen by the sampler. D-optimal runs the
/// exchange heuristic on standardized bin indicators of the config features;
/// random draws a seeded uniform subset; full benchmarks everything. Output
/// follows grid order.
pub fn collect_dataset(
    grid: &[SweepPoint],
    sampler: Sampler,
    budget: usize,
    seed: u64,
    params: &OracleParams,
) -> Result<Vec<WorkloadSample>, SynthError> {
    if grid.is_empty() {
        return Err(SynthError::EmptyGrid);
    }
    let chosen: Vec<usize> = match sampler {
        Sampler::Full => (0..grid.len()).collect(),
        Sampler::Random => {
            check_budget(budget, grid.len())?;
            let mut rng = crate::rng::stream(seed, "collect-random");
            let mut picked = rand::seq::index::sample(&mut rng, grid.len(), budget).into_vec();
            picked.sort_unstable();
            picked
        }
        Sampler::DOptimal => {
            check_budget(budget, grid.len())?;
            let descriptors: Vec<Vec<f64>> = grid.iter().map(config_features).collect();
            let candidates =
                crate::design::indicator_rows(&descriptors, DESIGN_BINS, DESIGN_PAIRS)?;
            let problem = DesignProblem::new(candidates, budget);
            let mut selection = fedorov_exchange_standardized(&problem, 4, seed)?.selected;
            selection.sort_unstable();
            selection
        }
    };
    let mut graph_cache: BTreeMap<(Family, u32, u64, u64), ModelGraph> = BTreeMap::new();
    let mut out = Vec::with_capacity(chosen.len());
    for idx in chosen {
        let p = grid[idx];
        let key = (p.family, p.depth, p.width, p.seq);
        if !graph_cache.contains_key(&key) {
            let knobs = ArchKnobs { depth: p.depth, width: p.width, seq: p.seq };
            graph_cache.insert(key, generate_architectures(p.family, &knobs, seed)?);
        }
        let g = &graph_cache[&key];
        let cfg = make_run_config(&p, params);
        out.push(oracle_runtime(g, &cfg, params)?);
    }
    Ok(out)
}

fn check_budget(budget: usize, grid: usize) -> Result<(), SynthError> {
    if budget == 0 {
        return Err(SynthError::ZeroBudget);
    }
    if budget > grid {
        return Err(SynthError::BudgetTooLarge { budget, grid });
    }
    Ok(())
}

fn graph_slug(name: &str) -> String {
    name.chars().map(|c| if c.is_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

const FIXED_COLUMNS: [&str; 12] = [
    "family",
    "graph",
    "batch_size",
    "n_workers",
    "iterations_per_epoch",
    "optimizer",
    "bytes_per_elem",
    "net_bandwidth_bps",
    "net_latency_s",
    "dev_peak_flops",
    "dev_mem_bw",
    "measured_iter_s",
];
const EPOCH_COLUMN: &str = "measured_epoch_s";

/// Writes `dataset.csv` plus one graph file per distinct architecture under
/// `dir/graphs/`, and returns the CSV path. Per-layer times become sparse
/// `t_<node_id>` columns (the union across samples; blank where absent).
pub fn write_dataset(samples: &[WorkloadSample], dir: &Path) -> Result<PathBuf, SynthError> {
    let graphs_dir = dir.join("graphs");
    std::fs::create_dir_all(&graphs_dir)?;
    let mut layer_columns: Vec<String> = samples
        .iter()
        .flat_map(|s| s.per_layer_times.keys().cloned())
        .collect::<std::collections::BTreeSet<String>>()
        .into_iter()
        .collect();
    layer_columns.sort();

    let csv_path = dir.join("dataset.csv");
    let mut writer = csv::Writer::from_path(&csv_path)?;
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.push(EPOCH_COLUMN.to_string());
    header.extend(layer_columns.iter().map(|c| format!("t_{c}")));
    writer.write_record(&header)?;

    let mut written: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for s in samples {
        let slug = format!("graphs/{}.json", graph_slug(&s.graph.name));
        if written.insert(slug.clone()) {
            std::fs::write(dir.join(&slug), serialize_model_graph(&s.graph))?;
        }
        let mut record: Vec<String> = vec![
            s.family.clone(),
            slug,
            s.cfg.batch_size()?.to_string(),
            s.cfg.comm.n_workers.to_string(),
            s.cfg.iterations_per_epoch.to_string(),
            s.cfg.optimizer.clone(),
            s.cfg.bytes_per_elem.to_string(),
            format!("{:?}", s.cfg.comm.bandwidth_bps),
            format!("{:?}", s.cfg.comm.latency_s),
            format!("{:?}", s.cfg.dev.get("peak_flops").copied().unwrap_or(0.0)),
            format!("{:?}", s.cfg.dev.get("mem_bw").copied().unwrap_or(0.0)),
            format!("{:?}", s.measured_iter_s),
        ];
        record.push(format!("{:?}", s.measured_epoch_s));
        for col in &layer_columns {
            match s.per_layer_times.get(col) {
                Some(t) => record.push(format!("{t:?}")),
                None => record.push(String::new()),
            }
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(csv_path)
}

fn parse_field<T: std::str::FromStr>(
    row: usize,
    name: &str,
    value: &str,
) -> Result<T, SynthError> {
    value.parse().map_err(|_| SynthError::BadRow {
        row,
        message: format!("cannot parse {name} from {value:?}"),
    })
}

/// Reads a dataset written by [`write_dataset`] (or hand-authored in the
/// same schema). Graph paths resolve relative to the CSV's directory.
pub fn read_dataset(csv_path: &Path) -> Result<Vec<WorkloadSample>, SynthError> {
    let dir = csv_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut reader = csv::Reader::from_path(csv_path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let col = |name: &'static str| -> Result<usize, SynthError> {
        headers.iter().position(|h| h == name).ok_or(SynthError::MissingColumn(name))
    };
    let mut fixed = BTreeMap::new();
    for name in FIXED_COLUMNS {
        fixed.insert(name, col(name)?);
    }
    let epoch_idx = col(EPOCH_COLUMN)?;
    let layer_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| h.strip_prefix("t_").map(|id| (i, id.to_string())))
        .collect();

    let mut graph_cache: BTreeMap<String, ModelGraph> = BTreeMap::new();
    let mut out = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 2; // 1-based plus header, for error messages
        let record = record?;
        let get = |name: &'static str| record.get(fixed[name]).unwrap_or("").to_string();
        let graph_rel = get("graph");
        if !graph_cache.contains_key(&graph_rel) {
            let text = std::fs::read_to_string(dir.join(&graph_rel)).map_err(|e| {
                SynthError::BadRow { row, message: format!("graph file {graph_rel:?}: {e}") }
            })?;
            graph_cache.insert(graph_rel.clone(), parse_model_graph(&text)?);
        }
        let graph = graph_cache[&graph_rel].clone();
        let batch: u64 = parse_field(row, "batch_size", &get("batch_size"))?;
        let workers: u32 = parse_field(row, "n_workers", &get("n_workers"))?;
        let cfg = RunConfig {
            hp: [
                ("batch_size".to_string(), batch as f64),
                ("n_workers".to_string(), f64::from(workers)),
            ]
            .into(),
            optimizer: get("optimizer"),
            dev: [
                ("mem_bw".to_string(), parse_field(row, "dev_mem_bw", &get("dev_mem_bw"))?),
                (
                    "peak_flops".to_string(),
                    parse_field(row, "dev_peak_flops", &get("dev_peak_flops"))?,
                ),
            ]
            .into(),
            iterations_per_epoch: parse_field(
                row,
                "iterations_per_epoch",
                &get("iterations_per_epoch"),
            )?,
            bytes_per_elem: parse_field(row, "bytes_per_elem", &get("bytes_per_elem"))?,
            comm: CommConfig {
                n_workers: workers,
                payload_bits: None,
                bandwidth_bps: parse_field(
                    row,
                    "net_bandwidth_bps",
                    &get("net_bandwidth_bps"),
                )?,
                latency_s: parse_field(row, "net_latency_s", &get("net_latency_s"))?,
            },
        };
        cfg.validate()?;
        let mut per_layer_times = BTreeMap::new();
        for (i, id) in &layer_cols {
            let cell = record.get(*i).unwrap_or("");
            if cell.is_empty() {
                continue;
            }
            if !graph.nodes.iter().any(|n| &n.id == id) {
                return Err(SynthError::UnknownLayerColumn { row, column: format!("t_{id}") });
            }
            per_layer_times.insert(id.clone(), parse_field(row, "layer time", cell)?);
        }
        out.push(WorkloadSample {
            family: get("family"),
            graph,
            cfg,
            measured_iter_s: parse_field(row, "measured_iter_s", &get("measured_iter_s"))?,
            measured_epoch_s: parse_field(
                row,
                EPOCH_COLUMN,
                record.get(epoch_idx).unwrap_or(""),
            )?,
            per_layer_times,
        });
    }
    Ok(out)
}

/// Externally measured dataset, validated: times must be positive, and rows
/// whose epoch time disagrees with iterations x iteration time by more than
/// 1% are flagged (not rejected).
#[derive(Debug, Clone, PartialEq)]
pub struct IngestReport {
    pub samples: Vec<WorkloadSample>,
    pub warnings: Vec<String>,
}

pub fn ingest_measurements(csv_path: &Path) -> Result<IngestReport, SynthError> {
    let samples = read_dataset(csv_path)?;
    let mut warnings = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let row = i + 2;
        if !(s.measured_iter_s > 0.0 && s.measured_iter_s.is_finite()) {
            return Err(SynthError::BadRow {
                row,
                message: format!("measured_iter_s must be positive, got {}", s.measured_iter_s),
            });
        }
        if !(s.measured_epoch_s > 0.0 && s.measured_epoch_s.is_finite()) {
            return Err(SynthError::BadRow {
                row,
                message: format!("measured_epoch_s must be positive, got {}", s.measured_epoch_s),
            });
        }
        if let Some((id, &t)) = s.per_layer_times.iter().find(|(_, &t)| !(t >= 0.0 && t.is_finite()))
        {
            return Err(SynthError::BadRow {
                row,
                message: format!("layer {id} has invalid time {t}"),
            });
        }
        let implied = s.cfg.iterations_per_epoch as f64 * s.measured_iter_s;
        let gap = (s.measured_epoch_s - implied).abs() / implied;
        if gap > 0.01 {
            warnings.push(format!(
                "row {row}: epoch time {} disagrees with iterations x iter time {} by {:.1}%",
                s.measured_epoch_s,
                implied,
                gap * 100.0
            ));
        }
    }
    Ok(IngestReport { samples, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{information_matrix, log_det};
    use std::collections::BTreeSet;

    fn knobs(depth: u32, width: u64, seq: u64) -> ArchKnobs {
        ArchKnobs { depth, width, seq }
    }

    #[test]
    fn bert_depth_one_block_structure() {
        let g = generate_architectures(Family::BertLike, &knobs(1, 64, 16), 3).unwrap();
        let kinds: Vec<String> = g.nodes.iter().map(|n| n.kind.as_str()).collect();
        assert_eq!(
            kinds,
            vec!["embedding", "attention", "layernorm", "linear", "activation", "linear", "layernorm"]
        );
        // Forward chain plus mirrored gradient edges.
        assert_eq!(g.edges.len(), 12);
        assert!(g.edges.iter().any(|e| e.src == "emb"
            && e.dst == "blk0.attn"
            && e.direction == EdgeDirection::Backward));
    }

    #[test]
    fn invalid_knobs_and_family_tags() {
        assert!(matches!(
            generate_architectures(Family::BertLike, &knobs(0, 64, 16), 0),
            Err(SynthError::BadKnob("depth"))
        ));
        assert!(matches!(
            generate_architectures(Family::VitLike, &knobs(2, 0, 16), 0),
            Err(SynthError::BadKnob("width"))
        ));
        assert!(matches!(Family::from_tag("resnet"), Err(SynthError::UnknownFamily(_))));
        assert_eq!(Family::from_tag("deit-like").unwrap(), Family::DeitLike);
    }

    #[test]
    fn generator_is_deterministic_per_seed() {
        let a = generate_architectures(Family::Gpt2Like, &knobs(2, 128, 32), 7).unwrap();
        let b = generate_architectures(Family::Gpt2Like, &knobs(2, 128, 32), 7).unwrap();
        assert_eq!(serialize_model_graph(&a), serialize_model_graph(&b));
        // Another seed shifts the vocabulary draw (name encodes it).
        let c = generate_architectures(Family::Gpt2Like, &knobs(2, 128, 32), 8).unwrap();
        assert_ne!(a.name, c.name);
    }

    #[test]
    fn all_families_produce_valid_graphs() {
        for family in FAMILIES {
            let g = generate_architectures(family, &knobs(2, 128, 64), 1).unwrap();
            validate_graph(&g).unwrap();
            assert!(g.name.starts_with(family.tag()));
            let embeddings =
                g.nodes.iter().filter(|n| n.kind == LayerKind::Embedding).count();
            match family {
                Family::T5Like => assert_eq!(embeddings, 2),
                Family::BertLike | Family::Gpt2Like => assert_eq!(embeddings, 1),
                Family::VitLike | Family::DeitLike => {
                    assert_eq!(embeddings, 0);
                    assert!(g.nodes.iter().any(|n| n.kind == LayerKind::Conv2d));
                }
            }
        }
        // Only the deit family carries adjacent elementwise pairs.
        let deit = generate_architectures(Family::DeitLike, &knobs(2, 128, 64), 1).unwrap();
        let kind_of: BTreeMap<&str, &LayerKind> =
            deit.nodes.iter().map(|n| (n.id.as_str(), &n.kind)).collect();
        assert!(deit.edges.iter().any(|e| e.direction == EdgeDirection::Forward
            && kind_of[e.src.as_str()].is_elementwise()
            && kind_of[e.dst.as_str()].is_elementwise()));
    }

    fn single_worker_cfg(batch: u64, params: &OracleParams) -> RunConfig {
        make_run_config(
            &SweepPoint {
                family: Family::BertLike,
                batch,
                seq: 64,
                depth: 2,
                width: 256,
                workers: 1,
                optimizer: "sgd",
            },
            params,
        )
    }

    #[test]
    fn neutral_oracle_is_exactly_additive() {
        let params = OracleParams::additive();
        let g = generate_architectures(Family::BertLike, &knobs(2, 256, 64), 0).unwrap();
        let cfg = single_worker_cfg(16, &params);
        let s = oracle_runtime(&g, &cfg, &params).unwrap();
        let manual: f64 = s.per_layer_times.values().sum();
        assert_eq!(s.measured_iter_s, manual, "single worker adds no comm");
        assert_eq!(s.measured_epoch_s, cfg.iterations_per_epoch as f64 * s.measured_iter_s);
        assert_eq!(cfg.iterations_per_epoch, 512);
        assert_eq!(s.family, "bert-like");
    }

    #[test]
    fn fusion_discount_halves_second_elementwise_layer() {
        let mut g = ModelGraph { name: "fused".into(), nodes: Vec::new(), edges: Vec::new() };
        for id in ["a", "b"] {
            g.nodes.push(LayerNode {
                id: id.into(),
                kind: LayerKind::Activation,
                dims: [("elements".to_string(), 1024)].into(),
            });
        }
        g.edges.push(EdgeDep {
            src: "a".into(),
            dst: "b".into(),
            tensor_bytes: 4096,
            direction: EdgeDirection::Forward,
        });
        let mut params = OracleParams::additive();
        let cfg = single_worker_cfg(16, &params);
        let plain = oracle_runtime(&g, &cfg, &params).unwrap();
        params.fusion_discount = 0.5;
        let fused = oracle_runtime(&g, &cfg, &params).unwrap();
        assert_eq!(fused.per_layer_times["a"], plain.per_layer_times["a"]);
        assert_eq!(fused.per_layer_times["b"], plain.per_layer_times["b"] * 0.5);
        assert!(plain.per_layer_times["b"] > 0.0);
    }

    #[test]
    fn congestion_factor_values() {
        let mut params = OracleParams::additive();
        assert_eq!(params.congestion(64, 8), 1.0);
        params.congestion_base = 1.2;
        assert!((params.congestion(8, 1) - 1.2).abs() < 1e-15);
        // 1 + 0.2 * (1 + 0.04*log2(8) + 0.08*log2(8))
        assert!((params.congestion(64, 8) - 1.272).abs() < 1e-12);
    }

    #[test]
    fn noise_is_deterministic_and_epoch_stays_exact() {
        let params = OracleParams { noise_sigma: 0.05, ..OracleParams::default() };
        let g = generate_architectures(Family::VitLike, &knobs(2, 256, 64), 1).unwrap();
        let cfg = single_worker_cfg(32, &params);
        let a = oracle_runtime(&g, &cfg, &params).unwrap();
        let b = oracle_runtime(&g, &cfg, &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.measured_epoch_s, cfg.iterations_per_epoch as f64 * a.measured_iter_s);
        // A different batch size draws different jitter.
        let other = oracle_runtime(&g, &single_worker_cfg(16, &params), &params).unwrap();
        let ratio_a = a.measured_iter_s / (a.per_layer_times.values().sum::<f64>());
        let ratio_o = other.measured_iter_s / (other.per_layer_times.values().sum::<f64>());
        assert_ne!(ratio_a, ratio_o);
        // Jitter factors hover around 1.
        let clean_params = OracleParams { noise_sigma: 0.0, ..params.clone() };
        let clean = oracle_runtime(&g, &cfg, &clean_params).unwrap();
        let factor = a.measured_iter_s / clean.measured_iter_s;
        assert!((0.8..1.25).contains(&factor), "factor {factor}");
    }

    #[test]
    fn communication_share_is_material_but_not_dominant() {
        let params = OracleParams::default();
        let point = SweepPoint {
            family: Family::BertLike,
            batch: 32,
            seq: 256,
            depth: 8,
            width: 768,
            workers: 4,
            optimizer: "sgd",
        };
        let g = generate_architectures(
            point.family,
            &knobs(point.depth, point.width, point.seq),
            0,
        )
        .unwrap();
        let cfg = make_run_config(&point, &params);
        let payload = gradient_payload_bits(&g, 32).unwrap();
        let t_comm = allreduce_time(&cfg.comm.with_payload(payload)).unwrap();
        let s = oracle_runtime(&g, &cfg, &params).unwrap();
        let share = t_comm / s.measured_iter_s;
        assert!((0.05..0.5).contains(&share), "comm share {share:.3}");
    }

    #[test]
    fn collect_full_and_forced_doptimal_agree() {
        let params = OracleParams::additive();
        let grid: Vec<SweepPoint> =
            default_grid(Family::BertLike).into_iter().step_by(40).take(12).collect();
        let full = collect_dataset(&grid, Sampler::Full, 0, 5, &params).unwrap();
        assert_eq!(full.len(), 12);
        let forced = collect_dataset(&grid, Sampler::DOptimal, 12, 5, &params).unwrap();
        assert_eq!(full, forced, "budget = grid size forces every point");
        assert!(matches!(
            collect_dataset(&grid, Sampler::Random, 13, 5, &params),
            Err(SynthError::BudgetTooLarge { budget: 13, grid: 12 })
        ));
        assert!(matches!(
            collect_dataset(&[], Sampler::Full, 0, 5, &params),
            Err(SynthError::EmptyGrid)
        ));
    }

    #[test]
    fn doptimal_selection_beats_random_information() {
        let grid = subsample_grid(&default_grid(Family::Gpt2Like), 60, 9);
        let descriptors: Vec<Vec<f64>> = grid.iter().map(config_features).collect();
        let candidates =
            crate::design::indicator_rows(&descriptors, DESIGN_BINS, DESIGN_PAIRS).unwrap();
        let (std_rows, _) = crate::design::standardize_candidates(&candidates).unwrap();
        let k = 24;
        for seed in 0..5u64 {
            let problem = DesignProblem::new(candidates.clone(), k);
            let dopt = fedorov_exchange_standardized(&problem, 4, seed).unwrap();
            let mut rng = crate::rng::stream(seed, "collect-random");
            let random = rand::seq::index::sample(&mut rng, grid.len(), k).into_vec();
            let as_mask = |sel: &[usize]| {
                let mut mask = vec![false; grid.len()];
                for &i in sel {
                    mask[i] = true;
                }
                mask
            };
            let info_d = information_matrix(&std_rows, &as_mask(&dopt.selected)).unwrap();
            let info_r = information_matrix(&std_rows, &as_mask(&random)).unwrap();
            let ld = log_det(&info_d, 1e-6).unwrap();
            let lr = log_det(&info_r, 1e-6).unwrap();
            assert!(ld >= lr - 1e-9, "seed {seed}: d-optimal {ld} < random {lr}");
        }
    }

    #[test]
    fn dataset_round_trip_is_exact() {
        let params = OracleParams::default();
        let grid: Vec<SweepPoint> =
            default_grid(Family::DeitLike).into_iter().step_by(151).take(6).collect();
        let samples = collect_dataset(&grid, Sampler::Full, 0, 11, &params).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv_path = write_dataset(&samples, dir.path()).unwrap();
        let back = read_dataset(&csv_path).unwrap();
        assert_eq!(samples, back);
    }

    #[test]
    fn ingest_flags_inconsistent_epoch_times() {
        let params = OracleParams::default();
        let grid: Vec<SweepPoint> =
            default_grid(Family::BertLike).into_iter().step_by(320).take(3).collect();
        let mut samples = collect_dataset(&grid, Sampler::Full, 0, 2, &params).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let clean_csv = write_dataset(&samples, dir.path()).unwrap();
        let report = ingest_measurements(&clean_csv).unwrap();
        assert_eq!(report.samples.len(), 3);
        assert!(report.warnings.is_empty());

        samples[1].measured_epoch_s *= 1.05;
        let tampered_dir = tempfile::tempdir().unwrap();
        let tampered_csv = write_dataset(&samples, tampered_dir.path()).unwrap();
        let report = ingest_measurements(&tampered_csv).unwrap();
        assert_eq!(report.warnings.len(), 1);
        assert!(report.warnings[0].starts_with("row 3:"), "{}", report.warnings[0]);

        samples[0].measured_iter_s = -1.0;
        let bad_dir = tempfile::tempdir().unwrap();
        let bad_csv = write_dataset(&samples, bad_dir.path()).unwrap();
        assert!(matches!(
            ingest_measurements(&bad_csv),
            Err(SynthError::BadRow { row: 2, .. })
        ));
    }

    #[test]
    fn params_file_round_trip_and_validation() {
        let params = OracleParams::default();
        let text = params_to_json(&params);
        assert_eq!(params_from_json(&text).unwrap(), params);
        let stale = text.replace("\"version\": 1", "\"version\": 3");
        assert!(matches!(params_from_json(&stale), Err(SynthError::WrongVersion(3))));
        let bad = OracleParams { fusion_discount: 1.0, ..OracleParams::default() };
        assert!(matches!(bad.validate(), Err(SynthError::BadParams(_))));
        let bad = OracleParams { peak_flops_per_s: 0.0, ..OracleParams::default() };
        assert!(matches!(bad.validate(), Err(SynthError::BadParams(_))));
    }

    #[test]
    fn config_feature_rows() {
        let p = SweepPoint {
            family: Family::T5Like,
            batch: 8,
            seq: 64,
            depth: 2,
            width: 256,
            workers: 1,
            optimizer: "adam",
        };
        let row = config_features(&p);
        assert_eq!(row.len(), 8);
        assert_eq!(row[5..], [1.0, 0.0, 0.0], "optimizer dummies, sgd as baseline");
        assert_eq!(row[4], 0.0, "log workers at N=1");
        assert!((row[0] - (8f64).ln()).abs() < 1e-15);
        assert!((row[1] - (64f64).ln()).abs() < 1e-15);
    }

    #[test]
    fn doptimal_selection_covers_grid_levels() {
        // Indicator-basis selection must not starve any axis level: every
        // batch/worker/optimizer level of the pool shows up in the subset.
        let grid = subsample_grid(&default_grid(Family::BertLike), 200, 8);
        let descriptors: Vec<Vec<f64>> = grid.iter().map(config_features).collect();
        let candidates =
            crate::design::indicator_rows(&descriptors, DESIGN_BINS, DESIGN_PAIRS).unwrap();
        let problem = DesignProblem::new(candidates, 40);
        let selection = fedorov_exchange_standardized(&problem, 4, 0).unwrap();
        for (axis, of) in [
            ("batch", &|p: &SweepPoint| p.batch as u64),
            ("seq", &|p: &SweepPoint| p.seq),
            ("width", &|p: &SweepPoint| p.width),
            ("workers", &|p: &SweepPoint| u64::from(p.workers)),
            ("depth", &|p: &SweepPoint| u64::from(p.depth)),
        ] as [(&str, &dyn Fn(&SweepPoint) -> u64); 5]
        {
            let pool: BTreeSet<u64> = grid.iter().map(of).collect();
            let picked: BTreeSet<u64> = selection.selected.iter().map(|&i| of(&grid[i])).collect();
            assert_eq!(pool, picked, "{axis} levels starved by selection");
        }
    }
}
