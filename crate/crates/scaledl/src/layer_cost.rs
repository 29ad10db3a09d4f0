//! Per-layer-kind runtime regressors.
//!
//! One random forest is trained per layer kind (not per layer instance), so
//! a model trained on one architecture transfers to unseen architectures
//! built from the same kinds. Targets are layer times for one full training
//! iteration (forward + backward). Because times span orders of magnitude,
//! forests fit `ln(t)` and invert at prediction; predictions are clamped to
//! the training-target range and to a 1e-9 s floor.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::model_graph::{
    assemble_feature_vector, FeatureVector, GraphError, LayerKind, ModelGraph, RunConfig,
};

pub const MODEL_VERSION: u32 = 1;
pub const TIME_FLOOR_S: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LayerCostError {
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("sample {index} has kind {got}, expected {expected}")]
    MixedKind { index: usize, got: String, expected: String },
    #[error("sample {index} has {got} features, expected {expected}")]
    RaggedFeatures { index: usize, got: usize, expected: usize },
    #[error("sample {index}: measured time {value} must be positive and finite")]
    BadTarget { index: usize, value: f64 },
    #[error("sample {index}: non-finite feature value")]
    NonFiniteFeature { index: usize },
    #[error("feature vector has kind {got} and {got_len} values; model expects {expected} with {expected_len}")]
    SchemaMismatch { got: String, got_len: usize, expected: String, expected_len: usize },
    #[error("no model for layer kind {0}")]
    MissingModel(String),
    #[error("{0} must be >= 1")]
    ZeroParam(&'static str),
    #[error("model artifact version {0} is not supported (expected {MODEL_VERSION})")]
    WrongVersion(u32),
    #[error("malformed model artifact: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("malformed sample file: {0}")]
    Csv(#[from] csv::Error),
    #[error("sample file row {row}, column {col:?}: {value:?} is not a number")]
    BadNumber { row: usize, col: String, value: String },
    #[error("sample file is missing the measured_time_s column")]
    MissingTimeColumn,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// One training example: features of a layer under some config, plus its
/// measured per-iteration time in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSample {
    pub features: FeatureVector,
    pub measured_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Binary regression tree; node 0 is the root, `x[feature] <= threshold`
/// goes left. Leaves hold the mean of their training targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Features considered per split; `None` searches all of them, the
    /// usual regression-forest choice.
    pub features_per_split: Option<usize>,
    /// Worker threads for tree fitting; results are identical at any count.
    pub threads: usize,
    /// Optional feature column names stored in the artifact.
    pub feature_names: Vec<String>,
}

impl Default for ForestParams {
    fn default() -> ForestParams {
        ForestParams {
            n_trees: 100,
            max_depth: 12,
            min_samples_leaf: 2,
            features_per_split: None,
            threads: 1,
            feature_names: Vec::new(),
        }
    }
}

/// Trained per-kind forest. `trees` predict in ln-seconds; predictions are
/// mapped back through exp and clamped to `[target_min, target_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCostModel {
    pub version: u32,
    pub kind: LayerKind,
    pub feature_len: usize,
    pub feature_names: Vec<String>,
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
    pub target_min: f64,
    pub target_max: f64,
    pub trees: Vec<RegressionTree>,
}

struct SplitSearch<'a> {
    xs: &'a [&'a [f64]],
    ys: &'a [f64],
    max_depth: usize,
    min_samples_leaf: usize,
    mtry: usize,
}

impl SplitSearch<'_> {
    fn mean(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.ys[i]).sum::<f64>() / idx.len() as f64
    }

    /// Sum of squared errors around the mean, via sum and sum of squares.
    fn sse(sum: f64, sumsq: f64, n: f64) -> f64 {
        sumsq - sum * sum / n
    }

    fn grow(
        &self,
        nodes: &mut Vec<TreeNode>,
        idx: &mut Vec<usize>,
        depth: usize,
        rng: &mut ChaCha8Rng,
    ) -> usize {
        let node_id = nodes.len();
        nodes.push(TreeNode::Leaf { value: f64::NAN });
        let n = idx.len();
        let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
        for &i in idx.iter() {
            y_min = y_min.min(self.ys[i]);
            y_max = y_max.max(self.ys[i]);
        }
        let mut best: Option<(f64, usize, f64)> = None;
        if depth < self.max_depth && n >= 2 * self.min_samples_leaf && y_min < y_max {
            let d = self.xs[0].len();
            // Feature subsample for this split, scanned in ascending index
            // order so ties resolve to the lowest feature, lowest threshold.
            let features: Vec<usize> = if self.mtry < d {
                let mut picked = rand::seq::index::sample(rng, d, self.mtry).into_vec();
                picked.sort_unstable();
                picked
            } else {
                (0..d).collect()
            };
            let total_sum: f64 = idx.iter().map(|&i| self.ys[i]).sum();
            let total_sumsq: f64 = idx.iter().map(|&i| self.ys[i] * self.ys[i]).sum();
            let parent_sse = Self::sse(total_sum, total_sumsq, n as f64);
            let mut order = idx.clone();
            for f in features {
                order.sort_by(|&a, &b| self.xs[a][f].total_cmp(&self.xs[b][f]));
                let (mut sum_l, mut sumsq_l) = (0.0, 0.0);
                for p in 1..n {
                    let y = self.ys[order[p - 1]];
                    sum_l += y;
                    sumsq_l += y * y;
                    let (xl, xr) = (self.xs[order[p - 1]][f], self.xs[order[p]][f]);
                    if xl >= xr || p < self.min_samples_leaf || n - p < self.min_samples_leaf {
                        continue;
                    }
                    let reduction = parent_sse
                        - Self::sse(sum_l, sumsq_l, p as f64)
                        - Self::sse(total_sum - sum_l, total_sumsq - sumsq_l, (n - p) as f64);
                    if reduction > 0.0 && best.map_or(true, |(r, _, _)| reduction > r) {
                        best = Some((reduction, f, (xl + xr) / 2.0));
                    }
                }
            }
        }
        match best {
            None => {
                nodes[node_id] = TreeNode::Leaf { value: self.mean(idx) };
            }
            Some((_, feature, threshold)) => {
                let (mut left_idx, mut right_idx): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| self.xs[i][feature] <= threshold);
                let left = self.grow(nodes, &mut left_idx, depth + 1, rng);
                let right = self.grow(nodes, &mut right_idx, depth + 1, rng);
                nodes[node_id] = TreeNode::Split { feature, threshold, left, right };
            }
        }
        node_id
    }
}

impl RegressionTree {
    /// Deterministic fit using every feature at every split.
    pub fn fit(
        xs: &[Vec<f64>],
        ys: &[f64],
        max_depth: usize,
        min_samples_leaf: usize,
    ) -> Result<RegressionTree, LayerCostError> {
        if xs.len() < 2 || xs.len() != ys.len() {
            return Err(LayerCostError::TooFewSamples(xs.len().min(ys.len())));
        }
        let d = xs[0].len();
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        // The rng is never consulted when mtry covers every feature.
        let mut rng = crate::rng::stream(0, "unused-full-feature-fit");
        Ok(Self::fit_inner(&refs, ys, max_depth, min_samples_leaf, d, &mut rng))
    }

    fn fit_inner(
        xs: &[&[f64]],
        ys: &[f64],
        max_depth: usize,
        min_samples_leaf: usize,
        mtry: usize,
        rng: &mut ChaCha8Rng,
    ) -> RegressionTree {
        let search = SplitSearch { xs, ys, max_depth, min_samples_leaf, mtry };
        let mut nodes = Vec::new();
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        search.grow(&mut nodes, &mut idx, 0, rng);
        RegressionTree { nodes, max_depth, min_samples_leaf }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

fn validate_samples(samples: &[LayerSample]) -> Result<(LayerKind, usize), LayerCostError> {
    if samples.len() < 2 {
        return Err(LayerCostError::TooFewSamples(samples.len()));
    }
    let kind = samples[0].features.kind.clone();
    let len = samples[0].features.values.len();
    for (index, s) in samples.iter().enumerate() {
        if s.features.kind != kind {
            return Err(LayerCostError::MixedKind {
                index,
                got: s.features.kind.to_string(),
                expected: kind.to_string(),
            });
        }
        if s.features.values.len() != len {
            return Err(LayerCostError::RaggedFeatures {
                index,
                got: s.features.values.len(),
                expected: len,
            });
        }
        if s.features.values.iter().any(|v| !v.is_finite()) {
            return Err(LayerCostError::NonFiniteFeature { index });
        }
        if !s.measured_time.is_finite() || s.measured_time <= 0.0 {
            return Err(LayerCostError::BadTarget { index, value: s.measured_time });
        }
    }
    Ok((kind, len))
}

/// Fits `n_trees` trees, each on a seeded bootstrap resample, searching
/// [`ForestParams::features_per_split`] features per split (all by
/// default). Tree t draws all its randomness from the stream
/// (seed, "tree", t), so results are identical for any thread count.
pub fn fit_forest(
    samples: &[LayerSample],
    params: &ForestParams,
    seed: u64,
) -> Result<LayerCostModel, LayerCostError> {
    let (kind, feature_len) = validate_samples(samples)?;
    if params.n_trees < 1 {
        return Err(LayerCostError::ZeroParam("n_trees"));
    }
    if params.max_depth < 1 {
        return Err(LayerCostError::ZeroParam("max_depth"));
    }
    if params.min_samples_leaf < 1 {
        return Err(LayerCostError::ZeroParam("min_samples_leaf"));
    }
    let n = samples.len();
    let mtry = params.features_per_split.unwrap_or(feature_len).clamp(1, feature_len);
    let log_targets: Vec<f64> = samples.iter().map(|s| s.measured_time.ln()).collect();
    let fit_one = |t: usize| -> RegressionTree {
        let mut rng = crate::rng::indexed_stream(seed, "tree", t as u64);
        let boot: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        let xs: Vec<&[f64]> = boot.iter().map(|&i| samples[i].features.values.as_slice()).collect();
        let ys: Vec<f64> = boot.iter().map(|&i| log_targets[i]).collect();
        RegressionTree::fit_inner(&xs, &ys, params.max_depth, params.min_samples_leaf, mtry, &mut rng)
    };
    let trees: Vec<RegressionTree> = if params.threads > 1 {
        let threads = params.threads.min(params.n_trees);
        let mut slots: Vec<Option<RegressionTree>> = vec![None; params.n_trees];
        std::thread::scope(|scope| {
            let mut rest: &mut [Option<RegressionTree>] = &mut slots;
            let chunk = params.n_trees.div_ceil(threads);
            let mut start = 0usize;
            while !rest.is_empty() {
                let take = chunk.min(rest.len());
                let (head, tail) = rest.split_at_mut(take);
                rest = tail;
                let base = start;
                start += take;
                scope.spawn(move || {
                    for (offset, slot) in head.iter_mut().enumerate() {
                        *slot = Some(fit_one(base + offset));
                    }
                });
            }
        });
        slots.into_iter().map(|s| s.expect("every tree slot filled")).collect()
    } else {
        (0..params.n_trees).map(fit_one).collect()
    };
    let target_min = samples.iter().map(|s| s.measured_time).fold(f64::INFINITY, f64::min);
    let target_max = samples.iter().map(|s| s.measured_time).fold(0.0, f64::max);
    Ok(LayerCostModel {
        version: MODEL_VERSION,
        kind,
        feature_len,
        feature_names: params.feature_names.clone(),
        n_trees: params.n_trees,
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        seed,
        target_min,
        target_max,
        trees,
    })
}

/// Mean of per-tree ln-time predictions, inverted and clamped to the
/// training-target range (never below 1e-9 s).
pub fn predict_layer_time(model: &LayerCostModel, h: &FeatureVector) -> Result<f64, LayerCostError> {
    if h.kind != model.kind || h.values.len() != model.feature_len {
        return Err(LayerCostError::SchemaMismatch {
            got: h.kind.to_string(),
            got_len: h.values.len(),
            expected: model.kind.to_string(),
            expected_len: model.feature_len,
        });
    }
    let mean_log = model.trees.iter().map(|t| t.predict(&h.values)).sum::<f64>()
        / model.trees.len() as f64;
    let floor = model.target_min.max(TIME_FLOOR_S);
    let ceil = model.target_max.max(floor);
    Ok(mean_log.exp().clamp(floor, ceil))
}

/// Predicts every node's time and sums them. The per-node map iterates in
/// node-id order, and the sum follows that order, so the result does not
/// depend on node ordering in the graph file.
pub fn sum_layer_times(
    g: &ModelGraph,
    models: &BTreeMap<LayerKind, LayerCostModel>,
    cfg: &RunConfig,
) -> Result<(f64, BTreeMap<String, f64>), LayerCostError> {
    let mut per_node = BTreeMap::new();
    for node in &g.nodes {
        let model = models
            .get(&node.kind)
            .ok_or_else(|| LayerCostError::MissingModel(node.kind.to_string()))?;
        let h = assemble_feature_vector(node, cfg)?;
        per_node.insert(node.id.clone(), predict_layer_time(model, &h)?);
    }
    Ok((per_node.values().sum(), per_node))
}

pub fn model_to_json(model: &LayerCostModel) -> String {
    let mut out = serde_json::to_string(model).expect("model serialization cannot fail");
    out.push('\n');
    out
}

pub fn model_from_json(text: &str) -> Result<LayerCostModel, LayerCostError> {
    let model: LayerCostModel = serde_json::from_str(text)?;
    if model.version != MODEL_VERSION {
        return Err(LayerCostError::WrongVersion(model.version));
    }
    Ok(model)
}

/// CSV with the feature columns first and `measured_time_s` last.
pub fn samples_to_csv(names: &[String], samples: &[LayerSample]) -> String {
    let mut out = String::new();
    for name in names {
        out.push_str(name);
        out.push(',');
    }
    out.push_str("measured_time_s\n");
    for s in samples {
        for v in &s.features.values {
            out.push_str(&format!("{v}"));
            out.push(',');
        }
        out.push_str(&format!("{}\n", s.measured_time));
    }
    out
}

pub fn samples_from_csv(
    text: &str,
    kind: &LayerKind,
) -> Result<(Vec<String>, Vec<LayerSample>), LayerCostError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let time_col = headers
        .iter()
        .position(|h| h == "measured_time_s")
        .ok_or(LayerCostError::MissingTimeColumn)?;
    let names: Vec<String> =
        headers.iter().enumerate().filter(|&(i, _)| i != time_col).map(|(_, h)| h.clone()).collect();
    let mut samples = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let mut values = Vec::with_capacity(names.len());
        let mut time = None;
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| LayerCostError::BadNumber {
                row: r + 2,
                col: headers.get(c).cloned().unwrap_or_else(|| format!("#{c}")),
                value: field.to_string(),
            })?;
            if c == time_col {
                time = Some(v);
            } else {
                values.push(v);
            }
        }
        samples.push(LayerSample {
            features: FeatureVector { kind: kind.clone(), values },
            measured_time: time.ok_or(LayerCostError::MissingTimeColumn)?,
        });
    }
    Ok((names, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn sample(kind: LayerKind, values: Vec<f64>, t: f64) -> LayerSample {
        LayerSample { features: FeatureVector { kind, values }, measured_time: t }
    }

    fn linear_samples(n: usize, seed: u64) -> Vec<LayerSample> {
        // Roofline-shaped ground truth over three features.
        let mut rng = crate::rng::stream(seed, "layer-cost-data");
        (0..n)
            .map(|_| {
                let flops = 10f64.powf(rng.gen_range(6.0..11.0));
                let bytes = 10f64.powf(rng.gen_range(4.0..9.0));
                let batch = rng.gen_range(1..=64) as f64;
                let t = (flops / 5e13).max(bytes / 1e12) * (1.0 + 0.01 * batch.ln());
                sample(LayerKind::Linear, vec![batch, flops, bytes], t)
            })
            .collect()
    }

    #[test]
    fn constant_targets_predict_exactly() {
        let samples: Vec<LayerSample> = (0..10)
            .map(|i| sample(LayerKind::Linear, vec![i as f64, (i * i) as f64], 0.125))
            .collect();
        let model = fit_forest(&samples, &ForestParams::default(), 1).unwrap();
        for s in &samples {
            assert_eq!(predict_layer_time(&model, &s.features).unwrap(), 0.125);
        }
        let off_grid = FeatureVector { kind: LayerKind::Linear, values: vec![99.0, 3.0] };
        assert_eq!(predict_layer_time(&model, &off_grid).unwrap(), 0.125);
    }

    #[test]
    fn depth_one_tree_finds_the_gap_split() {
        let xs = vec![vec![0.0], vec![1.0], vec![10.0], vec![11.0]];
        let ys = vec![1.0, 1.0, 5.0, 5.0];
        let tree = RegressionTree::fit(&xs, &ys, 1, 1).unwrap();
        let TreeNode::Split { feature, threshold, left, right } = tree.nodes[0] else {
            panic!("expected a root split");
        };
        assert_eq!(feature, 0);
        assert!(threshold > 1.0 && threshold < 10.0, "threshold {threshold}");
        assert_eq!(tree.nodes[left], TreeNode::Leaf { value: 1.0 });
        assert_eq!(tree.nodes[right], TreeNode::Leaf { value: 5.0 });
        assert_eq!(tree.predict(&[0.0]), 1.0);
        assert_eq!(tree.predict(&[12.0]), 5.0);
    }

    #[test]
    fn forest_of_one_tree_recovers_the_two_level_target() {
        let samples = vec![
            sample(LayerKind::Linear, vec![0.0], 1.0),
            sample(LayerKind::Linear, vec![1.0], 1.0),
            sample(LayerKind::Linear, vec![10.0], 5.0),
            sample(LayerKind::Linear, vec![11.0], 5.0),
        ];
        let params = ForestParams { n_trees: 1, max_depth: 1, min_samples_leaf: 1, ..ForestParams::default() };
        // Pick a seed whose bootstrap keeps both target levels.
        for seed in 0..50 {
            let model = fit_forest(&samples, &params, seed).unwrap();
            let lo = predict_layer_time(&model, &samples[0].features).unwrap();
            let hi = predict_layer_time(&model, &samples[3].features).unwrap();
            if (lo - 1.0).abs() < 1e-12 && (hi - 5.0).abs() < 1e-12 {
                return;
            }
        }
        panic!("no bootstrap within 50 seeds kept both levels");
    }

    #[test]
    fn predictions_stay_in_the_training_hull() {
        let samples = linear_samples(200, 4);
        let model = fit_forest(&samples, &ForestParams::default(), 7).unwrap();
        let (lo, hi) = (model.target_min, model.target_max);
        let mut rng = crate::rng::stream(8, "hull-probe");
        for _ in 0..500 {
            let probe = FeatureVector {
                kind: LayerKind::Linear,
                values: vec![
                    rng.gen_range(-100.0..100.0),
                    10f64.powf(rng.gen_range(0.0..14.0)),
                    10f64.powf(rng.gen_range(0.0..14.0)),
                ],
            };
            let t = predict_layer_time(&model, &probe).unwrap();
            assert!(t >= lo && t <= hi, "{t} outside [{lo}, {hi}]");
            assert!(t >= TIME_FLOOR_S);
        }
    }

    #[test]
    fn held_out_accuracy_on_roofline_data() {
        let train = linear_samples(500, 10);
        let test = linear_samples(200, 11);
        let model = fit_forest(&train, &ForestParams::default(), 3).unwrap();
        let mean: f64 = test.iter().map(|s| s.measured_time).sum::<f64>() / test.len() as f64;
        let mut ss_res = 0.0;
        let mut ss_tot = 0.0;
        for s in &test {
            let p = predict_layer_time(&model, &s.features).unwrap();
            ss_res += (p - s.measured_time).powi(2);
            ss_tot += (s.measured_time - mean).powi(2);
        }
        let r2 = 1.0 - ss_res / ss_tot;
        assert!(r2 >= 0.9, "held-out R^2 = {r2:.4}");
    }

    #[test]
    fn averaged_prediction_monotone_in_flops() {
        let train = linear_samples(600, 12);
        let model = fit_forest(&train, &ForestParams::default(), 5).unwrap();
        let levels: Vec<f64> = (0..12).map(|i| 10f64.powf(6.5 + 0.35 * i as f64)).collect();
        let mut rng = crate::rng::stream(13, "mono-base");
        let bases: Vec<(f64, f64)> =
            (0..40).map(|_| (rng.gen_range(1..=64) as f64, 10f64.powf(rng.gen_range(4.0..6.0)))).collect();
        let mut prev = 0.0;
        for &flops in &levels {
            let mut acc = 0.0;
            for &(batch, bytes) in &bases {
                let fv = FeatureVector { kind: LayerKind::Linear, values: vec![batch, flops, bytes] };
                acc += predict_layer_time(&model, &fv).unwrap();
            }
            let avg = acc / bases.len() as f64;
            assert!(avg >= prev - 1e-15, "average dipped: {avg} < {prev} at flops {flops:.3e}");
            prev = avg;
        }
    }

    #[test]
    fn tree_predictions_match_recursive_oracle() {
        fn walk(tree: &RegressionTree, at: usize, x: &[f64]) -> f64 {
            match &tree.nodes[at] {
                TreeNode::Leaf { value } => *value,
                TreeNode::Split { feature, threshold, left, right } => {
                    if x[*feature] <= *threshold {
                        walk(tree, *left, x)
                    } else {
                        walk(tree, *right, x)
                    }
                }
            }
        }
        let train = linear_samples(300, 20);
        let model = fit_forest(&train, &ForestParams { n_trees: 5, ..ForestParams::default() }, 21).unwrap();
        let mut rng = crate::rng::stream(22, "oracle-probe");
        for _ in 0..1000 {
            let x = vec![
                rng.gen_range(0.0..70.0),
                10f64.powf(rng.gen_range(5.0..12.0)),
                10f64.powf(rng.gen_range(3.0..10.0)),
            ];
            for tree in &model.trees {
                assert_eq!(tree.predict(&x), walk(tree, 0, &x));
            }
        }
    }

    #[test]
    fn fit_is_deterministic_and_thread_count_invariant() {
        let samples = linear_samples(150, 30);
        let a = fit_forest(&samples, &ForestParams::default(), 9).unwrap();
        let b = fit_forest(&samples, &ForestParams::default(), 9).unwrap();
        assert_eq!(model_to_json(&a), model_to_json(&b));
        let threaded = fit_forest(
            &samples,
            &ForestParams { threads: 4, ..ForestParams::default() },
            9,
        )
        .unwrap();
        assert_eq!(model_to_json(&a), model_to_json(&threaded));
        let other_seed = fit_forest(&samples, &ForestParams::default(), 10).unwrap();
        assert_ne!(model_to_json(&a), model_to_json(&other_seed));
    }

    #[test]
    fn validation_errors() {
        let one = vec![sample(LayerKind::Linear, vec![1.0], 1.0)];
        assert!(matches!(
            fit_forest(&one, &ForestParams::default(), 0),
            Err(LayerCostError::TooFewSamples(1))
        ));
        let mixed = vec![
            sample(LayerKind::Linear, vec![1.0], 1.0),
            sample(LayerKind::Attention, vec![1.0], 1.0),
        ];
        assert!(matches!(
            fit_forest(&mixed, &ForestParams::default(), 0),
            Err(LayerCostError::MixedKind { index: 1, .. })
        ));
        let bad_time = vec![
            sample(LayerKind::Linear, vec![1.0], 1.0),
            sample(LayerKind::Linear, vec![2.0], -0.5),
        ];
        assert!(matches!(
            fit_forest(&bad_time, &ForestParams::default(), 0),
            Err(LayerCostError::BadTarget { index: 1, .. })
        ));
        let ok = fit_forest(&linear_samples(10, 40), &ForestParams::default(), 0).unwrap();
        let wrong = FeatureVector { kind: LayerKind::Attention, values: vec![1.0, 2.0, 3.0] };
        assert!(matches!(
            predict_layer_time(&ok, &wrong),
            Err(LayerCostError::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn artifact_round_trip_and_version_gate() {
        let model = fit_forest(&linear_samples(50, 50), &ForestParams::default(), 17).unwrap();
        let text = model_to_json(&model);
        let back = model_from_json(&text).unwrap();
        assert_eq!(back, model);
        let stale = text.replace("\"version\":1", "\"version\":99");
        assert!(matches!(model_from_json(&stale), Err(LayerCostError::WrongVersion(99))));
    }

    #[test]
    fn sample_csv_round_trip() {
        let names = vec!["hp_batch_size".to_string(), "cm_flops".to_string()];
        let samples = vec![
            sample(LayerKind::Linear, vec![8.0, 1e9], 0.002),
            sample(LayerKind::Linear, vec![16.0, 2e9], 0.004),
        ];
        let text = samples_to_csv(&names, &samples);
        let (back_names, back) = samples_from_csv(&text, &LayerKind::Linear).unwrap();
        assert_eq!(back_names, names);
        assert_eq!(back, samples);
        assert!(matches!(
            samples_from_csv("a,b\n1,2\n", &LayerKind::Linear),
            Err(LayerCostError::MissingTimeColumn)
        ));
    }

    #[test]
    fn sum_layer_times_matches_per_node_map() {
        use crate::comm::CommConfig;
        use crate::model_graph::LayerNode;
        let cfg = RunConfig {
            hp: [("batch_size".to_string(), 8.0)].into(),
            optimizer: "sgd".into(),
            dev: [("peak_flops".to_string(), 5e13)].into(),
            iterations_per_epoch: 4,
            bytes_per_elem: 4,
            comm: CommConfig { n_workers: 1, payload_bits: None, bandwidth_bps: 1e9, latency_s: 0.0 },
        };
        let nodes: Vec<LayerNode> = (0..10)
            .map(|i| LayerNode {
                id: format!("act{i}"),
                kind: LayerKind::Activation,
                dims: [("elements".to_string(), (i + 1) as u64 * 1000)].into(),
            })
            .collect();
        let g = ModelGraph { name: "acts".into(), nodes, edges: vec![] };
        // Train an Activation model whose features match the graph layout.
        let mut train = Vec::new();
        let mut rng = crate::rng::stream(60, "sum-train");
        for _ in 0..100 {
            let elements = rng.gen_range(500u64..=12000) as f64;
            let node = LayerNode {
                id: "a".into(),
                kind: LayerKind::Activation,
                dims: [("elements".to_string(), elements as u64)].into(),
            };
            let fv = assemble_feature_vector(&node, &cfg).unwrap();
            train.push(LayerSample { features: fv, measured_time: elements * 1e-9 });
        }
        let model = fit_forest(&train, &ForestParams::default(), 2).unwrap();
        let models: BTreeMap<LayerKind, LayerCostModel> =
            [(LayerKind::Activation, model)].into();
        let (total, per_node) = sum_layer_times(&g, &models, &cfg).unwrap();
        assert_eq!(per_node.len(), 10);
        let check: f64 = per_node.values().sum();
        assert!((total - check).abs() <= 1e-12);

        let empty = ModelGraph { name: "none".into(), nodes: vec![], edges: vec![] };
        let (zero, map) = sum_layer_times(&empty, &models, &cfg).unwrap();
        assert_eq!(zero, 0.0);
        assert!(map.is_empty());

        let missing = ModelGraph {
            name: "m".into(),
            nodes: vec![LayerNode {
                id: "fc".into(),
                kind: LayerKind::Linear,
                dims: [("d_in".to_string(), 2), ("d_out".to_string(), 2)].into(),
            }],
            edges: vec![],
        };
        assert!(matches!(
            sum_layer_times(&missing, &models, &cfg),
            Err(LayerCostError::MissingModel(_))
        ));
    }
}
