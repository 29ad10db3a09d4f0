//! End-to-end prediction pipeline and evaluation harness.
//!
//! A full prediction runs four stages: (1) decompose the graph and sum
//! per-layer cost model outputs into `T_sum`, (2) evaluate the ring
//! all-reduce model into `T_comm`, (3) refine with the graph attention
//! network into alpha and beta, and finally `T_iter = alpha*T_sum +
//! beta*T_comm`, `T_pred = I * T_iter`. The module also owns dataset
//! splitting (in-distribution and held-out-family), error metrics, budgeted
//! benchmark selection, and the ablation variants used to attribute
//! prediction quality to individual components.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

use crate::comm::{allreduce_time, gradient_payload_bits, CommError};
use crate::design::{fedorov_exchange_standardized, indicator_rows, DesignError, DesignProblem};
use crate::layer_cost::{
    fit_forest, model_from_json as layer_model_from_json, model_to_json as layer_model_to_json,
    sum_layer_times, ForestParams, LayerCostError, LayerCostModel, LayerSample,
};
use crate::model_graph::{
    assemble_feature_vector, compute_layer_cm, feature_names, GraphError, LayerKind, ModelGraph,
    RunConfig,
};
use crate::refiner::{
    build_gnn_inputs, model_from_json as gnn_from_json, model_to_json as gnn_to_json,
    predict_scaling, train_gnn, GnnModel, RefinerError, ScalingFactors, TrainSample,
    TrainSettings,
};
use crate::synth::WorkloadSample;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage 1 (per-layer cost): {0}")]
    Stage1(#[from] LayerCostError),
    #[error("stage 1 (graph decomposition): {0}")]
    Stage1Graph(#[from] GraphError),
    #[error("stage 2 (communication): {0}")]
    Stage2(#[from] CommError),
    #[error("stage 3 (graph refinement): {0}")]
    Stage3(#[from] RefinerError),
    #[error("evaluation input lengths differ: {predictions} predictions vs {actuals} actuals")]
    LengthMismatch { predictions: usize, actuals: usize },
    #[error("evaluation inputs are empty")]
    EmptyEval,
    #[error("actual value at index {0} must be positive and finite")]
    NonPositiveActual(usize),
    #[error("family {0:?} not present in the dataset")]
    MissingFamily(String),
    #[error("held-out-family split needs at least two families")]
    SingleFamily,
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("benchmark selection: {0}")]
    Design(#[from] DesignError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// One full prediction. `t_iter = alpha*t_sum + beta*t_comm` and
/// `t_pred = iterations * t_iter` hold exactly by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub t_sum: f64,
    pub t_comm: f64,
    pub alpha: f64,
    pub beta: f64,
    pub t_iter: f64,
    pub t_pred: f64,
}

/// Per-layer cost models keyed by layer kind, plus the optional refiner.
/// `gnn: None` is the plain additive predictor (alpha = beta = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedStack {
    pub layer_models: BTreeMap<LayerKind, LayerCostModel>,
    pub gnn: Option<GnnModel>,
}

/// Runs all stages and also returns the per-node predicted times feeding
/// stage 3. `zero_comm` forces the communication term to zero (the no_comm
/// ablation); everything else is unchanged.
pub fn predict_with_layer_times(
    g: &ModelGraph,
    cfg: &RunConfig,
    models: &BTreeMap<LayerKind, LayerCostModel>,
    gnn: Option<&GnnModel>,
    zero_comm: bool,
) -> Result<(Prediction, BTreeMap<String, f64>), PipelineError> {
    cfg.validate()?;
    let (t_sum, layer_times) = sum_layer_times(g, models, cfg)?;
    let t_comm = if zero_comm {
        0.0
    } else {
        let payload = match cfg.comm.payload_bits {
            Some(bits) => bits,
            None => gradient_payload_bits(g, 32)?,
        };
        allreduce_time(&cfg.comm.with_payload(payload))?
    };
    let scaling = match gnn {
        Some(model) => {
            let features = build_gnn_inputs(g, cfg, &layer_times)?;
            predict_scaling(model, &features)?
        }
        None => ScalingFactors { alpha: 1.0, beta: 1.0 },
    };
    let t_iter = scaling.alpha * t_sum + scaling.beta * t_comm;
    let t_pred = cfg.iterations_per_epoch as f64 * t_iter;
    Ok((
        Prediction { t_sum, t_comm, alpha: scaling.alpha, beta: scaling.beta, t_iter, t_pred },
        layer_times,
    ))
}

/// Predicts the per-epoch runtime of one workload.
pub fn predict_epoch(
    g: &ModelGraph,
    cfg: &RunConfig,
    models: &BTreeMap<LayerKind, LayerCostModel>,
    gnn: Option<&GnnModel>,
) -> Result<Prediction, PipelineError> {
    predict_with_layer_times(g, cfg, models, gnn, false).map(|(p, _)| p)
}

/// Error metrics over a prediction batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean relative error, percent.
    pub mre_pct: f64,
    /// Root mean squared error, same units as the targets.
    pub rmse: f64,
    pub n: usize,
    /// Per-sample |actual - pred| / actual * 100, in input order (CDF data).
    pub per_sample_abs_pct_error: Vec<f64>,
}

pub fn evaluate(predictions: &[f64], actuals: &[f64]) -> Result<EvalReport, PipelineError> {
    if predictions.len() != actuals.len() {
        return Err(PipelineError::LengthMismatch {
            predictions: predictions.len(),
            actuals: actuals.len(),
        });
    }
    if predictions.is_empty() {
        return Err(PipelineError::EmptyEval);
    }
    for (i, &a) in actuals.iter().enumerate() {
        if !(a > 0.0 && a.is_finite()) {
            return Err(PipelineError::NonPositiveActual(i));
        }
    }
    let per_sample_abs_pct_error: Vec<f64> = predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| (a - p).abs() / a * 100.0)
        .collect();
    let n = predictions.len();
    let mre_pct = per_sample_abs_pct_error.iter().sum::<f64>() / n as f64;
    let rmse = (predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| (a - p) * (a - p))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Ok(EvalReport { mre_pct, rmse, n, per_sample_abs_pct_error })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    Id,
    Ood,
}

/// In-distribution: seeded 80/20 split within the target family. Held-out:
/// train on every other family, test on the target family only.
pub fn split_id_ood(
    dataset: &[WorkloadSample],
    target: &str,
    mode: SplitMode,
    seed: u64,
) -> Result<(Vec<WorkloadSample>, Vec<WorkloadSample>), PipelineError> {
    if !dataset.iter().any(|s| s.family == target) {
        return Err(PipelineError::MissingFamily(target.to_string()));
    }
    match mode {
        SplitMode::Id => {
            let pool: Vec<&WorkloadSample> =
                dataset.iter().filter(|s| s.family == target).collect();
            if pool.len() < 2 {
                return Err(PipelineError::Dataset(format!(
                    "family {target:?} has {} samples; an 80/20 split needs at least 2",
                    pool.len()
                )));
            }
            let mut order: Vec<usize> = (0..pool.len()).collect();
            order.shuffle(&mut crate::rng::stream(seed, "id-split"));
            let n_test = (pool.len() / 5).max(1);
            let test = order[..n_test].iter().map(|&i| pool[i].clone()).collect();
            let train = order[n_test..].iter().map(|&i| pool[i].clone()).collect();
            Ok((train, test))
        }
        SplitMode::Ood => {
            if !dataset.iter().any(|s| s.family != target) {
                return Err(PipelineError::SingleFamily);
            }
            let train = dataset.iter().filter(|s| s.family != target).cloned().collect();
            let test = dataset.iter().filter(|s| s.family == target).cloned().collect();
            Ok((train, test))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    Full,
    NoComm,
    NoMlp,
    RandomSampling,
    NoGnn,
}

pub const ABLATION_VARIANTS: [AblationVariant; 5] = [
    AblationVariant::Full,
    AblationVariant::NoComm,
    AblationVariant::NoMlp,
    AblationVariant::RandomSampling,
    AblationVariant::NoGnn,
];

impl AblationVariant {
    pub fn tag(&self) -> &'static str {
        match self {
            AblationVariant::Full => "full",
            AblationVariant::NoComm => "no_comm",
            AblationVariant::NoMlp => "no_mlp",
            AblationVariant::RandomSampling => "random_sampling",
            AblationVariant::NoGnn => "no_gnn",
        }
    }

    pub fn from_tag(tag: &str) -> Result<AblationVariant, PipelineError> {
        ABLATION_VARIANTS
            .iter()
            .copied()
            .find(|v| v.tag() == tag)
            .ok_or_else(|| PipelineError::Dataset(format!("unknown ablation variant {tag:?}")))
    }
}

impl std::fmt::Display for AblationVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Knobs for the training side of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSettings {
    /// Held-out fraction for the internal ablation split.
    pub test_fraction: f64,
    pub forest: ForestParams,
    pub gnn: TrainSettings,
    /// Exchange restarts for budgeted selection.
    pub design_restarts: usize,
}

impl Default for PipelineSettings {
    fn default() -> PipelineSettings {
        PipelineSettings {
            test_fraction: 0.2,
            forest: ForestParams::default(),
            gnn: TrainSettings::default(),
            design_restarts: 4,
        }
    }
}

/// Flattens instrumented workloads into per-kind layer training samples.
pub fn layer_samples_by_kind(
    samples: &[WorkloadSample],
) -> Result<BTreeMap<LayerKind, Vec<LayerSample>>, PipelineError> {
    let mut by_kind: BTreeMap<LayerKind, Vec<LayerSample>> = BTreeMap::new();
    for s in samples {
        for node in &s.graph.nodes {
            let t = *s.per_layer_times.get(&node.id).ok_or_else(|| {
                PipelineError::Dataset(format!(
                    "sample {:?} lacks a per-layer time for node {:?}; layer training needs \
                     instrumented data",
                    s.graph.name, node.id
                ))
            })?;
            let features = assemble_feature_vector(node, &s.cfg)?;
            by_kind
                .entry(node.kind.clone())
                .or_default()
                .push(LayerSample { features, measured_time: t });
        }
    }
    Ok(by_kind)
}

/// Fits one cost model per layer kind present in the samples.
pub fn train_layer_models(
    samples: &[WorkloadSample],
    forest: &ForestParams,
    seed: u64,
) -> Result<BTreeMap<LayerKind, LayerCostModel>, PipelineError> {
    if samples.is_empty() {
        return Err(PipelineError::Dataset("no training samples".into()));
    }
    let by_kind = layer_samples_by_kind(samples)?;
    let mut models = BTreeMap::new();
    for (kind, kind_samples) in by_kind {
        let mut params = forest.clone();
        params.feature_names = feature_names(&kind, &samples[0].cfg);
        let kind_seed = crate::rng::fingerprint(&format!("layer-model|{kind}|{seed}"));
        models.insert(kind.clone(), fit_forest(&kind_samples, &params, kind_seed)?);
    }
    Ok(models)
}

/// Builds refiner training samples: the node-time features come from the
/// trained per-layer models (matching what prediction will see), the target
/// is the measured iteration time.
pub fn build_training_samples(
    samples: &[WorkloadSample],
    models: &BTreeMap<LayerKind, LayerCostModel>,
    zero_comm: bool,
) -> Result<Vec<TrainSample>, PipelineError> {
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        let (t_sum, layer_times) = sum_layer_times(&s.graph, models, &s.cfg)?;
        let t_comm = if zero_comm {
            0.0
        } else {
            let payload = match s.cfg.comm.payload_bits {
                Some(bits) => bits,
                None => gradient_payload_bits(&s.graph, 32)?,
            };
            allreduce_time(&s.cfg.comm.with_payload(payload))?
        };
        let features = build_gnn_inputs(&s.graph, &s.cfg, &layer_times)?;
        out.push(TrainSample { features, t_sum, t_comm, t_iter: s.measured_iter_s });
    }
    Ok(out)
}

/// Descriptor row for budgeted selection over arbitrary workloads: log
/// batch/workers/FLOPs/params/node-count plus dummy-coded optimizer
/// indicators with "sgd" as the reference category (8 columns).
/// [`select_budget`] expands these into bin indicators before running the
/// exchange; see [`indicator_rows`] for why that basis suits forests.
pub fn sample_design_features(s: &WorkloadSample) -> Result<Vec<f64>, PipelineError> {
    let mut flops = 0.0f64;
    let mut params = 0.0f64;
    for node in &s.graph.nodes {
        let cm = compute_layer_cm(node, &s.cfg)?;
        flops += cm.flops as f64;
        params += cm.params as f64;
    }
    let mut row = vec![
        (s.cfg.batch_size()? as f64).ln(),
        f64::from(s.cfg.comm.n_workers).ln(),
        flops.ln_1p(),
        params.ln_1p(),
        (s.graph.nodes.len() as f64).ln(),
    ];
    row.extend(crate::refiner::optimizer_one_hot(&s.cfg.optimizer)[1..].iter().copied());
    Ok(row)
}

/// Picks `budget` training workloads from the pool: information-optimal by
/// default, seeded uniform when `random`. A budget covering the whole pool
/// returns every index. Indices come back sorted.
pub fn select_budget(
    pool: &[WorkloadSample],
    budget: usize,
    random: bool,
    restarts: usize,
    seed: u64,
) -> Result<Vec<usize>, PipelineError> {
    if budget == 0 {
        return Err(PipelineError::Dataset("selection budget must be >= 1".into()));
    }
    if budget >= pool.len() {
        return Ok((0..pool.len()).collect());
    }
    if random {
        let mut rng = crate::rng::stream(seed, "ablation-random");
        let mut picked = rand::seq::index::sample(&mut rng, pool.len(), budget).into_vec();
        picked.sort_unstable();
        return Ok(picked);
    }
    let descriptors: Vec<Vec<f64>> =
        pool.iter().map(sample_design_features).collect::<Result<_, _>>()?;
    // Joint terms: batch x workers (the congestion surface) and
    // batch x FLOPs (the compute cells the per-layer regressors key on).
    let candidates =
        indicator_rows(&descriptors, crate::synth::DESIGN_BINS, &[(0, 1), (0, 2)])?;
    let problem = DesignProblem::new(candidates, budget);
    let mut selected = fedorov_exchange_standardized(&problem, restarts, seed)?.selected;
    selected.sort_unstable();
    Ok(selected)
}

/// Trains the layer models and (variant permitting) the refiner on a
/// budgeted subset of the pool.
pub fn train_stack(
    pool: &[WorkloadSample],
    variant: AblationVariant,
    budget: usize,
    seed: u64,
    settings: &PipelineSettings,
) -> Result<TrainedStack, PipelineError> {
    let random = variant == AblationVariant::RandomSampling;
    let selected = select_budget(pool, budget, random, settings.design_restarts, seed)?;
    let chosen: Vec<WorkloadSample> = selected.iter().map(|&i| pool[i].clone()).collect();
    let layer_models = train_layer_models(&chosen, &settings.forest, seed)?;
    let gnn = if variant == AblationVariant::NoGnn {
        None
    } else {
        let zero_comm = variant == AblationVariant::NoComm;
        let train = build_training_samples(&chosen, &layer_models, zero_comm)?;
        let mut gnn_settings = settings.gnn.clone();
        if variant == AblationVariant::NoMlp {
            gnn_settings.use_global_encoder = false;
        }
        Some(train_gnn(&train, &[], &gnn_settings, seed)?.model)
    };
    Ok(TrainedStack { layer_models, gnn })
}

/// Epoch-time error report of a trained stack over held-out workloads.
pub fn evaluate_stack(
    stack: &TrainedStack,
    test: &[WorkloadSample],
    zero_comm: bool,
) -> Result<EvalReport, PipelineError> {
    let mut predictions = Vec::with_capacity(test.len());
    let mut actuals = Vec::with_capacity(test.len());
    for s in test {
        let (p, _) = predict_with_layer_times(
            &s.graph,
            &s.cfg,
            &stack.layer_models,
            stack.gnn.as_ref(),
            zero_comm,
        )?;
        predictions.push(p.t_pred);
        actuals.push(s.measured_epoch_s);
    }
    evaluate(&predictions, &actuals)
}

/// Full ablation experiment: seeded 80/20 split of the dataset, budgeted
/// selection from the training side, variant-specific training, evaluation
/// on the held-out side.
pub fn run_ablation(
    variant: AblationVariant,
    dataset: &[WorkloadSample],
    budget: usize,
    seed: u64,
    settings: &PipelineSettings,
) -> Result<EvalReport, PipelineError> {
    if dataset.len() < 5 {
        return Err(PipelineError::Dataset(format!(
            "ablation needs at least 5 samples, got {}",
            dataset.len()
        )));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut crate::rng::stream(seed, "ablation-split"));
    let n_test = ((dataset.len() as f64 * settings.test_fraction).round() as usize)
        .clamp(1, dataset.len() - 1);
    let test: Vec<WorkloadSample> = order[..n_test].iter().map(|&i| dataset[i].clone()).collect();
    let pool: Vec<WorkloadSample> = order[n_test..].iter().map(|&i| dataset[i].clone()).collect();
    let stack = train_stack(&pool, variant, budget, seed, settings)?;
    evaluate_stack(&stack, &test, variant == AblationVariant::NoComm)
}

fn kind_file_name(kind: &LayerKind) -> String {
    kind.as_str().replace(':', "_")
}

/// Reserved file name for the refiner artifact; never used for a layer model.
pub const GNN_FILE: &str = "gnn.json";

/// Writes one `<kind>.json` per layer kind directly into `dir`.
pub fn save_layer_models(
    models: &BTreeMap<LayerKind, LayerCostModel>,
    dir: &Path,
) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir)?;
    for (kind, model) in models {
        let path = dir.join(format!("{}.json", kind_file_name(kind)));
        std::fs::write(path, layer_model_to_json(model))?;
    }
    Ok(())
}

/// Loads every `*.json` layer model from `dir` (skipping [`GNN_FILE`]).
pub fn load_layer_models(
    dir: &Path,
) -> Result<BTreeMap<LayerKind, LayerCostModel>, PipelineError> {
    let entries = std::fs::read_dir(dir)
        .map_err(|e| PipelineError::Dataset(format!("layer model directory {dir:?}: {e}")))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && p.file_name().is_some_and(|n| n != GNN_FILE)
        })
        .collect();
    paths.sort();
    let mut layer_models = BTreeMap::new();
    for path in paths {
        let model = layer_model_from_json(&std::fs::read_to_string(&path)?)?;
        layer_models.insert(model.kind.clone(), model);
    }
    if layer_models.is_empty() {
        return Err(PipelineError::Dataset(format!("no layer models found in {dir:?}")));
    }
    Ok(layer_models)
}

/// Writes the per-kind layer models and, when present, the refiner as
/// `gnn.json`, all flat in `dir`.
pub fn save_stack(stack: &TrainedStack, dir: &Path) -> Result<(), PipelineError> {
    save_layer_models(&stack.layer_models, dir)?;
    if let Some(gnn) = &stack.gnn {
        std::fs::write(dir.join(GNN_FILE), gnn_to_json(gnn))?;
    }
    Ok(())
}

/// Loads a stack written by [`save_stack`]. A missing `gnn.json` yields the
/// additive predictor.
pub fn load_stack(dir: &Path) -> Result<TrainedStack, PipelineError> {
    let layer_models = load_layer_models(dir)?;
    let gnn_path = dir.join(GNN_FILE);
    let gnn = if gnn_path.exists() {
        Some(gnn_from_json(&std::fs::read_to_string(&gnn_path)?)?)
    } else {
        None
    };
    Ok(TrainedStack { layer_models, gnn })
}
