//! Fits one random-forest cost model per layer kind and reports held-out
//! per-layer error, grouped by kind. Models are saved in the same per-kind
//! JSON layout the CLI uses.
//!
//! Run with `cargo run --example train_layer_models`.

use std::collections::BTreeMap;

use scaledl::layer_cost::ForestParams;
use scaledl::model_graph::LayerKind;
use scaledl::pipeline::{predict_with_layer_times, save_layer_models, train_layer_models};
use scaledl::synth::{
    collect_dataset, default_grid, subsample_grid, Family, OracleParams, Sampler, WorkloadSample,
};

fn main() {
    let params = OracleParams::default();
    let grid = subsample_grid(&default_grid(Family::T5Like), 72, 3);
    let data = collect_dataset(&grid, Sampler::Full, 0, 3, &params).unwrap();
    let (test, train) = data.split_at(12);

    let forest = ForestParams { n_trees: 40, max_depth: 12, ..ForestParams::default() };
    let models = train_layer_models(train, &forest, 3).unwrap();
    println!("fitted {} kind models from {} workloads", models.len(), train.len());

    let out = std::path::Path::new("target/example-out/layer-models");
    save_layer_models(&models, out).unwrap();
    println!("saved to {}/<kind>.json", out.display());

    // Held-out check: predicted per-node times against the oracle's
    // noise-free per-layer times, aggregated by layer kind.
    let mut abs_err: BTreeMap<LayerKind, (f64, usize)> = BTreeMap::new();
    let mut actual_sum: BTreeMap<LayerKind, f64> = BTreeMap::new();
    for s in test {
        let kinds: BTreeMap<&str, &LayerKind> =
            s.graph.nodes.iter().map(|n| (n.id.as_str(), &n.kind)).collect();
        let (_, predicted) =
            predict_with_layer_times(&s.graph, &s.cfg, &models, None, false).unwrap();
        for (node, t_pred) in &predicted {
            let t_true = per_layer_time(s, node);
            let kind = (*kinds[node.as_str()]).clone();
            let entry = abs_err.entry(kind.clone()).or_insert((0.0, 0));
            entry.0 += (t_pred - t_true).abs();
            entry.1 += 1;
            *actual_sum.entry(kind).or_default() += t_true;
        }
    }
    println!("\nheld-out per-layer error over {} workloads:", test.len());
    println!("  {:<12} {:>7} {:>14} {:>12}", "kind", "layers", "mean abs err", "rel to mean");
    for (kind, (err, n)) in &abs_err {
        let mean_err = err / *n as f64;
        let mean_actual = actual_sum[kind] / *n as f64;
        println!(
            "  {:<12} {:>7} {:>12.3}us {:>11.2}%",
            kind.as_str(),
            n,
            mean_err * 1e6,
            100.0 * mean_err / mean_actual
        );
    }
}

fn per_layer_time(s: &WorkloadSample, node: &str) -> f64 {
    *s.per_layer_times.get(node).expect("oracle datasets instrument every layer")
}
