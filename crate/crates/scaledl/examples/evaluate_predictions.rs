//! Scores a batch of epoch-time predictions against measurements: mean
//! relative error, RMSE, and the per-sample error distribution.
//!
//! Run with `cargo run --example evaluate_predictions`.

use scaledl::layer_cost::ForestParams;
use scaledl::pipeline::{evaluate, predict_epoch, train_layer_models};
use scaledl::synth::{
    collect_dataset, default_grid, subsample_grid, Family, OracleParams, Sampler,
};

fn main() {
    let params = OracleParams::default();
    let grid = subsample_grid(&default_grid(Family::BertLike), 90, 6);
    let data = collect_dataset(&grid, Sampler::Full, 0, 6, &params).unwrap();
    let (test, train) = data.split_at(18);

    let forest = ForestParams { n_trees: 40, max_depth: 12, ..ForestParams::default() };
    let models = train_layer_models(train, &forest, 6).unwrap();

    let mut predictions = Vec::with_capacity(test.len());
    let mut actuals = Vec::with_capacity(test.len());
    for s in test {
        let p = predict_epoch(&s.graph, &s.cfg, &models, None).unwrap();
        predictions.push(p.t_pred);
        actuals.push(s.measured_epoch_s);
    }

    let report = evaluate(&predictions, &actuals).unwrap();
    println!("{} held-out workloads", report.n);
    println!("  MRE  {:.3}%", report.mre_pct);
    println!("  RMSE {:.4} s", report.rmse);

    let mut sorted = report.per_sample_abs_pct_error.clone();
    sorted.sort_by(f64::total_cmp);
    println!("\nerror distribution:");
    for (label, q) in [("p25", 0.25), ("p50", 0.50), ("p75", 0.75), ("p90", 0.90)] {
        let idx = ((sorted.len() as f64 * q) as usize).min(sorted.len() - 1);
        println!("  {label}  {:.3}%", sorted[idx]);
    }
    println!("  max  {:.3}%", sorted.last().unwrap());
}
