//! End-to-end epoch-time prediction for one workload: per-layer forest
//! predictions summed into a compute term, the ring all-reduce term, and the
//! refiner's scaling factors, against what the oracle actually measured.
//!
//! Run with `cargo run --example predict_epoch`.

use scaledl::layer_cost::ForestParams;
use scaledl::pipeline::{build_training_samples, predict_epoch, train_layer_models};
use scaledl::refiner::{train_gnn, TrainSettings};
use scaledl::synth::{
    collect_dataset, default_grid, subsample_grid, Family, OracleParams, Sampler,
};

fn main() {
    let params = OracleParams {
        fusion_discount: 0.3,
        congestion_base: 1.15,
        ..OracleParams::default()
    };

    // Train a small stack on 80 configurations of the family.
    let grid = subsample_grid(&default_grid(Family::Gpt2Like), 81, 2);
    let (target, train_grid) = grid.split_first().unwrap();
    let train_data = collect_dataset(train_grid, Sampler::Full, 0, 2, &params).unwrap();
    let forest = ForestParams { n_trees: 40, max_depth: 12, ..ForestParams::default() };
    let models = train_layer_models(&train_data, &forest, 2).unwrap();
    let samples = build_training_samples(&train_data, &models, false).unwrap();
    let (val, train) = samples.split_at(14);
    let settings = TrainSettings {
        epochs: 60,
        d_k: 8,
        n_heads: 2,
        enc_hidden: 16,
        enc_out: 16,
        head_hidden: 32,
        ..TrainSettings::default()
    };
    let gnn = train_gnn(train, val, &settings, 2).unwrap().model;

    // Predict a configuration the stack never saw.
    let measured = collect_dataset(&[*target], Sampler::Full, 0, 2, &params).unwrap();
    let sample = &measured[0];
    println!(
        "workload {} (batch={}, seq={}, workers={}, {})",
        sample.graph.name,
        target.batch,
        target.seq,
        target.workers,
        target.optimizer
    );

    let p = predict_epoch(&sample.graph, &sample.cfg, &models, Some(&gnn)).unwrap();
    println!("\n  compute term   t_sum  = {:.6} s", p.t_sum);
    println!("  all-reduce     t_comm = {:.6} s", p.t_comm);
    println!("  refiner        alpha  = {:.4}, beta = {:.4}", p.alpha, p.beta);
    println!("  iteration      t_iter = {:.6} s", p.t_iter);
    println!("  epoch          t_pred = {:.3} s ({} iterations)", p.t_pred, sample.cfg.iterations_per_epoch);

    let actual = sample.measured_epoch_s;
    println!(
        "\n  measured epoch   {:.3} s  ({:+.2}% error)",
        actual,
        100.0 * (p.t_pred - actual) / actual
    );
}
