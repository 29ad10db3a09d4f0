//! Trains the graph-attention refiner on top of fitted layer models.
//!
//! The oracle regime includes kernel fusion and congestion, which the plain
//! additive model cannot express; the refiner learns per-graph scaling
//! factors alpha (compute) and beta (communication) that close the gap. The
//! example prints the loss trajectory and the learned factors for a few
//! held-out workloads.
//!
//! Run with `cargo run --example train_refiner`.

use scaledl::layer_cost::ForestParams;
use scaledl::pipeline::{build_training_samples, train_layer_models};
use scaledl::refiner::{model_to_json, predict_scaling, train_gnn, TrainSettings};
use scaledl::synth::{
    collect_dataset, default_grid, subsample_grid, Family, OracleParams, Sampler,
};

fn main() {
    let params = OracleParams {
        fusion_discount: 0.3,
        congestion_base: 1.15,
        noise_sigma: 0.03,
        ..OracleParams::default()
    };
    let grid = subsample_grid(&default_grid(Family::DeitLike), 96, 4);
    let data = collect_dataset(&grid, Sampler::Full, 0, 4, &params).unwrap();

    let forest = ForestParams { n_trees: 40, max_depth: 12, ..ForestParams::default() };
    let models = train_layer_models(&data, &forest, 4).unwrap();

    let samples = build_training_samples(&data, &models, false).unwrap();
    let (val, train) = samples.split_at(16);
    let settings = TrainSettings {
        epochs: 80,
        d_k: 8,
        n_heads: 2,
        enc_hidden: 16,
        enc_out: 16,
        head_hidden: 32,
        ..TrainSettings::default()
    };
    println!("training on {} workloads, validating on {}", train.len(), val.len());
    let outcome = train_gnn(train, val, &settings, 4).unwrap();

    println!("\n{:<7} {:>12} {:>12} {:>10}", "epoch", "train loss", "val loss", "lr");
    for log in outcome.log.iter().step_by(10).chain(outcome.log.last()) {
        println!(
            "{:<7} {:>12.6} {:>12.6} {:>10.5}",
            log.epoch,
            log.train_loss,
            log.val_loss.unwrap_or(f64::NAN),
            log.learning_rate
        );
    }

    let out = std::path::Path::new("target/example-out/refiner.json");
    std::fs::create_dir_all(out.parent().unwrap()).unwrap();
    std::fs::write(out, model_to_json(&outcome.model)).unwrap();
    println!("\nsaved refiner to {}", out.display());

    println!("\nscaling factors on held-out workloads:");
    for s in val.iter().take(5) {
        let factors = predict_scaling(&outcome.model, &s.features).unwrap();
        let refined = factors.alpha * s.t_sum + factors.beta * s.t_comm;
        let additive = s.t_sum + s.t_comm;
        println!(
            "  alpha={:.3} beta={:.3}  additive {:.5}s -> refined {:.5}s (measured {:.5}s)",
            factors.alpha, factors.beta, additive, refined, s.t_iter
        );
    }
}
