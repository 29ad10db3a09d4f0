//! Runs every ablation variant over one dataset and prints the accuracy each
//! component buys: the full pipeline, then versions without the
//! communication term, without the global-context encoder, with random
//! instead of information-optimal sampling, and without the refiner.
//!
//! Run with `cargo run --example ablation_study`.

use scaledl::layer_cost::ForestParams;
use scaledl::pipeline::{run_ablation, PipelineSettings, ABLATION_VARIANTS};
use scaledl::refiner::TrainSettings;
use scaledl::synth::{
    collect_dataset, default_grid, subsample_grid, Family, OracleParams, Sampler,
};

fn main() {
    // Interactions on, and at least four workers so the all-reduce term
    // carries weight.
    let params = OracleParams {
        fusion_discount: 0.3,
        congestion_base: 1.15,
        noise_sigma: 0.03,
        ..OracleParams::default()
    };
    let pool: Vec<_> =
        default_grid(Family::DeitLike).into_iter().filter(|p| p.workers >= 4).collect();
    let grid = subsample_grid(&pool, 140, 12);
    let data = collect_dataset(&grid, Sampler::Full, 0, 12, &params).unwrap();

    let settings = PipelineSettings {
        test_fraction: 0.2,
        forest: ForestParams { n_trees: 40, max_depth: 12, ..ForestParams::default() },
        gnn: TrainSettings {
            epochs: 80,
            d_k: 8,
            n_heads: 2,
            enc_hidden: 16,
            enc_out: 16,
            head_hidden: 32,
            ..TrainSettings::default()
        },
        design_restarts: 4,
    };

    // Every variant measures 60 of the 112 training-split configurations:
    // random_sampling picks them at random, the rest use the
    // information-optimal selection.
    let budget = 60;
    println!(
        "{} samples, budget {budget} for the sampling variants, seed 0\n",
        data.len()
    );
    println!("{:<17} {:>8} {:>10}", "variant", "MRE", "RMSE");
    for variant in ABLATION_VARIANTS {
        let report = run_ablation(variant, &data, budget, 0, &settings).unwrap();
        println!("{:<17} {:>7.3}% {:>9.4}s", variant.tag(), report.mre_pct, report.rmse);
    }
}
