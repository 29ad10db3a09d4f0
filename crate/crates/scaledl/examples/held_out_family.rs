//! Out-of-family generalization: train on four architecture families, test
//! on the fifth, and compare the refined pipeline with the plain additive
//! model. The refiner transfers because it reads graph structure rather than
//! family identity.
//!
//! Run with `cargo run --example held_out_family`.

use scaledl::layer_cost::ForestParams;
use scaledl::pipeline::{
    evaluate_stack, split_id_ood, train_stack, AblationVariant, PipelineSettings, SplitMode,
};
use scaledl::refiner::TrainSettings;
use scaledl::synth::{
    collect_dataset, default_grid, subsample_grid, Family, OracleParams, Sampler, FAMILIES,
};

fn main() {
    let params = OracleParams {
        fusion_discount: 0.3,
        congestion_base: 1.15,
        noise_sigma: 0.03,
        ..OracleParams::default()
    };
    let mut data = Vec::new();
    for family in FAMILIES {
        let grid = subsample_grid(&default_grid(family), 30, 10);
        data.extend(collect_dataset(&grid, Sampler::Full, 0, 10, &params).unwrap());
    }

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

    let target = Family::VitLike.tag();
    let (train, test) = split_id_ood(&data, target, SplitMode::Ood, 0).unwrap();
    println!(
        "training on {} samples from 4 families, testing on {} {target} samples",
        train.len(),
        test.len()
    );
    assert!(train.iter().all(|s| s.family != target));

    for (label, variant) in [("full pipeline", AblationVariant::Full), ("additive only", AblationVariant::NoGnn)] {
        let stack = train_stack(&train, variant, train.len(), 0, &settings).unwrap();
        let report = evaluate_stack(&stack, &test, false).unwrap();
        println!("  {:<14} MRE {:>7.3}%  RMSE {:.4}s", label, report.mre_pct, report.rmse);
    }
}
