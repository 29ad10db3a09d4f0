//! Scratch direction checks for the ablation-style experiments. Not shipped.

use std::time::Instant;

use scaledl::layer_cost::ForestParams;
use scaledl::pipeline::{
    evaluate_stack, run_ablation, split_id_ood, train_stack, AblationVariant, PipelineSettings,
    SplitMode,
};
use scaledl::refiner::TrainSettings;
use scaledl::synth::{
    collect_dataset, default_grid, subsample_grid, Family, OracleParams, Sampler,
};

fn settings() -> PipelineSettings {
    PipelineSettings {
        test_fraction: 0.2,
        forest: ForestParams { n_trees: 60, max_depth: 12, ..ForestParams::default() },
        gnn: TrainSettings {
            epochs: 200,
            d_k: 8,
            n_heads: 2,
            enc_hidden: 16,
            enc_out: 16,
            head_hidden: 32,
            ..TrainSettings::default()
        },
        design_restarts: 4,
    }
}

fn main() {
    let s = settings();
    let params7 = OracleParams {
        fusion_discount: 0.3,
        congestion_base: 1.15,
        noise_sigma: 0.03,
        ..OracleParams::default()
    };

    // C7: interaction effects on, 200 samples, full vs no_gnn over 10 seeds.
    let t0 = Instant::now();
    let grid7 = subsample_grid(&default_grid(Family::DeitLike), 200, 7);
    let data7 = collect_dataset(&grid7, Sampler::Full, 0, 7, &params7).unwrap();
    let mut wins7 = 0;
    let (mut sum_full, mut sum_nognn) = (0.0, 0.0);
    for seed in 0..10u64 {
        let full = run_ablation(AblationVariant::Full, &data7, data7.len(), seed, &s).unwrap();
        let nognn = run_ablation(AblationVariant::NoGnn, &data7, data7.len(), seed, &s).unwrap();
        if full.mre_pct < nognn.mre_pct {
            wins7 += 1;
        }
        sum_full += full.mre_pct;
        sum_nognn += nognn.mre_pct;
        println!("C7 seed {seed}: full {:.3}% no_gnn {:.3}%", full.mre_pct, nognn.mre_pct);
    }
    println!(
        "C7: wins {wins7}/10, mean full {:.3}% vs no_gnn {:.3}% (ratio {:.3}) [{:?}]",
        sum_full / 10.0,
        sum_nognn / 10.0,
        sum_full / sum_nognn,
        t0.elapsed()
    );

    // C9: all-N>=4 grid, default oracle, no_comm/no_mlp vs full over 10 seeds.
    let t0 = Instant::now();
    let params9 = OracleParams::default();
    let grid9_all: Vec<_> =
        default_grid(Family::DeitLike).into_iter().filter(|p| p.workers >= 4).collect();
    let grid9 = subsample_grid(&grid9_all, 200, 9);
    let data9 = collect_dataset(&grid9, Sampler::Full, 0, 9, &params9).unwrap();
    let (mut comm_wins, mut mlp_wins) = (0, 0);
    for seed in 0..10u64 {
        let full = run_ablation(AblationVariant::Full, &data9, data9.len(), seed, &s).unwrap();
        let nc = run_ablation(AblationVariant::NoComm, &data9, data9.len(), seed, &s).unwrap();
        let nm = run_ablation(AblationVariant::NoMlp, &data9, data9.len(), seed, &s).unwrap();
        if nc.mre_pct > full.mre_pct {
            comm_wins += 1;
        }
        if nm.mre_pct > full.mre_pct {
            mlp_wins += 1;
        }
        println!(
            "C9 seed {seed}: full {:.3}% no_comm {:.3}% no_mlp {:.3}%",
            full.mre_pct, nc.mre_pct, nm.mre_pct
        );
    }
    println!("C9: no_comm wins {comm_wins}/10, no_mlp wins {mlp_wins}/10 [{:?}]", t0.elapsed());

    // C10: train on four families, test on the fifth.
    let t0 = Instant::now();
    let mut data10 = Vec::new();
    for fam in [Family::T5Like, Family::Gpt2Like, Family::BertLike, Family::VitLike, Family::DeitLike]
    {
        let grid = subsample_grid(&default_grid(fam), 60, 10);
        data10.extend(collect_dataset(&grid, Sampler::Full, 0, 10, &params7).unwrap());
    }
    let (mut sum_full, mut sum_nognn) = (0.0, 0.0);
    for seed in 0..10u64 {
        let (train, test) =
            split_id_ood(&data10, Family::VitLike.tag(), SplitMode::Ood, seed).unwrap();
        let full = train_stack(&train, AblationVariant::Full, train.len(), seed, &s).unwrap();
        let nognn = train_stack(&train, AblationVariant::NoGnn, train.len(), seed, &s).unwrap();
        let full_r = evaluate_stack(&full, &test, false).unwrap();
        let nognn_r = evaluate_stack(&nognn, &test, false).unwrap();
        sum_full += full_r.mre_pct;
        sum_nognn += nognn_r.mre_pct;
        println!("C10 seed {seed}: full {:.3}% no_gnn {:.3}%", full_r.mre_pct, nognn_r.mre_pct);
    }
    println!(
        "C10: mean full {:.3}% vs no_gnn {:.3}% [{:?}]",
        sum_full / 10.0,
        sum_nognn / 10.0,
        t0.elapsed()
    );
}
