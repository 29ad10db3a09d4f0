//! Generates a synthetic benchmark dataset from the built-in roofline oracle
//! and writes the standard on-disk layout: `dataset.csv`, one graph JSON per
//! workload under `graphs/`, and the oracle parameters used.
//!
//! Run with `cargo run --example generate_dataset`.

use scaledl::synth::{
    collect_dataset, default_grid, params_to_json, subsample_grid, write_dataset, Family,
    OracleParams, Sampler,
};

fn main() {
    let out = std::path::Path::new("target/example-out/dataset");
    std::fs::create_dir_all(out).unwrap();

    let params = OracleParams::default();
    let mut samples = Vec::new();
    for family in [Family::Gpt2Like, Family::VitLike] {
        // 24 configurations per family out of the 960-point factorial grid.
        let grid = subsample_grid(&default_grid(family), 24, 1);
        let collected = collect_dataset(&grid, Sampler::Full, 0, 1, &params).unwrap();
        println!("{}: {} measured configurations", family.tag(), collected.len());
        samples.extend(collected);
    }

    let csv = write_dataset(&samples, out).unwrap();
    std::fs::write(out.join("oracle_params.json"), params_to_json(&params)).unwrap();

    println!("\nwrote {} samples to {}", samples.len(), csv.display());
    println!("first rows:");
    for s in samples.iter().take(4) {
        println!(
            "  {:<28} batch={:<3} workers={} optimizer={:<5} iter={:.5}s epoch={:.2}s",
            s.graph.name,
            s.cfg.hp["batch_size"],
            s.cfg.comm.n_workers,
            s.cfg.optimizer,
            s.measured_iter_s,
            s.measured_epoch_s,
        );
    }
}
