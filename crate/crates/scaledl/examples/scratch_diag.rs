//! Scratch diagnostic: joint-cell coverage of budgeted selections. Not shipped.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use scaledl::pipeline::select_budget;
use scaledl::synth::{
    collect_dataset, default_grid, subsample_grid, Family, OracleParams, Sampler, WorkloadSample,
};

fn cell(s: &WorkloadSample) -> (u64, u64, u64) {
    let b = s.cfg.batch_size().unwrap();
    let ln = s
        .graph
        .nodes
        .iter()
        .find(|n| n.kind.as_str() == "layernorm")
        .expect("transformer graphs carry layernorm nodes");
    (b, ln.dims["seq"], ln.dims["d_model"])
}

fn main() {
    let params = OracleParams {
        fusion_discount: 0.3,
        congestion_base: 1.15,
        noise_sigma: 0.03,
        ..OracleParams::default()
    };
    let grid_all: Vec<_> = default_grid(Family::BertLike)
        .into_iter()
        .filter(|p| (p.seq == 64 || p.seq == 256) && (p.width == 256 || p.width == 768))
        .collect();
    let grid = subsample_grid(&grid_all, 200, 8);
    let data = collect_dataset(&grid, Sampler::Full, 0, 8, &params).unwrap();

    for seed in 0..10u64 {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut scaledl::rng::stream(seed, "ablation-split"));
        let test: Vec<WorkloadSample> = order[..40].iter().map(|&i| data[i].clone()).collect();
        let pool: Vec<WorkloadSample> = order[40..].iter().map(|&i| data[i].clone()).collect();

        let pool_cells: BTreeSet<_> = pool.iter().map(cell).collect();
        let test_cells: BTreeSet<_> = test.iter().map(cell).collect();

        for (label, random) in [("dopt", false), ("random", true)] {
            let sel = select_budget(&pool, 40, random, 4, seed).unwrap();
            let sel_cells: BTreeSet<_> = sel.iter().map(|&i| cell(&pool[i])).collect();
            let uncovered_tests = test
                .iter()
                .filter(|s| !sel_cells.contains(&cell(s)))
                .count();
            let joint = |f: &dyn Fn(&WorkloadSample) -> (u64, String)| {
                let have: BTreeSet<_> = sel.iter().map(|&i| f(&pool[i])).collect();
                let pool_all: BTreeSet<_> = pool.iter().map(f).collect();
                let holes = test.iter().map(f).filter(|c| !have.contains(c)).count();
                (have.len(), pool_all.len(), holes)
            };
            let bn = joint(&|s| (s.cfg.batch_size().unwrap(), s.cfg.comm.n_workers.to_string()));
            let bo = joint(&|s| (s.cfg.batch_size().unwrap(), s.cfg.optimizer.clone()));
            let no = joint(&|s| (u64::from(s.cfg.comm.n_workers), s.cfg.optimizer.clone()));
            println!(
                "seed {seed} {label}: bsw {}/{} ({} test holes), bxN {}/{} ({}), bxopt {}/{} ({}), Nxopt {}/{} ({})",
                sel_cells.len(),
                pool_cells.len(),
                uncovered_tests,
                bn.0, bn.1, bn.2,
                bo.0, bo.1, bo.2,
                no.0, no.1, no.2,
            );
            let _ = test_cells.len();
        }
    }
}
