//! Selects the most informative benchmark configurations under a fixed
//! measurement budget.
//!
//! Grid points are turned into descriptor rows (log scales plus optimizer
//! dummies), expanded into bin indicators with pairwise interaction terms,
//! and handed to the Fedorov exchange. The printed trace shows how far the
//! exchange moves from its random starting subset, and the histogram shows
//! that the winning subset spreads over every axis level.
//!
//! Run with `cargo run --example design_selection`.

use std::collections::BTreeMap;

use scaledl::design::{fedorov_exchange_standardized, indicator_rows, DesignProblem};
use scaledl::synth::{
    config_features, default_grid, subsample_grid, Family, SweepPoint, DESIGN_BINS, DESIGN_PAIRS,
};

fn level_histogram(points: &[&SweepPoint], axis: &str, of: impl Fn(&SweepPoint) -> u64) -> String {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for p in points {
        *counts.entry(of(p)).or_default() += 1;
    }
    let body: Vec<String> = counts.iter().map(|(level, n)| format!("{level}:{n}")).collect();
    format!("{axis:<9} {}", body.join("  "))
}

fn main() {
    let budget = 24;
    let grid = subsample_grid(&default_grid(Family::BertLike), 200, 5);

    let descriptors: Vec<Vec<f64>> = grid.iter().map(config_features).collect();
    let candidates = indicator_rows(&descriptors, DESIGN_BINS, DESIGN_PAIRS).unwrap();
    println!(
        "{} candidates, {} indicator columns, budget {budget}",
        candidates.len(),
        candidates[0].len()
    );

    let problem = DesignProblem::new(candidates, budget);
    let selection = fedorov_exchange_standardized(&problem, 4, 5).unwrap();

    let trace = &selection.log_det_trace;
    println!(
        "random start log det {:.3} -> {:.3} after {} swaps (gain {:.3} nats)",
        trace[0],
        selection.log_det,
        selection.iterations,
        selection.log_det - trace[0]
    );

    let chosen: Vec<&SweepPoint> = selection.selected.iter().map(|&i| &grid[i]).collect();
    println!("\nlevel occupancy of the selected subset:");
    println!("  {}", level_histogram(&chosen, "batch", |p| p.batch));
    println!("  {}", level_histogram(&chosen, "seq", |p| p.seq));
    println!("  {}", level_histogram(&chosen, "width", |p| p.width));
    println!("  {}", level_histogram(&chosen, "workers", |p| u64::from(p.workers)));
    println!("  {}", level_histogram(&chosen, "depth", |p| u64::from(p.depth)));

    println!("\nfirst selected configurations:");
    for p in chosen.iter().take(6) {
        println!(
            "  batch={:<3} seq={:<4} depth={:<3} width={:<4} workers={} {}",
            p.batch, p.seq, p.depth, p.width, p.workers, p.optimizer
        );
    }
}
