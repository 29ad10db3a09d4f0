//! Calibrates the interconnect latency from ping-style measurements and
//! shows how the latency term moves predicted all-reduce time as the worker
//! count grows.
//!
//! Run with `cargo run --example calibrate_comm`.

use rand::Rng;

use scaledl::comm::{allreduce_time, load_latency_calibration, CommConfig};

fn main() {
    // Synthetic ping samples: 25 us base latency with multiplicative jitter
    // and the occasional straggler, which the median shrugs off.
    let mut rng = scaledl::rng::stream(9, "latency-probe");
    let samples: Vec<f64> = (0..40)
        .map(|i| {
            let jitter = 1.0 + rng.gen_range(-0.15..0.15);
            let straggler = if i % 13 == 0 { 4.0 } else { 1.0 };
            25e-6 * jitter * straggler
        })
        .collect();
    let document = serde_json::json!({
        "latency_samples_s": samples,
        "bandwidth_bps": 25e9,
    })
    .to_string();

    let calibrated = load_latency_calibration(&document).unwrap();
    println!(
        "median latency {:.2} us over {} samples (bandwidth {:.0} Gbit/s)",
        calibrated.latency_s * 1e6,
        calibrated.n_samples,
        calibrated.bandwidth_bps.unwrap() / 1e9
    );

    // All-reduce over the gradients of a 124M-parameter model at fp32.
    let payload_bits = 124_000_000u64 * 32;
    println!("\nall-reduce time for a 124M-parameter gradient exchange:");
    println!("  {:<8} {:>14} {:>14}", "workers", "zero latency", "calibrated");
    for n_workers in [2u32, 4, 8, 16] {
        let zero = allreduce_time(&CommConfig {
            n_workers,
            payload_bits: Some(payload_bits),
            bandwidth_bps: calibrated.bandwidth_bps.unwrap(),
            latency_s: 0.0,
        })
        .unwrap();
        let with_latency = allreduce_time(&CommConfig {
            n_workers,
            payload_bits: Some(payload_bits),
            bandwidth_bps: calibrated.bandwidth_bps.unwrap(),
            latency_s: calibrated.latency_s,
        })
        .unwrap();
        println!("  {:<8} {:>12.3}ms {:>12.3}ms", n_workers, zero * 1e3, with_latency * 1e3);
    }
}
