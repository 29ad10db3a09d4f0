//! Ring all-reduce communication cost model.
//!
//! Data-parallel training synchronizes gradients with an all-reduce after
//! every iteration. For the ring variant over `N` workers exchanging `S` bits
//! at `B` bits/s with per-hop latency `gamma`, the cost is
//!
//! ```text
//! T_comm = 2(N-1)/N * S/B + 2(N-1) * gamma
//! ```
//!
//! i.e. two bandwidth passes over the payload (reduce-scatter + all-gather,
//! each moving (N-1)/N of the data) plus 2(N-1) latency hops.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::model_graph::{kind_params, GraphError, ModelGraph};

#[derive(Debug, Error)]
pub enum CommError {
    #[error("bandwidth must be positive, got {0}")]
    ZeroBandwidth(f64),
    #[error("worker count must be >= 1")]
    NoWorkers,
    #[error("payload size unset; derive it with gradient_payload_bits")]
    PayloadUnset,
    #[error("latency must be >= 0, got {0}")]
    NegativeLatency(f64),
    #[error("calibration file has no latency samples")]
    EmptyCalibration,
    #[error("calibration sample {index} is not a positive finite time: {value}")]
    BadCalibrationSample { index: usize, value: f64 },
    #[error("malformed calibration file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Cluster-side inputs to the all-reduce model.
///
/// `payload_bits` may be left unset in configuration files, in which case the
/// pipeline derives it from the model graph's parameter count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommConfig {
    pub n_workers: u32,
    #[serde(default)]
    pub payload_bits: Option<u64>,
    pub bandwidth_bps: f64,
    #[serde(default)]
    pub latency_s: f64,
}

impl CommConfig {
    pub fn validate(&self) -> Result<(), CommError> {
        if self.n_workers < 1 {
            return Err(CommError::NoWorkers);
        }
        if !(self.bandwidth_bps > 0.0) {
            return Err(CommError::ZeroBandwidth(self.bandwidth_bps));
        }
        if !(self.latency_s >= 0.0) {
            return Err(CommError::NegativeLatency(self.latency_s));
        }
        Ok(())
    }

    pub fn with_payload(&self, bits: u64) -> CommConfig {
        CommConfig { payload_bits: Some(bits), ..self.clone() }
    }
}

/// All-reduce time in seconds. Exactly zero for a single worker.
pub fn allreduce_time(cfg: &CommConfig) -> Result<f64, CommError> {
    cfg.validate()?;
    let payload = cfg.payload_bits.ok_or(CommError::PayloadUnset)?;
    if cfg.n_workers == 1 {
        return Ok(0.0);
    }
    let n = f64::from(cfg.n_workers);
    let transfer = 2.0 * (n - 1.0) / n * (payload as f64 / cfg.bandwidth_bps);
    let latency = 2.0 * (n - 1.0) * cfg.latency_s;
    Ok(transfer + latency)
}

/// Gradient payload in bits: total parameter count times `bits_per_param`.
///
/// Data-parallel all-reduce exchanges one gradient element per parameter;
/// optimizer state is not synchronized and is excluded.
pub fn gradient_payload_bits(g: &ModelGraph, bits_per_param: u32) -> Result<u64, CommError> {
    let mut total: u64 = 0;
    for node in &g.nodes {
        let params = kind_params(node)?;
        total = total
            .checked_add(params.checked_mul(u64::from(bits_per_param)).ok_or_else(|| {
                GraphError::CountOverflow { node: node.id.clone(), what: "payload bits" }
            })?)
            .ok_or_else(|| GraphError::CountOverflow {
                node: node.id.clone(),
                what: "payload bits",
            })?;
    }
    Ok(total)
}

/// Parsed contents of a latency calibration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommCalibration {
    pub latency_samples_s: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth_bps: Option<f64>,
}

/// Result of [`load_latency_calibration`]: the median measured latency plus
/// any bandwidth override present in the file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibratedComm {
    pub latency_s: f64,
    pub bandwidth_bps: Option<f64>,
    pub n_samples: usize,
}

/// Reads a calibration document and returns the median round-trip latency.
///
/// The median (not the mean) is used so stragglers do not skew the estimate.
/// An even sample count takes the average of the two middle values.
pub fn load_latency_calibration(document: &str) -> Result<CalibratedComm, CommError> {
    let cal: CommCalibration = serde_json::from_str(document)?;
    if cal.latency_samples_s.is_empty() {
        return Err(CommError::EmptyCalibration);
    }
    for (index, &value) in cal.latency_samples_s.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(CommError::BadCalibrationSample { index, value });
        }
    }
    let mut sorted = cal.latency_samples_s.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let latency_s = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
    Ok(CalibratedComm { latency_s, bandwidth_bps: cal.bandwidth_bps, n_samples: n })
}

/// Per-node gradient payload summation the slow way, for cross-checks.
pub fn payload_per_node_bits(g: &ModelGraph, bits_per_param: u32) -> Result<BTreeMap<String, u64>, CommError> {
    let mut out = BTreeMap::new();
    for node in &g.nodes {
        out.insert(node.id.clone(), kind_params(node)? * u64::from(bits_per_param));
    }
    Ok(out)
}
