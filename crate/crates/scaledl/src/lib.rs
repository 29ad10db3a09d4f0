//! Runtime prediction for distributed DNN training workloads.
//!
//! The toolkit decomposes a training iteration into a layer graph, predicts
//! per-layer compute time with per-kind random-forest regressors, adds a ring
//! all-reduce communication term, and refines the additive estimate with a
//! graph attention network that emits two scaling factors:
//!
//! ```text
//! T_iter  = alpha * T_sum + beta * T_comm
//! T_epoch = I * T_iter
//! ```
//!
//! Supporting pieces: a D-optimal benchmark sampler that picks the most
//! informative configurations under a fixed budget ([`design`]), a synthetic
//! roofline oracle for desk-scale end-to-end validation ([`synth`]), and an
//! orchestration layer with ID/OOD evaluation and ablations ([`pipeline`]).

pub mod cli;
pub mod comm;
pub mod design;
pub mod layer_cost;
pub mod model_graph;
pub mod pipeline;
pub mod refiner;
pub mod rng;
pub mod synth;
