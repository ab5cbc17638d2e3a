//! Stereo event-camera toolkit: a deterministic stereo DVS simulator, an
//! event-driven SAD disparity pipeline, several execution strategies for it,
//! and throughput/accuracy evaluation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aer;
pub mod bench;
pub mod cli;
pub mod config;
pub mod pipeline;
pub mod runtime;
pub mod sim;
