//! Event-driven spiking detector toolkit.
//!
//! Trains spiking networks for event-based single-class object
//! detection in clock-driven simulation (multi-spike integrate-and-fire
//! neurons, surrogate-gradient training through time, firing-rate
//! regularization, spike-value normalization), then emulates deployment
//! on an asynchronous per-event neuromorphic processor (8-bit weight
//! quantization, FIFO cores, synaptic-operation bandwidth, an
//! activity-proportional power model) and quantifies the gap between
//! the two end to end.
//!
//! Start with the runnable examples:
//!
//! ```bash
//! cargo run --release --example synthesize_dataset
//! cargo run --release --example train_detector
//! cargo run --release --example quantize_network
//! cargo run --release --example emulate_chip
//! cargo run --release --example power_calibration
//! cargo run --release --example lambda_sweep
//! cargo run --release --example sim_to_real_gap
//! ```
//!
//! or with the `spikeforge` binary, which exposes the same pipeline as
//! subcommands (`ingest`, `train`, `eval`, `quantize`, `emulate`,
//! `sweep`, `report`).

pub mod event_io;
pub mod snn;
pub mod tensor;
