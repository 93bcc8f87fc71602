//! Integrate-and-fire dynamics, surrogate gradients, and the
//! hardware-constrained network description.

mod constraints;
mod neuron;
mod network;

pub use constraints::{check_constraints, ConstraintReport, CoreBudget, LayerReport};
pub use network::{
    default_speck_yolo, forward_on_tape, run_network, HeadSpec, LayerKind, LayerSpec, NetworkSpec,
    Normalization, Precision, RunRecord, TapedRun,
};
pub use neuron::{if_step, scale_layer, surrogate_grad, IfStepOutput};

use crate::tensor::{Tensor, TensorError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default cap on multi-spike counts per update, mirroring 16-bit
/// signed state limits. Hitting it raises telemetry, not an error.
pub const DEFAULT_SPIKE_CAP: u32 = (1 << 15) - 1;

#[derive(Debug, Error)]
pub enum SnnError {
    #[error("membrane state became non-finite")]
    NonFiniteState,
    #[error("scale factor must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("network has no layers")]
    EmptyNetwork,
}

/// Spike generation mode of an integrate-and-fire layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationMode {
    /// At most one spike per update when the membrane exceeds threshold.
    Single,
    /// `floor(U / threshold)` spikes per update, proportional to the
    /// amount the membrane exceeds the threshold.
    Multi,
}

/// Shape of the surrogate derivative used in place of the spike
/// function's derivative during backpropagation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    /// `beta * exp(-beta * |u - threshold|)`; pairs with single-spike.
    SingleExponential,
    /// Same bump repeated with period `threshold`, so every firing
    /// multiple gets gradient; pairs with multi-spike.
    PeriodicExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub kind: SurrogateKind,
    /// Steepness of the exponential bump.
    pub beta: f64,
    /// Firing threshold: bump center for the single kind, period for
    /// the periodic kind.
    pub threshold: f64,
}

impl SurrogateConfig {
    /// Default steepness is 10 / threshold.
    pub fn for_mode(mode: ActivationMode, threshold: f64) -> Self {
        SurrogateConfig {
            kind: match mode {
                ActivationMode::Single => SurrogateKind::SingleExponential,
                ActivationMode::Multi => SurrogateKind::PeriodicExponential,
            },
            beta: 10.0 / threshold,
            threshold,
        }
    }
}

/// Weights and firing threshold of one spiking layer, bias-free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Tensor,
    pub threshold: f64,
}

impl LayerParams {
    pub fn new(weights: Tensor, threshold: f64) -> Self {
        assert!(threshold > 0.0, "threshold must be positive");
        LayerParams { weights, threshold }
    }
}
