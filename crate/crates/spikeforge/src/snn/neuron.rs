//! Integrate-and-fire update rule and surrogate derivatives.

use super::{ActivationMode, LayerParams, SnnError, SurrogateConfig, SurrogateKind};
use crate::tensor::Tensor;

pub struct IfStepOutput {
    pub spikes: Tensor,
    /// Number of neurons whose multi-spike count hit the cap this step.
    pub cap_hits: u64,
}

/// Advance one integrate-and-fire step with soft reset.
///
/// The drive (already `W * X(t)`) is accumulated into the membrane;
/// a neuron strictly above threshold emits one spike (single mode) or
/// `floor(U / threshold)` spikes (multi mode), and the membrane keeps
/// its residual after subtracting `spikes * threshold`. Equality with
/// the threshold does not fire.
pub fn if_step(
    membrane: &mut Tensor,
    drive: &Tensor,
    threshold: f64,
    mode: ActivationMode,
    cap: u32,
) -> Result<IfStepOutput, SnnError> {
    if membrane.shape() != drive.shape() {
        return Err(SnnError::Tensor(crate::tensor::TensorError::ShapeMismatch {
            expected: membrane.shape().to_vec(),
            got: drive.shape().to_vec(),
        }));
    }
    let mut spikes = Tensor::zeros(membrane.shape());
    let mut cap_hits = 0u64;
    let s = spikes.data_mut();
    for (i, (u, d)) in membrane.data_mut().iter_mut().zip(drive.data()).enumerate() {
        *u += d;
        if !u.is_finite() {
            return Err(SnnError::NonFiniteState);
        }
        if *u > threshold {
            let count = match mode {
                ActivationMode::Single => 1.0,
                ActivationMode::Multi => {
                    let n = (*u / threshold).floor();
                    if n >= cap as f64 {
                        cap_hits += 1;
                        cap as f64
                    } else {
                        n
                    }
                }
            };
            s[i] = count;
            *u -= count * threshold;
        }
    }
    Ok(IfStepOutput { spikes, cap_hits })
}

/// Spike counts and surrogate derivatives for a batch of membrane
/// values, without mutating state. Used by the taped forward pass.
pub fn spike_and_surrogate(
    membrane_after_drive: &[f64],
    threshold: f64,
    mode: ActivationMode,
    surrogate: &SurrogateConfig,
    cap: u32,
) -> (Vec<f64>, Vec<f64>, u64) {
    let mut spikes = Vec::with_capacity(membrane_after_drive.len());
    let mut derivs = Vec::with_capacity(membrane_after_drive.len());
    let mut cap_hits = 0u64;
    for &u in membrane_after_drive {
        let s = if u > threshold {
            match mode {
                ActivationMode::Single => 1.0,
                ActivationMode::Multi => {
                    let n = (u / threshold).floor();
                    if n >= cap as f64 {
                        cap_hits += 1;
                        cap as f64
                    } else {
                        n
                    }
                }
            }
        } else {
            0.0
        };
        spikes.push(s);
        derivs.push(surrogate_grad(u, surrogate));
    }
    (spikes, derivs, cap_hits)
}

/// Surrogate derivative of the spike function at membrane value `u`.
///
/// Single exponential: `beta * exp(-beta * |u - threshold|)`.
/// Periodic exponential: the same bump centered on every integer
/// multiple of the threshold, measured from the nearest multiple.
pub fn surrogate_grad(u: f64, config: &SurrogateConfig) -> f64 {
    let beta = config.beta;
    let theta = config.threshold;
    match config.kind {
        SurrogateKind::SingleExponential => beta * (-beta * (u - theta).abs()).exp(),
        SurrogateKind::PeriodicExponential => {
            let rem = u.rem_euclid(theta);
            let dist = rem.min(theta - rem);
            beta * (-beta * dist).exp()
        }
    }
}

/// Scale weights and threshold jointly: `(W, theta) -> (l*W, l*theta)`.
/// Spike trains are invariant under this map for positive factors.
pub fn scale_layer(params: &LayerParams, lambda: f64) -> Result<LayerParams, SnnError> {
    if lambda <= 0.0 {
        return Err(SnnError::NonPositiveLambda(lambda));
    }
    Ok(LayerParams {
        weights: params.weights.scale(lambda),
        threshold: params.threshold * lambda,
    })
}
