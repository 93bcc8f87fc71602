//! Per-core memory and bandwidth constraint checking.

use super::{NetworkSpec, SnnError};
use serde::{Deserialize, Serialize};

/// Per-core resource limits of the emulated processor. The absolute
/// capacities are configuration estimates, not vendor figures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoreBudget {
    pub max_kernel_entries: usize,
    pub max_neuron_entries: usize,
    pub max_synops_per_s: f64,
    pub core_count: usize,
    /// FIFO capacity per core in queued events.
    pub queue_capacity: usize,
}

impl Default for CoreBudget {
    fn default() -> Self {
        CoreBudget {
            max_kernel_entries: 1 << 20,
            max_neuron_entries: 1 << 16,
            max_synops_per_s: 50e6,
            core_count: 9,
            queue_capacity: 1 << 16,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerReport {
    pub layer: usize,
    pub kernel_entries: usize,
    /// Neuron state entries at the core output (post-pool).
    pub neuron_entries: usize,
    pub kernel_ok: bool,
    pub neuron_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub layers: Vec<LayerReport>,
    pub core_count: usize,
    pub core_count_ok: bool,
    pub resolution_ok: bool,
    pub violations: Vec<String>,
    pub pass: bool,
}

impl ConstraintReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Check a network against per-core budgets: kernel entries are weight
/// counts, neuron entries are output states (post-pool), the core count
/// must not exceed the budget, and the input resolution is capped at
/// 128x128.
pub fn check_constraints(spec: &NetworkSpec, budget: &CoreBudget) -> Result<ConstraintReport, SnnError> {
    let geom = spec.geometry()?;
    let shapes = spec.weight_shapes()?;
    let mut layers = Vec::with_capacity(spec.layers.len());
    let mut violations = Vec::new();
    for (l, (layer, g)) in spec.layers.iter().zip(&geom).enumerate() {
        let kernel_entries: usize = shapes[l].iter().product();
        let neuron_entries: usize = g.sent_shape.iter().product();
        let kernel_ok = kernel_entries <= budget.max_kernel_entries;
        let neuron_ok = neuron_entries <= budget.max_neuron_entries;
        if !kernel_ok {
            violations.push(format!(
                "layer {l}: kernel entries {kernel_entries} > {}",
                budget.max_kernel_entries
            ));
        }
        if !neuron_ok {
            violations.push(format!(
                "layer {l}: neuron entries {neuron_entries} > {}",
                budget.max_neuron_entries
            ));
        }
        let _ = layer;
        layers.push(LayerReport {
            layer: l,
            kernel_entries,
            neuron_entries,
            kernel_ok,
            neuron_ok,
        });
    }
    let core_count = spec.layers.len();
    let core_count_ok = core_count <= budget.core_count;
    if !core_count_ok {
        violations.push(format!(
            "core count {core_count} > {}",
            budget.core_count
        ));
    }
    let resolution_ok = spec.input_height <= 128 && spec.input_width <= 128;
    if !resolution_ok {
        violations.push(format!(
            "input resolution {}x{} exceeds 128x128",
            spec.input_width, spec.input_height
        ));
    }
    let pass = violations.is_empty();
    Ok(ConstraintReport {
        layers,
        core_count,
        core_count_ok,
        resolution_ok,
        violations,
        pass,
    })
}
