//! Recording tape for reverse-mode differentiation through time.
//!
//! Each forward op appends one node holding its output value and the
//! references needed by its backward rule. Backward replays nodes in
//! reverse recorded order exactly once, accumulating gradients into
//! per-node buffers. Accumulation order is fixed, so gradients are
//! bit-identical across runs.

use super::ops;
use super::{Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    /// value = a + c * b
    AddScaled(NodeId, NodeId, f64),
    Sum(NodeId),
    Reshape(NodeId),
    Conv2d {
        input: NodeId,
        kernel: NodeId,
    },
    SumPool(NodeId),
    Linear {
        input: NodeId,
        weight: NodeId,
        bias: Option<NodeId>,
    },
    LayerNorm {
        input: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: f64,
    },
    /// Elementwise nonlinearity with a caller-recorded local derivative,
    /// used for spike activations whose backward is a surrogate rule.
    Recorded {
        input: NodeId,
        dydx: Vec<f64>,
    },
}

struct Node {
    op: Op,
    value: Tensor,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Register an input or parameter tensor.
    pub fn leaf(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let value = self.value(a).add(self.value(b))?;
        Ok(self.push(Op::Add(a, b), value))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let value = self.value(a).mul(self.value(b))?;
        Ok(self.push(Op::Mul(a, b), value))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let value = self.value(a).scale(c);
        self.push(Op::Scale(a, c), value)
    }

    /// `a + c * b` in one node; the workhorse of the soft reset.
    pub fn add_scaled(&mut self, a: NodeId, b: NodeId, c: f64) -> Result<NodeId, TensorError> {
        let mut value = self.value(a).clone();
        if value.shape() != self.value(b).shape() {
            return Err(TensorError::ShapeMismatch {
                expected: value.shape().to_vec(),
                got: self.value(b).shape().to_vec(),
            });
        }
        // split borrows: clone already detached `value` from self
        value.axpy(c, self.value(b));
        Ok(self.push(Op::AddScaled(a, b, c), value))
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let value = Tensor::scalar(self.value(a).sum());
        self.push(Op::Sum(a), value)
    }

    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId, TensorError> {
        let value = self.value(a).reshaped(shape)?;
        Ok(self.push(Op::Reshape(a), value))
    }

    pub fn conv2d(&mut self, input: NodeId, kernel: NodeId) -> Result<NodeId, TensorError> {
        let value = ops::conv2d_3x3(self.value(input), self.value(kernel))?;
        Ok(self.push(Op::Conv2d { input, kernel }, value))
    }

    pub fn sum_pool(&mut self, input: NodeId) -> Result<NodeId, TensorError> {
        let value = ops::sum_pool2(self.value(input))?;
        Ok(self.push(Op::SumPool(input), value))
    }

    pub fn linear(
        &mut self,
        input: NodeId,
        weight: NodeId,
        bias: Option<NodeId>,
    ) -> Result<NodeId, TensorError> {
        let value = ops::linear(
            self.value(input),
            self.value(weight),
            bias.map(|b| self.value(b)),
        )?;
        Ok(self.push(Op::Linear { input, weight, bias }, value))
    }

    pub fn layer_norm(
        &mut self,
        input: NodeId,
        gamma: NodeId,
        beta: NodeId,
        eps: f64,
    ) -> Result<NodeId, TensorError> {
        let value = ops::layer_norm(
            self.value(input),
            self.value(gamma),
            self.value(beta),
            eps,
        )?;
        Ok(self.push(Op::LayerNorm { input, gamma, beta, eps }, value))
    }

    /// Record an elementwise nonlinearity computed by the caller.
    ///
    /// `value[i]` is the forward output and `dydx[i]` the local derivative
    /// used verbatim by the backward pass (e.g. a surrogate gradient).
    pub fn recorded_unary(
        &mut self,
        input: NodeId,
        value: Tensor,
        dydx: Vec<f64>,
    ) -> Result<NodeId, TensorError> {
        if value.shape() != self.value(input).shape() || dydx.len() != value.len() {
            return Err(TensorError::ShapeMismatch {
                expected: self.value(input).shape().to_vec(),
                got: value.shape().to_vec(),
            });
        }
        Ok(self.push(Op::Recorded { input, dydx }, value))
    }

    /// Reverse sweep from explicit `(node, gradient)` seeds.
    ///
    /// Multiple seeds accumulate, which lets a detection loss seed the
    /// decode logits while a firing-rate penalty seeds every spike node
    /// in the same pass.
    pub fn backward(&self, seeds: &[(NodeId, Tensor)]) -> Result<Gradients, TensorError> {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        for (id, seed) in seeds {
            let value = self.value(*id);
            if value.shape() != seed.shape() {
                return Err(TensorError::ShapeMismatch {
                    expected: value.shape().to_vec(),
                    got: seed.shape().to_vec(),
                });
            }
            accumulate(&mut grads[id.0], seed);
        }
        for idx in (0..self.nodes.len()).rev() {
            let Some(g) = grads[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    accumulate(&mut grads[a.0], &g);
                    accumulate(&mut grads[b.0], &g);
                }
                Op::Mul(a, b) => {
                    let ga = g.mul(self.value(*b))?;
                    let gb = g.mul(self.value(*a))?;
                    accumulate(&mut grads[a.0], &ga);
                    accumulate(&mut grads[b.0], &gb);
                }
                Op::Scale(a, c) => {
                    accumulate(&mut grads[a.0], &g.scale(*c));
                }
                Op::AddScaled(a, b, c) => {
                    accumulate(&mut grads[a.0], &g);
                    accumulate(&mut grads[b.0], &g.scale(*c));
                }
                Op::Sum(a) => {
                    let gv = g.item();
                    accumulate(&mut grads[a.0], &Tensor::filled(self.value(*a).shape(), gv));
                }
                Op::Reshape(a) => {
                    let back = g.reshaped(self.value(*a).shape())?;
                    accumulate(&mut grads[a.0], &back);
                }
                Op::Conv2d { input, kernel } => {
                    let (d_in, d_k) =
                        ops::conv2d_3x3_backward(self.value(*input), self.value(*kernel), &g);
                    accumulate(&mut grads[input.0], &d_in);
                    accumulate(&mut grads[kernel.0], &d_k);
                }
                Op::SumPool(input) => {
                    let d_in = ops::sum_pool2_backward(self.value(*input).shape(), &g);
                    accumulate(&mut grads[input.0], &d_in);
                }
                Op::Linear { input, weight, bias } => {
                    let (d_in, d_w, d_b) = ops::linear_backward(
                        self.value(*input),
                        self.value(*weight),
                        bias.is_some(),
                        &g,
                    );
                    accumulate(&mut grads[input.0], &d_in);
                    accumulate(&mut grads[weight.0], &d_w);
                    if let (Some(b), Some(db)) = (bias, d_b) {
                        accumulate(&mut grads[b.0], &db);
                    }
                }
                Op::LayerNorm { input, gamma, beta, eps } => {
                    let (d_in, d_g, d_b) = ops::layer_norm_backward(
                        self.value(*input),
                        self.value(*gamma),
                        *eps,
                        &g,
                    );
                    accumulate(&mut grads[input.0], &d_in);
                    accumulate(&mut grads[gamma.0], &d_g);
                    accumulate(&mut grads[beta.0], &d_b);
                }
                Op::Recorded { input, dydx } => {
                    let mut d_in = g.clone();
                    for (dv, local) in d_in.data_mut().iter_mut().zip(dydx) {
                        *dv *= local;
                    }
                    accumulate(&mut grads[input.0], &d_in);
                }
            }
        }
        Ok(Gradients { grads })
    }

    /// Convenience wrapper for a scalar loss node.
    pub fn backward_scalar(&self, loss: NodeId) -> Result<Gradients, TensorError> {
        self.backward(&[(loss, Tensor::scalar(1.0))])
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: &Tensor) {
    match slot {
        Some(t) => t.axpy(1.0, g),
        None => *slot = Some(g.clone()),
    }
}

/// Per-node gradients produced by a backward sweep.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn grad(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    /// True when the backward sweep reached this node. A parameter that
    /// stays untouched is disconnected from the loss and gets a zero
    /// gradient from [`Gradients::grad_or_zero`].
    pub fn is_touched(&self, id: NodeId) -> bool {
        self.grads[id.0].is_some()
    }

    pub fn grad_or_zero(&self, id: NodeId, shape: &[usize]) -> Tensor {
        self.grads[id.0]
            .clone()
            .unwrap_or_else(|| Tensor::zeros(shape))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_scalar(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn mul_chain_matches_hand_math() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(&[2], vec![3.0, -1.0]).unwrap());
        let y = tape.leaf(Tensor::from_vec(&[2], vec![2.0, 5.0]).unwrap());
        let p = tape.mul(x, y).unwrap();
        let loss = tape.sum(p);
        let grads = tape.backward_scalar(loss).unwrap();
        assert_eq!(grads.grad(x).unwrap().data(), &[2.0, 5.0]);
        assert_eq!(grads.grad(y).unwrap().data(), &[3.0, -1.0]);
    }

    #[test]
    fn conv_kernel_gradient_matches_finite_differences() {
        let input =
            Tensor::from_vec(&[1, 3, 3], vec![0.5, -1.0, 2.0, 0.1, 0.7, -0.4, 1.5, 0.0, -2.2])
                .unwrap();
        let kernel0: Vec<f64> = vec![0.3, -0.2, 0.8, 0.05, -0.6, 0.4, 0.9, -0.15, 0.2];
        let eval = |k: &[f64]| {
            let mut tape = Tape::new();
            let x = tape.leaf(input.clone());
            let kn = tape.leaf(Tensor::from_vec(&[1, 1, 3, 3], k.to_vec()).unwrap());
            let y = tape.conv2d(x, kn).unwrap();
            tape.value(tape.sum(y)).item()
        };
        let mut tape = Tape::new();
        let x = tape.leaf(input.clone());
        let kn = tape.leaf(Tensor::from_vec(&[1, 1, 3, 3], kernel0.clone()).unwrap());
        let y = tape.conv2d(x, kn).unwrap();
        let loss = tape.sum(y);
        let grads = tape.backward_scalar(loss).unwrap();
        let gk = grads.grad(kn).unwrap();
        for i in 0..9 {
            let fd = fd_scalar(
                |v| {
                    let mut k = kernel0.clone();
                    k[i] = v;
                    eval(&k)
                },
                kernel0[i],
                1e-5,
            );
            let an = gk.data()[i];
            assert!(
                (an - fd).abs() <= 1e-5 * fd.abs().max(1.0),
                "kernel grad {i}: analytic {an} vs fd {fd}"
            );
        }
    }

    #[test]
    fn disconnected_parameter_reports_untouched_and_zero() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(&[2], vec![1.0, 2.0]).unwrap());
        let unused = tape.leaf(Tensor::from_vec(&[2], vec![9.0, 9.0]).unwrap());
        let loss = tape.sum(x);
        let grads = tape.backward_scalar(loss).unwrap();
        assert!(!grads.is_touched(unused));
        assert_eq!(grads.grad_or_zero(unused, &[2]).data(), &[0.0, 0.0]);
        assert!(grads.is_touched(x));
    }

    #[test]
    fn multiple_seeds_accumulate() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(&[2], vec![1.0, 1.0]).unwrap());
        let a = tape.scale(x, 2.0);
        let b = tape.scale(x, 3.0);
        let grads = tape
            .backward(&[
                (a, Tensor::filled(&[2], 1.0)),
                (b, Tensor::filled(&[2], 1.0)),
            ])
            .unwrap();
        assert_eq!(grads.grad(x).unwrap().data(), &[5.0, 5.0]);
    }

    #[test]
    fn recorded_unary_uses_given_derivative() {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_vec(&[3], vec![0.2, 1.4, 2.9]).unwrap());
        let value = Tensor::from_vec(&[3], vec![0.0, 1.0, 2.0]).unwrap();
        let dydx = vec![0.5, 0.25, 0.125];
        let s = tape.recorded_unary(x, value, dydx.clone()).unwrap();
        let loss = tape.sum(s);
        let grads = tape.backward_scalar(loss).unwrap();
        assert_eq!(grads.grad(x).unwrap().data(), dydx.as_slice());
    }

    #[test]
    fn backward_is_deterministic() {
        let run = || {
            let mut tape = Tape::new();
            let x = tape.leaf(Tensor::from_vec(&[4], vec![0.1, 0.2, 0.3, 0.4]).unwrap());
            let w = tape.leaf(Tensor::from_vec(&[2, 4], (0..8).map(|v| v as f64 * 0.13).collect()).unwrap());
            let y = tape.linear(x, w, None).unwrap();
            let loss = tape.sum(y);
            let grads = tape.backward_scalar(loss).unwrap();
            grads.grad(w).unwrap().data().to_vec()
        };
        assert_eq!(run(), run());
    }
}
