use crate::error::{ChanError, Result};

use super::tensor::Tensor;
use super::{conv, loss, ops};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
pub(crate) enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Transpose(Var),
    Tanh(Var),
    Sigmoid(Var),
    Concat { inputs: Vec<Var>, axis: usize },
    Slice { input: Var, axis: usize, start: usize },
    Sum { input: Var, axis: usize },
    Mean { input: Var, axis: usize },
    SumAll(Var),
    Softmax { input: Var, axis: usize },
    Expand { input: Var, axis: usize },
    Reshape(Var),
    Conv1d { input: Var, filter: Var, dilation: usize },
    MaxPool1d { input: Var, argmax: Vec<usize> },
    ConvTranspose1d { input: Var, filter: Var, stride: usize, crop: usize },
    Bce { scores: Var, labels: Vec<f64> },
}

#[derive(Debug)]
pub(crate) struct Node {
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub op: Op,
    pub needs_grad: bool,
}

/// Records one forward pass so it can be differentiated in reverse.
///
/// Nodes are appended in evaluation order and only ever reference earlier
/// nodes, so the graph is acyclic and the reverse insertion order is a
/// valid topological order for backpropagation.
#[derive(Debug, Default)]
pub struct Tape {
    pub(crate) nodes: Vec<Node>,
}

/// Gradients of a scalar output with respect to every node on a tape.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, var: Var) -> Option<Vec<f64>> {
        self.grads.get_mut(var.0).and_then(Option::take)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers a trainable leaf.
    pub fn param(&mut self, tensor: &Tensor) -> Var {
        self.leaf(tensor.shape().to_vec(), tensor.data().to_vec(), true)
    }

    /// Registers a leaf that never receives a gradient.
    pub fn constant(&mut self, tensor: Tensor) -> Var {
        let shape = tensor.shape().to_vec();
        self.leaf(shape, tensor.into_data(), false)
    }

    pub fn zeros(&mut self, shape: &[usize]) -> Var {
        let numel = shape.iter().product();
        self.leaf(shape.to_vec(), vec![0.0; numel], false)
    }

    fn leaf(&mut self, shape: Vec<usize>, value: Vec<f64>, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            shape,
            value,
            op: Op::Leaf,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub(crate) fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, inputs: &[Var]) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            shape,
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    /// Copies a node's value out as a standalone tensor.
    pub fn tensor(&self, v: Var) -> Tensor {
        let node = &self.nodes[v.0];
        Tensor::new(node.shape.clone(), node.value.clone()).expect("node shape is consistent")
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    pub(crate) fn needs_grad(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Reverse sweep from a scalar `output`.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        let out = &self.nodes[output.0];
        if out.value.len() != 1 {
            return Err(ChanError::invalid(
                "backward",
                format!("output must be scalar, got shape {:?}", out.shape),
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[output.0] = Some(vec![1.0]);
        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.backward_node(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn backward_node(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let mut acc = Accumulator { tape: self, grads };
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc.add(*a, |buf| add_into(buf, g));
                acc.add(*b, |buf| add_into(buf, g));
            }
            Op::Sub(a, b) => {
                acc.add(*a, |buf| add_into(buf, g));
                acc.add(*b, |buf| buf.iter_mut().zip(g).for_each(|(d, g)| *d -= g));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                acc.add(*a, |buf| {
                    for ((d, g), b) in buf.iter_mut().zip(g).zip(bv) {
                        *d += g * b;
                    }
                });
                acc.add(*b, |buf| {
                    for ((d, g), a) in buf.iter_mut().zip(g).zip(av) {
                        *d += g * a;
                    }
                });
            }
            Op::Scale(a, s) => acc.add(*a, |buf| {
                buf.iter_mut().zip(g).for_each(|(d, g)| *d += g * s);
            }),
            Op::AddRow(..) | Op::MulRow(..) | Op::MatMul(..) | Op::MatMulNt(..) | Op::Transpose(_) => {
                ops::backward_linear(&node.op, g, &mut acc)
            }
            Op::Tanh(a) => acc.add(*a, |buf| {
                for ((d, g), y) in buf.iter_mut().zip(g).zip(&node.value) {
                    *d += g * (1.0 - y * y);
                }
            }),
            Op::Sigmoid(a) => acc.add(*a, |buf| {
                for ((d, g), y) in buf.iter_mut().zip(g).zip(&node.value) {
                    *d += g * y * (1.0 - y);
                }
            }),
            Op::Concat { .. }
            | Op::Slice { .. }
            | Op::Sum { .. }
            | Op::Mean { .. }
            | Op::SumAll(_)
            | Op::Softmax { .. }
            | Op::Expand { .. }
            | Op::Reshape(_) => ops::backward_structural(node, g, &mut acc),
            Op::Conv1d { .. } | Op::MaxPool1d { .. } | Op::ConvTranspose1d { .. } => {
                conv::backward(node, g, &mut acc)
            }
            Op::Bce { scores, labels } => loss::bce_backward(*scores, labels, g[0], &mut acc),
        }
    }
}

/// Routes partial derivatives into the gradient buffers of a node's inputs.
pub(crate) struct Accumulator<'a> {
    pub tape: &'a Tape,
    grads: &'a mut [Option<Vec<f64>>],
}

impl Accumulator<'_> {
    /// Runs `f` on the (zero-initialised on first touch) gradient buffer of
    /// `v`, skipping inputs that do not require a gradient.
    pub fn add(&mut self, v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.tape.needs_grad(v) {
            return;
        }
        let len = self.tape.nodes[v.0].value.len();
        let buf = self.grads[v.0].get_or_insert_with(|| vec![0.0; len]);
        f(buf);
    }
}

pub(crate) fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

/// Splits `shape` around `axis` into `(outer, extent, inner)` block sizes.
pub(crate) fn axis_blocks(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}
