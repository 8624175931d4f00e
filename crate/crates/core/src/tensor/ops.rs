//! Elementwise, linear-algebra and shape operations.

use crate::error::{ChanError, Result};

use super::gemm::{gemm, Strides};
use super::tape::{add_into, axis_blocks, Accumulator, Node, Op, Tape, Var};

impl Tape {
    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(ChanError::shape(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, value, op, &[a, b])
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let value = self.value(a).iter().map(|&x| f(x)).collect();
        let shape = self.shape(a).to_vec();
        self.push(shape, value, op, &[a])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        Ok(self.zip_with(a, b, Op::Add(a, b), |x, y| x + y))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        Ok(self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        Ok(self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        self.map(a, Op::Scale(a, s), |x| x * s)
    }

    fn row_broadcast(&mut self, op_name: &'static str, a: Var, row: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Result<Var> {
        let cols = *self.shape(a).last().unwrap_or(&0);
        if self.value(row).len() != cols {
            return Err(ChanError::shape(op_name, self.shape(a), self.shape(row)));
        }
        let rv = self.value(row);
        let value = self
            .value(a)
            .chunks(cols)
            .flat_map(|chunk| chunk.iter().zip(rv).map(|(&x, &r)| f(x, r)))
            .collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(shape, value, op, &[a, row]))
    }

    /// Adds a vector to every row (broadcast over the last axis).
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.row_broadcast("add_row", a, row, Op::AddRow(a, row), |x, r| x + r)
    }

    /// Multiplies every row elementwise by a vector.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Result<Var> {
        self.row_broadcast("mul_row", a, row, Op::MulRow(a, row), |x, r| x * r)
    }

    fn dims2(&self, op: &'static str, a: Var) -> Result<(usize, usize)> {
        match *self.shape(a) {
            [r, c] => Ok((r, c)),
            _ => Err(ChanError::invalid(op, format!("expected 2-D operand, got {:?}", self.shape(a)))),
        }
    }

    /// `a[m×k] · b[k×n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2("matmul", a)?;
        let (k2, n) = self.dims2("matmul", b)?;
        if k != k2 {
            return Err(ChanError::shape("matmul", self.shape(a), self.shape(b)));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value(a), Strides::row_major(k), self.value(b), Strides::row_major(n), 0.0, &mut out, Strides::row_major(n));
        Ok(self.push(vec![m, n], out, Op::MatMul(a, b), &[a, b]))
    }

    /// `a[m×k] · b[n×k]ᵀ`, the layout of a weight matrix stored `out×in`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.dims2("matmul_nt", a)?;
        let (n, k2) = self.dims2("matmul_nt", b)?;
        if k != k2 {
            return Err(ChanError::shape("matmul_nt", self.shape(a), self.shape(b)));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.value(a), Strides::row_major(k), self.value(b), Strides::transposed(k), 0.0, &mut out, Strides::row_major(n));
        Ok(self.push(vec![m, n], out, Op::MatMulNt(a, b), &[a, b]))
    }

    /// Affine map `x · wᵀ + b` with `w` stored `out×in`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let y = self.matmul_nt(x, w)?;
        match b {
            Some(b) => self.add_row(y, b),
            None => Ok(y),
        }
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.dims2("transpose", a)?;
        let av = self.value(a);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = av[i * c + j];
            }
        }
        Ok(self.push(vec![c, r], out, Op::Transpose(a), &[a]))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, Op::Tanh(a), f64::tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, Op::Sigmoid(a), sigmoid)
    }

    /// Concatenates along `axis`; all other extents must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = *inputs.first().ok_or_else(|| ChanError::invalid("concat", "no inputs"))?;
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return Err(ChanError::invalid("concat", format!("axis {axis} out of range for {base:?}")));
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == base.len() && s.iter().zip(&base).enumerate().all(|(i, (x, y))| i == axis || x == y);
            if !compatible {
                return Err(ChanError::shape("concat", &base, s));
            }
            total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = total;
        let (outer, _, inner) = axis_blocks(&shape, axis);
        let mut out = Vec::with_capacity(outer * total * inner);
        for o in 0..outer {
            for &v in inputs {
                let block = self.shape(v)[axis] * inner;
                out.extend_from_slice(&self.value(v)[o * block..(o + 1) * block]);
            }
        }
        Ok(self.push(shape, out, Op::Concat { inputs: inputs.to_vec(), axis }, inputs))
    }

    /// Contiguous sub-range `start..start+len` along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let in_shape = self.shape(a).to_vec();
        if axis >= in_shape.len() || len == 0 || start + len > in_shape[axis] {
            return Err(ChanError::invalid(
                "slice",
                format!("range {start}..{} invalid on axis {axis} of {in_shape:?}", start + len),
            ));
        }
        let (outer, extent, inner) = axis_blocks(&in_shape, axis);
        let av = self.value(a);
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * extent + start) * inner;
            out.extend_from_slice(&av[base..base + len * inner]);
        }
        let mut shape = in_shape;
        shape[axis] = len;
        Ok(self.push(shape, out, Op::Slice { input: a, axis, start }, &[a]))
    }

    /// Splits along `axis` into consecutive pieces of the given sizes.
    pub fn split(&mut self, a: Var, axis: usize, sizes: &[usize]) -> Result<Vec<Var>> {
        let extent = self.shape(a).get(axis).copied().unwrap_or(0);
        if sizes.iter().sum::<usize>() != extent {
            return Err(ChanError::shape("split", self.shape(a), sizes));
        }
        let mut start = 0;
        let mut parts = Vec::with_capacity(sizes.len());
        for &len in sizes {
            parts.push(self.slice(a, axis, start, len)?);
            start += len;
        }
        Ok(parts)
    }

    fn reduce(&mut self, a: Var, axis: usize, mean: bool) -> Result<Var> {
        let in_shape = self.shape(a).to_vec();
        if axis >= in_shape.len() {
            return Err(ChanError::invalid("reduce", format!("axis {axis} out of range for {in_shape:?}")));
        }
        let (outer, extent, inner) = axis_blocks(&in_shape, axis);
        let av = self.value(a);
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for j in 0..extent {
                let src = &av[(o * extent + j) * inner..][..inner];
                add_into(&mut out[o * inner..(o + 1) * inner], src);
            }
        }
        if mean {
            let s = 1.0 / extent as f64;
            out.iter_mut().for_each(|x| *x *= s);
        }
        let mut shape = in_shape;
        shape.remove(axis);
        if shape.is_empty() {
            shape.push(1);
        }
        let op = if mean { Op::Mean { input: a, axis } } else { Op::Sum { input: a, axis } };
        Ok(self.push(shape, out, op, &[a]))
    }

    /// Sum over `axis`, which is removed from the shape.
    pub fn sum(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.reduce(a, axis, false)
    }

    /// Mean over `axis`, which is removed from the shape.
    pub fn mean(&mut self, a: Var, axis: usize) -> Result<Var> {
        self.reduce(a, axis, true)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        self.push(vec![1], vec![s], Op::SumAll(a), &[a])
    }

    /// Numerically stable softmax along `axis`.
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(a).to_vec();
        if axis >= shape.len() {
            return Err(ChanError::invalid("softmax", format!("axis {axis} out of range for {shape:?}")));
        }
        let (outer, extent, inner) = axis_blocks(&shape, axis);
        let av = self.value(a);
        let mut out = vec![0.0; av.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |j: usize| (o * extent + j) * inner + i;
                let max = (0..extent).map(|j| av[at(j)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for j in 0..extent {
                    let e = (av[at(j)] - max).exp();
                    out[at(j)] = e;
                    total += e;
                }
                for j in 0..extent {
                    out[at(j)] /= total;
                }
            }
        }
        Ok(self.push(shape, out, Op::Softmax { input: a, axis }, &[a]))
    }

    /// Inserts a new axis of extent `n` at position `axis`, repeating the input.
    pub fn expand(&mut self, a: Var, axis: usize, n: usize) -> Result<Var> {
        let in_shape = self.shape(a).to_vec();
        if axis > in_shape.len() || n == 0 {
            return Err(ChanError::invalid("expand", format!("cannot insert axis {axis} of extent {n} into {in_shape:?}")));
        }
        let outer: usize = in_shape[..axis].iter().product();
        let inner: usize = in_shape[axis..].iter().product();
        let av = self.value(a);
        let mut out = Vec::with_capacity(outer * n * inner);
        for o in 0..outer {
            for _ in 0..n {
                out.extend_from_slice(&av[o * inner..(o + 1) * inner]);
            }
        }
        let mut shape = in_shape;
        shape.insert(axis, n);
        Ok(self.push(shape, out, Op::Expand { input: a, axis }, &[a]))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        if shape.iter().product::<usize>() != self.value(a).len() {
            return Err(ChanError::shape("reshape", self.shape(a), shape));
        }
        let value = self.value(a).to_vec();
        Ok(self.push(shape.to_vec(), value, Op::Reshape(a), &[a]))
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(super) fn backward_linear(op: &Op, g: &[f64], acc: &mut Accumulator<'_>) {
    let tape = acc.tape;
    match *op {
        Op::AddRow(a, row) => {
            acc.add(a, |buf| add_into(buf, g));
            let cols = tape.value(row).len();
            acc.add(row, |buf| g.chunks(cols).for_each(|chunk| add_into(buf, chunk)));
        }
        Op::MulRow(a, row) => {
            let cols = tape.value(row).len();
            let (av, rv) = (tape.value(a), tape.value(row));
            acc.add(a, |buf| {
                for (dchunk, gchunk) in buf.chunks_mut(cols).zip(g.chunks(cols)) {
                    for ((d, g), r) in dchunk.iter_mut().zip(gchunk).zip(rv) {
                        *d += g * r;
                    }
                }
            });
            acc.add(row, |buf| {
                for (achunk, gchunk) in av.chunks(cols).zip(g.chunks(cols)) {
                    for ((d, g), x) in buf.iter_mut().zip(gchunk).zip(achunk) {
                        *d += g * x;
                    }
                }
            });
        }
        Op::MatMul(a, b) => {
            let (m, k) = (tape.shape(a)[0], tape.shape(a)[1]);
            let n = tape.shape(b)[1];
            let (av, bv) = (tape.value(a), tape.value(b));
            // dA = G · Bᵀ, dB = Aᵀ · G
            acc.add(a, |buf| gemm(m, n, k, g, Strides::row_major(n), bv, Strides::transposed(n), 1.0, buf, Strides::row_major(k)));
            acc.add(b, |buf| gemm(k, m, n, av, Strides::transposed(k), g, Strides::row_major(n), 1.0, buf, Strides::row_major(n)));
        }
        Op::MatMulNt(a, b) => {
            let (m, k) = (tape.shape(a)[0], tape.shape(a)[1]);
            let n = tape.shape(b)[0];
            let (av, bv) = (tape.value(a), tape.value(b));
            // Y = A·Bᵀ: dA = G · B, dB = Gᵀ · A
            acc.add(a, |buf| gemm(m, n, k, g, Strides::row_major(n), bv, Strides::row_major(k), 1.0, buf, Strides::row_major(k)));
            acc.add(b, |buf| gemm(n, m, k, g, Strides::transposed(n), av, Strides::row_major(k), 1.0, buf, Strides::row_major(k)));
        }
        Op::Transpose(a) => {
            let (r, c) = (tape.shape(a)[0], tape.shape(a)[1]);
            acc.add(a, |buf| {
                for i in 0..r {
                    for j in 0..c {
                        buf[i * c + j] += g[j * r + i];
                    }
                }
            });
        }
        _ => unreachable!("not a linear op: {op:?}"),
    }
}

pub(super) fn backward_structural(node: &Node, g: &[f64], acc: &mut Accumulator<'_>) {
    let tape = acc.tape;
    match &node.op {
        Op::Concat { inputs, axis } => {
            let (outer, total, inner) = axis_blocks(&node.shape, *axis);
            let mut offset = 0;
            for &v in inputs {
                let ext = tape.shape(v)[*axis];
                acc.add(v, |buf| {
                    for o in 0..outer {
                        let src = &g[(o * total + offset) * inner..][..ext * inner];
                        add_into(&mut buf[o * ext * inner..(o + 1) * ext * inner], src);
                    }
                });
                offset += ext;
            }
        }
        Op::Slice { input, axis, start } => {
            let (outer, extent, inner) = axis_blocks(tape.shape(*input), *axis);
            let len = node.shape[*axis];
            acc.add(*input, |buf| {
                for o in 0..outer {
                    let dst = &mut buf[(o * extent + start) * inner..][..len * inner];
                    add_into(dst, &g[o * len * inner..(o + 1) * len * inner]);
                }
            });
        }
        Op::Sum { input, axis } | Op::Mean { input, axis } => {
            let (outer, extent, inner) = axis_blocks(tape.shape(*input), *axis);
            let s = if matches!(node.op, Op::Mean { .. }) { 1.0 / extent as f64 } else { 1.0 };
            acc.add(*input, |buf| {
                for o in 0..outer {
                    for j in 0..extent {
                        let dst = &mut buf[(o * extent + j) * inner..][..inner];
                        for (d, g) in dst.iter_mut().zip(&g[o * inner..(o + 1) * inner]) {
                            *d += g * s;
                        }
                    }
                }
            });
        }
        Op::SumAll(a) => acc.add(*a, |buf| buf.iter_mut().for_each(|d| *d += g[0])),
        Op::Softmax { input, axis } => {
            let (outer, extent, inner) = axis_blocks(&node.shape, *axis);
            let y = &node.value;
            acc.add(*input, |buf| {
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |j: usize| (o * extent + j) * inner + i;
                        let dot: f64 = (0..extent).map(|j| g[at(j)] * y[at(j)]).sum();
                        for j in 0..extent {
                            buf[at(j)] += y[at(j)] * (g[at(j)] - dot);
                        }
                    }
                }
            });
        }
        Op::Expand { input, axis } => {
            let in_shape = tape.shape(*input);
            let outer: usize = in_shape[..*axis].iter().product();
            let inner: usize = in_shape[*axis..].iter().product();
            let n = node.shape[*axis];
            acc.add(*input, |buf| {
                for o in 0..outer {
                    for j in 0..n {
                        add_into(&mut buf[o * inner..(o + 1) * inner], &g[(o * n + j) * inner..][..inner]);
                    }
                }
            });
        }
        Op::Reshape(a) => acc.add(*a, |buf| add_into(buf, g)),
        _ => unreachable!("not a structural op: {:?}", node.op),
    }
}
