//! Temporal (1-D) convolution, pooling and transposed convolution.
//!
//! Sequences are `[time × channels]`; filters are `[taps × in × out]`, so
//! each tap is an `in×out` matrix applied to a shifted copy of the input.

use crate::error::{ChanError, Result};

use super::gemm::{gemm, Strides};
use super::tape::{Accumulator, Node, Op, Tape, Var};

/// Padding mode for [`Tape::conv1d`]. Only length-preserving zero padding
/// is supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Padding {
    #[default]
    Same,
}

struct FilterDims {
    taps: usize,
    cin: usize,
    cout: usize,
}

impl Tape {
    fn seq_dims(&self, op: &'static str, x: Var) -> Result<(usize, usize)> {
        match *self.shape(x) {
            [t, c] => Ok((t, c)),
            _ => Err(ChanError::invalid(op, format!("expected [time × channels], got {:?}", self.shape(x)))),
        }
    }

    fn filter_dims(&self, op: &'static str, x: Var, w: Var) -> Result<FilterDims> {
        let (_, cin) = self.seq_dims(op, x)?;
        match *self.shape(w) {
            [taps, fin, cout] if fin == cin => Ok(FilterDims { taps, cin, cout }),
            _ => Err(ChanError::shape(op, self.shape(x), self.shape(w))),
        }
    }

    /// Dilated convolution, `out[i] = Σ_{t=-k..k} W_t · x[i + d·t]`, with
    /// out-of-range positions contributing zero.
    pub fn conv1d(&mut self, x: Var, w: Var, dilation: usize, _padding: Padding) -> Result<Var> {
        let (len, _) = self.seq_dims("conv1d", x)?;
        let FilterDims { taps, cin, cout } = self.filter_dims("conv1d", x, w)?;
        if taps % 2 == 0 {
            return Err(ChanError::invalid("conv1d", format!("filter length must be odd, got {taps}")));
        }
        if dilation == 0 {
            return Err(ChanError::invalid("conv1d", "dilation must be at least 1"));
        }
        let mut out = vec![0.0; len * cout];
        let (xv, wv) = (self.value(x), self.value(w));
        for_each_tap(len, taps, dilation, |t, lo, hi, src| {
            gemm(
                hi - lo,
                cin,
                cout,
                &xv[src * cin..],
                Strides::row_major(cin),
                &wv[t * cin * cout..][..cin * cout],
                Strides::row_major(cout),
                1.0,
                &mut out[lo * cout..],
                Strides::row_major(cout),
            );
        });
        Ok(self.push(vec![len, cout], out, Op::Conv1d { input: x, filter: w, dilation }, &[x, w]))
    }

    /// Non-overlapping max pooling over time; a trailing partial window is
    /// pooled as-is, so the output has `ceil(len / window)` steps.
    pub fn max_pool1d(&mut self, x: Var, window: usize) -> Result<Var> {
        let (len, ch) = self.seq_dims("max_pool1d", x)?;
        if window == 0 {
            return Err(ChanError::invalid("max_pool1d", "window must be at least 1"));
        }
        let out_len = len.div_ceil(window);
        let xv = self.value(x);
        let mut out = vec![0.0; out_len * ch];
        let mut argmax = vec![0; out_len * ch];
        for o in 0..out_len {
            let start = o * window;
            let end = (start + window).min(len);
            for c in 0..ch {
                let mut best = start;
                for r in start + 1..end {
                    // strict comparison keeps the first maximal index
                    if xv[r * ch + c] > xv[best * ch + c] {
                        best = r;
                    }
                }
                out[o * ch + c] = xv[best * ch + c];
                argmax[o * ch + c] = best * ch + c;
            }
        }
        Ok(self.push(vec![out_len, ch], out, Op::MaxPool1d { input: x, argmax }, &[x]))
    }

    /// Fractionally-strided convolution: `full[i·stride + t] += W_t · x[i]`
    /// over the full length `(len-1)·stride + taps`, then cropped
    /// symmetrically (odd surplus dropped at the end) to `target_len`.
    pub fn conv_transpose1d(&mut self, x: Var, w: Var, stride: usize, target_len: usize) -> Result<Var> {
        let (len, _) = self.seq_dims("conv_transpose1d", x)?;
        let FilterDims { taps, cin, cout } = self.filter_dims("conv_transpose1d", x, w)?;
        if stride == 0 || target_len == 0 {
            return Err(ChanError::invalid("conv_transpose1d", "stride and target length must be positive"));
        }
        let full = (len - 1) * stride + taps;
        if target_len > full {
            return Err(ChanError::invalid(
                "conv_transpose1d",
                format!("target length {target_len} exceeds producible length {full}"),
            ));
        }
        let crop = (full - target_len) / 2;
        let mut out = vec![0.0; target_len * cout];
        let (xv, wv) = (self.value(x), self.value(w));
        for_each_transposed_tap(len, taps, stride, crop, target_len, |t, lo, hi, dst| {
            gemm(
                hi - lo,
                cin,
                cout,
                &xv[lo * cin..],
                Strides::row_major(cin),
                &wv[t * cin * cout..][..cin * cout],
                Strides::row_major(cout),
                1.0,
                &mut out[dst * cout..],
                Strides::row_major(stride * cout),
            );
        });
        let op = Op::ConvTranspose1d { input: x, filter: w, stride, crop };
        Ok(self.push(vec![target_len, cout], out, op, &[x, w]))
    }
}

/// Calls `f(tap, lo, hi, src)` for each tap, where output rows `lo..hi`
/// read input rows `src..src + (hi - lo)`.
fn for_each_tap(len: usize, taps: usize, dilation: usize, mut f: impl FnMut(usize, usize, usize, usize)) {
    let half = (taps / 2) as isize;
    for t in 0..taps {
        let offset = (t as isize - half) * dilation as isize;
        let lo = (-offset).max(0) as usize;
        let hi = (len as isize - offset).min(len as isize);
        if hi <= lo as isize {
            continue;
        }
        f(t, lo, hi as usize, (lo as isize + offset) as usize);
    }
}

/// Calls `f(tap, lo, hi, dst)` for each tap, where input rows `lo..hi`
/// land on output rows `dst, dst + stride, ...`.
fn for_each_transposed_tap(
    len: usize,
    taps: usize,
    stride: usize,
    crop: usize,
    target_len: usize,
    mut f: impl FnMut(usize, usize, usize, usize),
) {
    for t in 0..taps {
        let lo = if crop > t { (crop - t).div_ceil(stride) } else { 0 };
        let top = (target_len + crop) as isize - 1 - t as isize;
        if top < 0 {
            continue;
        }
        let hi = (top as usize / stride + 1).min(len);
        if hi <= lo {
            continue;
        }
        f(t, lo, hi, lo * stride + t - crop);
    }
}

pub(super) fn backward(node: &Node, g: &[f64], acc: &mut Accumulator<'_>) {
    let tape = acc.tape;
    match node.op {
        Op::Conv1d { input, filter, dilation } => {
            let (len, cin) = (tape.shape(input)[0], tape.shape(input)[1]);
            let (taps, cout) = (tape.shape(filter)[0], tape.shape(filter)[2]);
            let (xv, wv) = (tape.value(input), tape.value(filter));
            acc.add(input, |buf| {
                for_each_tap(len, taps, dilation, |t, lo, hi, src| {
                    gemm(
                        hi - lo,
                        cout,
                        cin,
                        &g[lo * cout..],
                        Strides::row_major(cout),
                        &wv[t * cin * cout..][..cin * cout],
                        Strides::transposed(cout),
                        1.0,
                        &mut buf[src * cin..],
                        Strides::row_major(cin),
                    );
                });
            });
            acc.add(filter, |buf| {
                for_each_tap(len, taps, dilation, |t, lo, hi, src| {
                    gemm(
                        cin,
                        hi - lo,
                        cout,
                        &xv[src * cin..],
                        Strides::transposed(cin),
                        &g[lo * cout..],
                        Strides::row_major(cout),
                        1.0,
                        &mut buf[t * cin * cout..][..cin * cout],
                        Strides::row_major(cout),
                    );
                });
            });
        }
        Op::MaxPool1d { input, ref argmax } => acc.add(input, |buf| {
            for (&src, &g) in argmax.iter().zip(g) {
                buf[src] += g;
            }
        }),
        Op::ConvTranspose1d { input, filter, stride, crop } => {
            let (len, cin) = (tape.shape(input)[0], tape.shape(input)[1]);
            let (taps, cout) = (tape.shape(filter)[0], tape.shape(filter)[2]);
            let target_len = node.shape[0];
            let (xv, wv) = (tape.value(input), tape.value(filter));
            acc.add(input, |buf| {
                for_each_transposed_tap(len, taps, stride, crop, target_len, |t, lo, hi, dst| {
                    gemm(
                        hi - lo,
                        cout,
                        cin,
                        &g[dst * cout..],
                        Strides::row_major(stride * cout),
                        &wv[t * cin * cout..][..cin * cout],
                        Strides::transposed(cout),
                        1.0,
                        &mut buf[lo * cin..],
                        Strides::row_major(cin),
                    );
                });
            });
            acc.add(filter, |buf| {
                for_each_transposed_tap(len, taps, stride, crop, target_len, |t, lo, hi, dst| {
                    gemm(
                        cin,
                        hi - lo,
                        cout,
                        &xv[lo * cin..],
                        Strides::transposed(cin),
                        &g[dst * cout..],
                        Strides::row_major(stride * cout),
                        1.0,
                        &mut buf[t * cin * cout..][..cin * cout],
                        Strides::row_major(cout),
                    );
                });
            });
        }
        _ => unreachable!("not a convolution op: {:?}", node.op),
    }
}
