//! Reverse-mode differentiation over a linear record of layer-level ops.
//!
//! Every op pushes one node holding its output value. `backward` walks the
//! nodes from the loss towards the leaves, so the record is topologically
//! ordered by construction.

use super::kernels::{col2im_add, gemm, im2col, ConvGeom};
use super::ops::{check_targets, log_softmax_row, softmax_row};
use super::Tensor;
use crate::error::{GgdError, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Linear {
        x: Var,
        w: Var,
        b: Var,
    },
    Relu {
        x: Var,
    },
    Conv2d {
        x: Var,
        w: Var,
        b: Var,
        geom: ConvGeom,
        cols: Option<Vec<f64>>,
    },
    ChannelAffine {
        x: Var,
        scale: Var,
        shift: Var,
    },
    GlobalAvgPool {
        x: Var,
    },
    Add {
        a: Var,
        b: Var,
    },
    Scale {
        a: Var,
        factor: f64,
    },
    Sum {
        a: Var,
    },
    CrossEntropy {
        logits: Var,
        // d loss / d logits, precomputed in closed form
        dlogits: Vec<f64>,
    },
    SquaredError {
        pred: Var,
        residual: Vec<f64>,
    },
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => Vec::new(),
            Op::Linear { x, w, b } | Op::Conv2d { x, w, b, .. } => vec![*x, *w, *b],
            Op::ChannelAffine { x, scale, shift } => vec![*x, *scale, *shift],
            Op::Add { a, b } => vec![*a, *b],
            Op::Relu { x } | Op::GlobalAvgPool { x } => vec![*x],
            Op::Scale { a, .. } | Op::Sum { a } => vec![*a],
            Op::CrossEntropy { logits, .. } => vec![*logits],
            Op::SquaredError { pred, .. } => vec![*pred],
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    /// False for constants and values computed only from constants.
    tracked: bool,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    lens: Vec<usize>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; `None` when `v` is not on a
    /// path to the loss.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient with respect to `v`, zero-filled when `v` does not reach the loss.
    pub fn wrt(&self, v: Var) -> Vec<f64> {
        self.get(v)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; self.lens[v.0]])
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn dims4(t: &Tensor, layer: &str) -> Result<(usize, usize, usize, usize)> {
    match *t.shape() {
        [b, c, h, w] => Ok((b, c, h, w)),
        ref s => Err(GgdError::dim(
            layer,
            format!("expected (batch, channels, height, width), got {s:?}"),
        )),
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let tracked = op.inputs().iter().any(|v| self.nodes[v.0].tracked);
        self.push_node(value, op, tracked)
    }

    fn push_node(&mut self, value: Tensor, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Records a parameter or any other value to differentiate against.
    /// Gradients flow into leaves but stop there.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        let mut value = value;
        value.zero_grad();
        self.push_node(value, Op::Leaf, true)
    }

    /// Records a value that never needs a gradient, such as an input batch.
    /// Backward skips it and everything computed only from constants.
    pub fn constant(&mut self, value: Tensor) -> Var {
        let mut value = value;
        value.zero_grad();
        self.push_node(value, Op::Leaf, false)
    }

    /// `x W + b` over the flattened trailing axes of `x`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xv, wv, bv) = (self.value(x), self.value(w), self.value(b));
        let batch = xv.rows();
        let inputs = xv.row_len();
        let (w_in, w_out) = match *wv.shape() {
            [i, o] => (i, o),
            ref s => return Err(GgdError::dim("Linear", format!("weight shape {s:?}"))),
        };
        if w_in != inputs {
            return Err(GgdError::dim(
                "Linear",
                format!("input features {inputs} (shape {:?}) vs weight rows {w_in}", xv.shape()),
            ));
        }
        if bv.len() != w_out {
            return Err(GgdError::dim(
                "Linear",
                format!("bias length {} vs output features {w_out}", bv.len()),
            ));
        }
        let mut out = Vec::with_capacity(batch * w_out);
        for _ in 0..batch {
            out.extend_from_slice(bv.data());
        }
        gemm(batch, inputs, w_out, xv.data(), false, wv.data(), false, 1.0, &mut out);
        let value = Tensor::new(vec![batch, w_out], out)?;
        Ok(self.push(value, Op::Linear { x, w, b }))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.max(0.0));
        self.push(value, Op::Relu { x })
    }

    /// Cross-correlation with "same" padding (`kernel / 2` on each side).
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize) -> Result<Var> {
        let (batch, in_ch, height, width) = dims4(self.value(x), "Conv2D")?;
        let (out_ch, w_in, kernel) = match *self.value(w).shape() {
            [o, i, kh, kw] if kh == kw => (o, i, kh),
            ref s => return Err(GgdError::dim("Conv2D", format!("weight shape {s:?}"))),
        };
        if w_in != in_ch {
            return Err(GgdError::dim(
                "Conv2D",
                format!("input channels {in_ch} vs weight input channels {w_in}"),
            ));
        }
        if kernel % 2 == 0 || stride == 0 {
            return Err(GgdError::dim(
                "Conv2D",
                format!("kernel {kernel} must be odd and stride {stride} positive"),
            ));
        }
        if self.value(b).len() != out_ch {
            return Err(GgdError::dim(
                "Conv2D",
                format!("bias length {} vs output channels {out_ch}", self.value(b).len()),
            ));
        }
        let geom = ConvGeom {
            in_ch,
            height,
            width,
            kernel,
            stride,
        };
        let (rows, ncols) = (geom.col_rows(), geom.col_cols());
        let in_len = in_ch * height * width;
        let xv = self.value(x).data();
        let wv = self.value(w).data();
        let bv = self.value(b).data();
        let mut out = vec![0.0; batch * out_ch * ncols];
        let mut cols = if geom.is_pointwise() {
            None
        } else {
            Some(vec![0.0; batch * rows * ncols])
        };
        for n in 0..batch {
            let image = &xv[n * in_len..(n + 1) * in_len];
            let col: &[f64] = match cols.as_mut() {
                Some(buf) => {
                    let slot = &mut buf[n * rows * ncols..(n + 1) * rows * ncols];
                    im2col(&geom, image, slot);
                    slot
                }
                None => image,
            };
            let dst = &mut out[n * out_ch * ncols..(n + 1) * out_ch * ncols];
            for (o, plane) in dst.chunks_mut(ncols).enumerate() {
                plane.fill(bv[o]);
            }
            gemm(out_ch, rows, ncols, wv, false, col, false, 1.0, dst);
        }
        let value = Tensor::new(vec![batch, out_ch, geom.out_height(), geom.out_width()], out)?;
        Ok(self.push(value, Op::Conv2d { x, w, b, geom, cols }))
    }

    /// `x[:, c, ...] * scale[c] + shift[c]`.
    pub fn channel_affine(&mut self, x: Var, scale: Var, shift: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.shape().len() < 2 {
            return Err(GgdError::dim("ChannelAffine", format!("input shape {:?}", xv.shape())));
        }
        let ch = xv.shape()[1];
        let (sv, tv) = (self.value(scale), self.value(shift));
        if sv.len() != ch || tv.len() != ch {
            return Err(GgdError::dim(
                "ChannelAffine",
                format!("channels {ch} vs scale {} / shift {}", sv.len(), tv.len()),
            ));
        }
        let inner = xv.len() / (xv.rows() * ch);
        let mut out = xv.data().to_vec();
        for (k, plane) in out.chunks_mut(inner).enumerate() {
            let (s, t) = (sv.data()[k % ch], tv.data()[k % ch]);
            for v in plane {
                *v = *v * s + t;
            }
        }
        let value = Tensor::new(xv.shape().to_vec(), out)?;
        Ok(self.push(value, Op::ChannelAffine { x, scale, shift }))
    }

    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let (batch, ch, h, w) = dims4(self.value(x), "GlobalAvgPool")?;
        let area = (h * w) as f64;
        let out: Vec<f64> = self
            .value(x)
            .data()
            .chunks(h * w)
            .map(|p| p.iter().sum::<f64>() / area)
            .collect();
        let value = Tensor::new(vec![batch, ch], out)?;
        Ok(self.push(value, Op::GlobalAvgPool { x }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self
            .value(a)
            .zip_with(self.value(b), |p, q| p + q)
            .map_err(|e| GgdError::dim("Add", e.to_string()))?;
        Ok(self.push(value, Op::Add { a, b }))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|v| v * factor);
        self.push(value, Op::Scale { a, factor })
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(total), Op::Sum { a })
    }

    /// Mean over rows of `-sum_j w_j log softmax_j(z)`, with the
    /// closed-form gradient `(softmax(z) * sum_j w_j - w) / rows`.
    pub fn cross_entropy_soft(&mut self, logits: Var, targets: &Tensor) -> Result<Var> {
        let zv = self.value(logits);
        check_targets(zv, targets)?;
        if !zv.is_finite() {
            return Err(GgdError::Numeric("cross-entropy logits are not finite".into()));
        }
        let c = *zv.shape().last().expect("non-empty shape");
        let rows = zv.len() / c;
        let mut loss = 0.0;
        let mut dlogits = vec![0.0; zv.len()];
        let mut logp = vec![0.0; c];
        for ((z, w), d) in zv
            .data()
            .chunks(c)
            .zip(targets.data().chunks(c))
            .zip(dlogits.chunks_mut(c))
        {
            log_softmax_row(z, &mut logp);
            loss -= w.iter().zip(&logp).map(|(a, b)| a * b).sum::<f64>();
            softmax_row(z, d);
            let mass: f64 = w.iter().sum();
            for (dj, wj) in d.iter_mut().zip(w) {
                *dj = (*dj * mass - wj) / rows as f64;
            }
        }
        let value = Tensor::scalar(loss / rows as f64);
        Ok(self.push(value, Op::CrossEntropy { logits, dlogits }))
    }

    /// `0.5 * sum (pred - target)^2 / rows`.
    pub fn squared_error(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        let pv = self.value(pred);
        if pv.shape() != target.shape() {
            return Err(GgdError::dim(
                "SquaredError",
                format!("prediction {:?} vs target {:?}", pv.shape(), target.shape()),
            ));
        }
        let rows = pv.rows() as f64;
        let residual: Vec<f64> = pv.data().iter().zip(target.data()).map(|(p, t)| p - t).collect();
        let loss = 0.5 * residual.iter().map(|r| r * r).sum::<f64>() / rows;
        Ok(self.push(Tensor::scalar(loss), Op::SquaredError { pred, residual }))
    }

    /// Propagates `d loss / d node` from a scalar `loss` back to every node
    /// recorded before it.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(GgdError::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            grads,
            lens: self.nodes.iter().map(|n| n.value.len()).collect(),
        })
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let mut acc = |v: Var, contrib: &dyn Fn(&mut [f64])| {
            if !self.nodes[v.0].tracked {
                return;
            }
            let len = self.nodes[v.0].value.len();
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; len]);
            contrib(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::Linear { x, w, b } => {
                let xv = self.value(*x);
                let wv = self.value(*w);
                let (batch, inputs) = (xv.rows(), xv.row_len());
                let outputs = wv.shape()[1];
                acc(*w, &|dw| {
                    gemm(inputs, batch, outputs, xv.data(), true, g, false, 1.0, dw)
                });
                acc(*b, &|db| {
                    for row in g.chunks(outputs) {
                        for (d, r) in db.iter_mut().zip(row) {
                            *d += r;
                        }
                    }
                });
                acc(*x, &|dx| {
                    gemm(batch, outputs, inputs, g, false, wv.data(), true, 1.0, dx)
                });
            }
            Op::Relu { x } => {
                let xv = self.value(*x).data();
                acc(*x, &|dx| {
                    for ((d, &v), &gi) in dx.iter_mut().zip(xv).zip(g) {
                        if v > 0.0 {
                            *d += gi;
                        }
                    }
                });
            }
            Op::Conv2d { x, w, b, geom, cols } => {
                let xv = self.value(*x).data();
                let wv = self.value(*w);
                let batch = self.value(*x).rows();
                let out_ch = wv.shape()[0];
                let (rows, ncols) = (geom.col_rows(), geom.col_cols());
                let in_len = geom.in_ch * geom.height * geom.width;
                let col_of = |n: usize| -> &[f64] {
                    match cols {
                        Some(buf) => &buf[n * rows * ncols..(n + 1) * rows * ncols],
                        None => &xv[n * in_len..(n + 1) * in_len],
                    }
                };
                acc(*w, &|dw| {
                    for n in 0..batch {
                        let gn = &g[n * out_ch * ncols..(n + 1) * out_ch * ncols];
                        gemm(out_ch, ncols, rows, gn, false, col_of(n), true, 1.0, dw);
                    }
                });
                acc(*b, &|db| {
                    for n in 0..batch {
                        let gn = &g[n * out_ch * ncols..(n + 1) * out_ch * ncols];
                        for (d, plane) in db.iter_mut().zip(gn.chunks(ncols)) {
                            *d += plane.iter().sum::<f64>();
                        }
                    }
                });
                acc(*x, &|dx| {
                    let mut dcol = vec![0.0; rows * ncols];
                    for n in 0..batch {
                        let gn = &g[n * out_ch * ncols..(n + 1) * out_ch * ncols];
                        let dxn = &mut dx[n * in_len..(n + 1) * in_len];
                        if geom.is_pointwise() {
                            gemm(rows, out_ch, ncols, wv.data(), true, gn, false, 1.0, dxn);
                        } else {
                            gemm(rows, out_ch, ncols, wv.data(), true, gn, false, 0.0, &mut dcol);
                            col2im_add(geom, &dcol, dxn);
                        }
                    }
                });
            }
            Op::ChannelAffine { x, scale, shift } => {
                let xv = self.value(*x);
                let sv = self.value(*scale).data();
                let ch = xv.shape()[1];
                let inner = xv.len() / (xv.rows() * ch);
                acc(*scale, &|ds| {
                    for (k, (gp, xp)) in g.chunks(inner).zip(xv.data().chunks(inner)).enumerate() {
                        ds[k % ch] += gp.iter().zip(xp).map(|(a, b)| a * b).sum::<f64>();
                    }
                });
                acc(*shift, &|dt| {
                    for (k, gp) in g.chunks(inner).enumerate() {
                        dt[k % ch] += gp.iter().sum::<f64>();
                    }
                });
                acc(*x, &|dx| {
                    for (k, (dp, gp)) in dx.chunks_mut(inner).zip(g.chunks(inner)).enumerate() {
                        let s = sv[k % ch];
                        for (d, gi) in dp.iter_mut().zip(gp) {
                            *d += gi * s;
                        }
                    }
                });
            }
            Op::GlobalAvgPool { x } => {
                let (_, _, h, w) = dims4(self.value(*x), "GlobalAvgPool").expect("checked forward");
                let area = (h * w) as f64;
                acc(*x, &|dx| {
                    for (plane, &gi) in dx.chunks_mut(h * w).zip(g) {
                        for d in plane {
                            *d += gi / area;
                        }
                    }
                });
            }
            Op::Add { a, b } => {
                for v in [*a, *b] {
                    acc(v, &|d| {
                        for (di, gi) in d.iter_mut().zip(g) {
                            *di += gi;
                        }
                    });
                }
            }
            Op::Scale { a, factor } => acc(*a, &|d| {
                for (di, gi) in d.iter_mut().zip(g) {
                    *di += gi * factor;
                }
            }),
            Op::Sum { a } => acc(*a, &|d| {
                for di in d.iter_mut() {
                    *di += g[0];
                }
            }),
            Op::CrossEntropy { logits, dlogits } => acc(*logits, &|d| {
                for (di, dl) in d.iter_mut().zip(dlogits) {
                    *di += g[0] * dl;
                }
            }),
            Op::SquaredError { pred, residual } => {
                let rows = self.value(*pred).rows() as f64;
                acc(*pred, &|d| {
                    for (di, r) in d.iter_mut().zip(residual) {
                        *di += g[0] * r / rows;
                    }
                });
            }
        }
    }
}
