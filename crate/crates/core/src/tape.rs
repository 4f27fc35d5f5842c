//! Batched jet propagation through layer-level models and reverse accumulation
//! of parameter gradients for scalar functionals of the output jets.
//!
//! Tensors are laid out `[neuron][point][component]`. The component block of a
//! neuron at one point is one of three [`JetLayout`]s; every layout is closed
//! under the linear layers, so convolutions and dense layers act on whole
//! component blocks at once through a single GEMM.

use std::cell::Cell;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::jet::{packed_len, Jet2};

/// Which derivative data each neuron carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JetLayout {
    /// Value only.
    Value,
    /// Value, gradient, `tr H` and `xᵀ H x` where `x` is the input point.
    /// Enough for the Laplace-Beltrami operator at `O(d)` cost per neuron.
    Laplacian,
    /// Value, gradient and packed Hessian.
    Full,
}

impl JetLayout {
    pub fn components(self, d: usize) -> usize {
        match self {
            JetLayout::Value => 1,
            JetLayout::Laplacian => d + 3,
            JetLayout::Full => 1 + d + packed_len(d),
        }
    }
}

impl fmt::Display for JetLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JetLayout::Value => "value",
            JetLayout::Laplacian => "laplacian",
            JetLayout::Full => "full",
        })
    }
}

/// One layer-level primitive. Parameter offsets index the flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    /// Multi-channel Toeplitz convolution, zero padded: `d_out = d_in + S − 1`.
    /// Kernel is `[c_out][c_in][S]` at `offset`.
    Conv {
        c_in: usize,
        c_out: usize,
        d_in: usize,
        kernel: usize,
        offset: usize,
    },
    /// `W x` with `W` row-major `[n_out][n_in]` at `offset`.
    Dense {
        n_in: usize,
        n_out: usize,
        offset: usize,
    },
    /// Subtracts `b[n]` from the value component of neuron `n`.
    Bias {
        n: usize,
        offset: usize,
    },
    Activation {
        n: usize,
        act: Activation,
    },
    /// Keeps positions `stride−1, 2·stride−1, …` of each channel, channels concatenated.
    Downsample {
        channels: usize,
        d_in: usize,
        stride: usize,
    },
}

impl Op {
    pub fn inputs(&self) -> usize {
        match *self {
            Op::Conv { c_in, d_in, .. } => c_in * d_in,
            Op::Dense { n_in, .. } => n_in,
            Op::Bias { n, .. } | Op::Activation { n, .. } => n,
            Op::Downsample { channels, d_in, .. } => channels * d_in,
        }
    }

    pub fn outputs(&self) -> usize {
        match *self {
            Op::Conv {
                c_out,
                d_in,
                kernel,
                ..
            } => c_out * (d_in + kernel - 1),
            Op::Dense { n_out, .. } => n_out,
            Op::Bias { n, .. } | Op::Activation { n, .. } => n,
            Op::Downsample {
                channels,
                d_in,
                stride,
            } => channels * (d_in / stride),
        }
    }

    /// `(offset, len)` of the parameters read by this op.
    pub fn params(&self) -> Option<(usize, usize)> {
        match *self {
            Op::Conv {
                c_in,
                c_out,
                kernel,
                offset,
                ..
            } => Some((offset, c_out * c_in * kernel)),
            Op::Dense {
                n_in,
                n_out,
                offset,
            } => Some((offset, n_in * n_out)),
            Op::Bias { n, offset } => Some((offset, n)),
            _ => None,
        }
    }
}

/// A straight-line sequence of ops mapping `R^d` to a scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    input_dim: usize,
    ops: Vec<(String, Op)>,
    n_params: usize,
}

impl Model {
    pub fn new(input_dim: usize, ops: Vec<(String, Op)>, n_params: usize) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::invalid("input_dim", "must be positive"));
        }
        let mut width = input_dim;
        for (name, op) in &ops {
            if op.inputs() != width {
                return Err(Error::invalid(
                    "ops",
                    format!("layer `{name}` expects {} inputs, got {width}", op.inputs()),
                ));
            }
            if let Op::Downsample { stride, d_in, .. } = op {
                if *stride == 0 || d_in < stride {
                    return Err(Error::invalid(
                        "ops",
                        format!("layer `{name}` downsamples width {d_in} by {stride}"),
                    ));
                }
            }
            if let Some((off, len)) = op.params() {
                if off + len > n_params {
                    return Err(Error::invalid(
                        "ops",
                        format!("layer `{name}` reads parameters past {n_params}"),
                    ));
                }
            }
            width = op.outputs();
        }
        if width != 1 {
            return Err(Error::invalid(
                "ops",
                format!("model output width is {width}, not 1"),
            ));
        }
        Ok(Self {
            input_dim,
            ops,
            n_params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn ops(&self) -> &[(String, Op)] {
        &self.ops
    }

    fn check(&self, params: &[f64], points: &[f64]) -> Result<usize> {
        if params.len() != self.n_params {
            return Err(Error::invalid(
                "params",
                format!(
                    "expected {} parameters, got {}",
                    self.n_params,
                    params.len()
                ),
            ));
        }
        if points.is_empty() || !points.len().is_multiple_of(self.input_dim) {
            return Err(Error::invalid(
                "points",
                "expected a non-empty batch of points",
            ));
        }
        Ok(points.len() / self.input_dim)
    }

    /// Runs the batch forward and keeps every intermediate tensor for a backward pass.
    pub fn record<'p>(
        &self,
        params: &'p [f64],
        points: &[f64],
        layout: JetLayout,
    ) -> Result<Trace<'p>> {
        let batch = self.check(params, points)?;
        let ctx = Ctx::new(self.input_dim, batch, layout, points);
        let mut tensors = Vec::with_capacity(self.ops.len() + 1);
        tensors.push(ctx.seed());
        for (name, op) in &self.ops {
            let out = ctx.forward(op, tensors.last().unwrap(), params);
            ctx.check_finite(name, op, &out)?;
            tensors.push(out);
        }
        Ok(Trace {
            model: self.clone(),
            params,
            ctx,
            tensors,
            consumed: false,
        })
    }

    /// Forward pass keeping only the output.
    pub fn forward(
        &self,
        params: &[f64],
        points: &[f64],
        layout: JetLayout,
    ) -> Result<ForwardPass> {
        let batch = self.check(params, points)?;
        let ctx = Ctx::new(self.input_dim, batch, layout, points);
        let mut cur = ctx.seed();
        for (name, op) in &self.ops {
            let out = ctx.forward(op, &cur, params);
            ctx.check_finite(name, op, &out)?;
            cur = out;
        }
        Ok(ForwardPass { ctx, output: cur })
    }

    /// Forward pass without a trace; returns the `[point][component]` output.
    pub fn evaluate(&self, params: &[f64], points: &[f64], layout: JetLayout) -> Result<Vec<f64>> {
        Ok(self.forward(params, points, layout)?.output)
    }

    /// Output jet at a single point.
    pub fn forward_jet(&self, params: &[f64], x: &[f64]) -> Result<Jet2> {
        if x.len() != self.input_dim {
            return Err(Error::invalid("x", "dimension mismatch"));
        }
        let out = self.evaluate(params, x, JetLayout::Full)?;
        let d = self.input_dim;
        Ok(Jet2 {
            value: out[0],
            grad: out[1..1 + d].to_vec(),
            hess: out[1 + d..].to_vec(),
        })
    }
}

#[derive(Clone, Debug)]
struct Ctx {
    d: usize,
    batch: usize,
    layout: JetLayout,
    k: usize,
    points: Vec<f64>,
}

impl Ctx {
    fn new(d: usize, batch: usize, layout: JetLayout, points: &[f64]) -> Self {
        Self {
            d,
            batch,
            layout,
            k: layout.components(d),
            points: points.to_vec(),
        }
    }

    /// Row length of one neuron.
    fn row(&self) -> usize {
        self.batch * self.k
    }

    fn seed(&self) -> Vec<f64> {
        let (d, k, row) = (self.d, self.k, self.row());
        let mut t = vec![0.0; d * row];
        for i in 0..d {
            for b in 0..self.batch {
                let base = i * row + b * k;
                t[base] = self.points[b * d + i];
                if self.layout != JetLayout::Value {
                    t[base + 1 + i] = 1.0;
                }
            }
        }
        t
    }

    fn check_finite(&self, name: &str, op: &Op, t: &[f64]) -> Result<()> {
        if matches!(op, Op::Activation { .. } | Op::Dense { .. })
            && !t.iter().all(|v| v.is_finite())
        {
            return Err(Error::non_finite(format!("layer `{name}`")));
        }
        Ok(())
    }

    fn forward(&self, op: &Op, input: &[f64], params: &[f64]) -> Vec<f64> {
        let row = self.row();
        let mut out = vec![0.0; op.outputs() * row];
        match *op {
            Op::Conv {
                c_in,
                c_out,
                d_in,
                kernel,
                offset,
            } => {
                let d_out = d_in + kernel - 1;
                let w = &params[offset..offset + c_out * c_in * kernel];
                for s in 0..kernel {
                    // out[co][q + s] += Σ_ci w[co][ci][s] · in[ci][q]
                    unsafe {
                        matrixmultiply::dgemm(
                            c_out,
                            c_in,
                            d_in * row,
                            1.0,
                            w.as_ptr().add(s),
                            (c_in * kernel) as isize,
                            kernel as isize,
                            input.as_ptr(),
                            (d_in * row) as isize,
                            1,
                            1.0,
                            out.as_mut_ptr().add(s * row),
                            (d_out * row) as isize,
                            1,
                        );
                    }
                }
            }
            Op::Dense {
                n_in,
                n_out,
                offset,
            } => unsafe {
                matrixmultiply::dgemm(
                    n_out,
                    n_in,
                    row,
                    1.0,
                    params.as_ptr().add(offset),
                    n_in as isize,
                    1,
                    input.as_ptr(),
                    row as isize,
                    1,
                    0.0,
                    out.as_mut_ptr(),
                    row as isize,
                    1,
                );
            },
            Op::Bias { n, offset } => {
                out.copy_from_slice(input);
                for i in 0..n {
                    let b = params[offset + i];
                    for p in 0..self.batch {
                        out[i * row + p * self.k] -= b;
                    }
                }
            }
            Op::Activation { n, act } => {
                for i in 0..n {
                    for p in 0..self.batch {
                        let base = i * row + p * self.k;
                        self.activate(
                            act,
                            &input[base..base + self.k],
                            &mut out[base..base + self.k],
                            p,
                        );
                    }
                }
            }
            Op::Downsample {
                channels,
                d_in,
                stride,
            } => {
                let d_out = d_in / stride;
                for c in 0..channels {
                    for i in 0..d_out {
                        let src = (c * d_in + (i + 1) * stride - 1) * row;
                        let dst = (c * d_out + i) * row;
                        out[dst..dst + row].copy_from_slice(&input[src..src + row]);
                    }
                }
            }
        }
        out
    }

    fn point(&self, p: usize) -> &[f64] {
        &self.points[p * self.d..(p + 1) * self.d]
    }

    fn activate(&self, act: Activation, a: &[f64], y: &mut [f64], p: usize) {
        let d = self.d;
        let [g0, g1, g2, _] = act.derivatives(a[0]);
        y[0] = g0;
        if self.layout == JetLayout::Value {
            return;
        }
        let g = &a[1..1 + d];
        for i in 0..d {
            y[1 + i] = g1 * g[i];
        }
        match self.layout {
            JetLayout::Laplacian => {
                let x = self.point(p);
                let (mut sq, mut radial) = (0.0, 0.0);
                for i in 0..d {
                    sq += g[i] * g[i];
                    radial += x[i] * g[i];
                }
                y[1 + d] = g1 * a[1 + d] + g2 * sq;
                y[2 + d] = g1 * a[2 + d] + g2 * radial * radial;
            }
            JetLayout::Full => {
                let h = &a[1 + d..];
                let yh = &mut y[1 + d..];
                let mut idx = 0;
                for i in 0..d {
                    for j in i..d {
                        yh[idx] = g1 * h[idx] + g2 * g[i] * g[j];
                        idx += 1;
                    }
                }
            }
            JetLayout::Value => unreachable!(),
        }
    }

    /// Adjoint of [`Ctx::activate`]: writes the input adjoint `abar` from the output adjoint `ybar`.
    fn activate_adjoint(
        &self,
        act: Activation,
        a: &[f64],
        ybar: &[f64],
        abar: &mut [f64],
        p: usize,
    ) {
        let d = self.d;
        let [_, g1, g2, g3] = act.derivatives(a[0]);
        if self.layout == JetLayout::Value {
            abar[0] = ybar[0] * g1;
            return;
        }
        let g = &a[1..1 + d];
        let gbar = &ybar[1..1 + d];
        let mut vbar = ybar[0] * g1;
        let mut dot = 0.0;
        for i in 0..d {
            dot += gbar[i] * g[i];
            abar[1 + i] = g1 * gbar[i];
        }
        vbar += g2 * dot;
        match self.layout {
            JetLayout::Laplacian => {
                let x = self.point(p);
                let (mut sq, mut radial) = (0.0, 0.0);
                for i in 0..d {
                    sq += g[i] * g[i];
                    radial += x[i] * g[i];
                }
                let (tr, q) = (a[1 + d], a[2 + d]);
                let (trbar, qbar) = (ybar[1 + d], ybar[2 + d]);
                vbar += trbar * (g2 * tr + g3 * sq) + qbar * (g2 * q + g3 * radial * radial);
                let ct = 2.0 * g2 * trbar;
                let cq = 2.0 * g2 * radial * qbar;
                for i in 0..d {
                    abar[1 + i] += ct * g[i] + cq * x[i];
                }
                abar[1 + d] = g1 * trbar;
                abar[2 + d] = g1 * qbar;
            }
            JetLayout::Full => {
                let h = &a[1 + d..];
                let hbar = &ybar[1 + d..];
                let mut idx = 0;
                for i in 0..d {
                    for j in i..d {
                        let w = hbar[idx];
                        vbar += w * (g2 * h[idx] + g3 * g[i] * g[j]);
                        abar[1 + i] += g2 * w * g[j];
                        abar[1 + j] += g2 * w * g[i];
                        abar[1 + d + idx] = g1 * w;
                        idx += 1;
                    }
                }
            }
            JetLayout::Value => unreachable!(),
        }
        abar[0] = vbar;
    }

    /// Accumulates parameter adjoints into `grad`; returns the input adjoint when `need_input`.
    fn backward(
        &self,
        op: &Op,
        input: &[f64],
        out_bar: Vec<f64>,
        params: &[f64],
        grad: &mut [f64],
        need_input: bool,
    ) -> Vec<f64> {
        let row = self.row();
        match *op {
            Op::Conv {
                c_in,
                c_out,
                d_in,
                kernel,
                offset,
            } => {
                let d_out = d_in + kernel - 1;
                let w = &params[offset..offset + c_out * c_in * kernel];
                let gw = &mut grad[offset..offset + c_out * c_in * kernel];
                let mut in_bar = if need_input {
                    vec![0.0; c_in * d_in * row]
                } else {
                    Vec::new()
                };
                for s in 0..kernel {
                    unsafe {
                        // gw[co][ci][s] += Σ_{q,col} out_bar[co][q + s][col] · in[ci][q][col]
                        matrixmultiply::dgemm(
                            c_out,
                            d_in * row,
                            c_in,
                            1.0,
                            out_bar.as_ptr().add(s * row),
                            (d_out * row) as isize,
                            1,
                            input.as_ptr(),
                            1,
                            (d_in * row) as isize,
                            1.0,
                            gw.as_mut_ptr().add(s),
                            (c_in * kernel) as isize,
                            kernel as isize,
                        );
                        if need_input {
                            // in_bar[ci][q] += Σ_co w[co][ci][s] · out_bar[co][q + s]
                            matrixmultiply::dgemm(
                                c_in,
                                c_out,
                                d_in * row,
                                1.0,
                                w.as_ptr().add(s),
                                kernel as isize,
                                (c_in * kernel) as isize,
                                out_bar.as_ptr().add(s * row),
                                (d_out * row) as isize,
                                1,
                                1.0,
                                in_bar.as_mut_ptr(),
                                (d_in * row) as isize,
                                1,
                            );
                        }
                    }
                }
                in_bar
            }
            Op::Dense {
                n_in,
                n_out,
                offset,
            } => {
                let mut in_bar = if need_input {
                    vec![0.0; n_in * row]
                } else {
                    Vec::new()
                };
                unsafe {
                    matrixmultiply::dgemm(
                        n_out,
                        row,
                        n_in,
                        1.0,
                        out_bar.as_ptr(),
                        row as isize,
                        1,
                        input.as_ptr(),
                        1,
                        row as isize,
                        1.0,
                        grad.as_mut_ptr().add(offset),
                        n_in as isize,
                        1,
                    );
                    if need_input {
                        matrixmultiply::dgemm(
                            n_in,
                            n_out,
                            row,
                            1.0,
                            params.as_ptr().add(offset),
                            1,
                            n_in as isize,
                            out_bar.as_ptr(),
                            row as isize,
                            1,
                            0.0,
                            in_bar.as_mut_ptr(),
                            row as isize,
                            1,
                        );
                    }
                }
                in_bar
            }
            Op::Bias { n, offset } => {
                for i in 0..n {
                    let mut acc = 0.0;
                    for p in 0..self.batch {
                        acc += out_bar[i * row + p * self.k];
                    }
                    grad[offset + i] -= acc;
                }
                out_bar
            }
            Op::Activation { n, act } => {
                let mut in_bar = vec![0.0; n * row];
                for i in 0..n {
                    for p in 0..self.batch {
                        let base = i * row + p * self.k;
                        let r = base..base + self.k;
                        self.activate_adjoint(
                            act,
                            &input[r.clone()],
                            &out_bar[r.clone()],
                            &mut in_bar[r],
                            p,
                        );
                    }
                }
                in_bar
            }
            Op::Downsample {
                channels,
                d_in,
                stride,
            } => {
                let d_out = d_in / stride;
                let mut in_bar = vec![0.0; channels * d_in * row];
                for c in 0..channels {
                    for i in 0..d_out {
                        let dst = (c * d_in + (i + 1) * stride - 1) * row;
                        let src = (c * d_out + i) * row;
                        in_bar[dst..dst + row].copy_from_slice(&out_bar[src..src + row]);
                    }
                }
                in_bar
            }
        }
    }
}

/// Read-only view of the output jets of a batch.
///
/// Reading a component the layout does not carry returns NaN and marks the
/// view so the caller can report [`Error::ComponentNotRecorded`].
pub struct OutputJets<'a> {
    ctx: &'a Ctx,
    data: &'a [f64],
    missing: Cell<Option<JetLayout>>,
}

impl<'a> OutputJets<'a> {
    fn new(ctx: &'a Ctx, data: &'a [f64]) -> Self {
        Self {
            ctx,
            data,
            missing: Cell::new(None),
        }
    }

    pub fn len(&self) -> usize {
        self.ctx.batch
    }

    pub fn is_empty(&self) -> bool {
        self.ctx.batch == 0
    }

    pub fn dim(&self) -> usize {
        self.ctx.d
    }

    pub fn layout(&self) -> JetLayout {
        self.ctx.layout
    }

    pub fn point(&self, p: usize) -> &[f64] {
        self.ctx.point(p)
    }

    fn block(&self, p: usize) -> &[f64] {
        &self.data[p * self.ctx.k..(p + 1) * self.ctx.k]
    }

    fn require(&self, need: JetLayout) -> bool {
        if self.ctx.layout >= need {
            true
        } else {
            let prev = self.missing.get();
            if prev.is_none_or(|m| m < need) {
                self.missing.set(Some(need));
            }
            false
        }
    }

    pub fn value(&self, p: usize) -> f64 {
        self.block(p)[0]
    }

    pub fn grad(&self, p: usize, i: usize) -> f64 {
        if self.require(JetLayout::Laplacian) {
            self.block(p)[1 + i]
        } else {
            f64::NAN
        }
    }

    /// `x · ∇u` at the input point.
    pub fn radial_derivative(&self, p: usize) -> f64 {
        if !self.require(JetLayout::Laplacian) {
            return f64::NAN;
        }
        let x = self.point(p);
        let b = self.block(p);
        (0..self.ctx.d).map(|i| x[i] * b[1 + i]).sum()
    }

    pub fn trace_hessian(&self, p: usize) -> f64 {
        let d = self.ctx.d;
        match self.ctx.layout {
            JetLayout::Laplacian => self.block(p)[1 + d],
            JetLayout::Full => {
                let h = &self.block(p)[1 + d..];
                (0..d).map(|i| h[crate::jet::packed_index(d, i, i)]).sum()
            }
            JetLayout::Value => {
                self.require(JetLayout::Laplacian);
                f64::NAN
            }
        }
    }

    /// `xᵀ H x` at the input point.
    pub fn radial_quadratic(&self, p: usize) -> f64 {
        let d = self.ctx.d;
        match self.ctx.layout {
            JetLayout::Laplacian => self.block(p)[2 + d],
            JetLayout::Full => {
                let x = self.point(p);
                let h = &self.block(p)[1 + d..];
                let mut acc = 0.0;
                let mut idx = 0;
                for i in 0..d {
                    for j in i..d {
                        let f = if i == j { 1.0 } else { 2.0 };
                        acc += f * x[i] * x[j] * h[idx];
                        idx += 1;
                    }
                }
                acc
            }
            JetLayout::Value => {
                self.require(JetLayout::Laplacian);
                f64::NAN
            }
        }
    }

    pub fn hess(&self, p: usize, i: usize, j: usize) -> f64 {
        if self.require(JetLayout::Full) {
            let d = self.ctx.d;
            self.block(p)[1 + d + crate::jet::packed_index(d, i, j)]
        } else {
            f64::NAN
        }
    }

    /// `Δ₀u = tr H − xᵀ H x − (d − 1) x·∇u`.
    pub fn laplace_beltrami(&self, p: usize) -> f64 {
        let d = self.ctx.d as f64;
        self.trace_hessian(p) - self.radial_quadratic(p) - (d - 1.0) * self.radial_derivative(p)
    }

    /// Full jet at point `p`; requires the full layout.
    pub fn jet(&self, p: usize) -> Option<Jet2> {
        if !self.require(JetLayout::Full) {
            return None;
        }
        let d = self.ctx.d;
        let b = self.block(p);
        Some(Jet2 {
            value: b[0],
            grad: b[1..1 + d].to_vec(),
            hess: b[1 + d..].to_vec(),
        })
    }
}

/// Adjoint seeds for the output jets, filled in by a loss.
pub struct OutputAdjoint<'a> {
    ctx: &'a Ctx,
    data: Vec<f64>,
    missing: Option<JetLayout>,
}

impl<'a> OutputAdjoint<'a> {
    fn new(ctx: &'a Ctx) -> Self {
        Self {
            ctx,
            data: vec![0.0; ctx.row()],
            missing: None,
        }
    }

    fn require(&mut self, need: JetLayout) -> bool {
        if self.ctx.layout >= need {
            true
        } else {
            if self.missing.is_none_or(|m| m < need) {
                self.missing = Some(need);
            }
            false
        }
    }

    fn base(&self, p: usize) -> usize {
        p * self.ctx.k
    }

    pub fn value(&mut self, p: usize, w: f64) {
        let b = self.base(p);
        self.data[b] += w;
    }

    pub fn grad(&mut self, p: usize, i: usize, w: f64) {
        if self.require(JetLayout::Laplacian) {
            let b = self.base(p);
            self.data[b + 1 + i] += w;
        }
    }

    pub fn radial_derivative(&mut self, p: usize, w: f64) {
        if self.require(JetLayout::Laplacian) {
            let b = self.base(p);
            for i in 0..self.ctx.d {
                self.data[b + 1 + i] += w * self.ctx.points[p * self.ctx.d + i];
            }
        }
    }

    pub fn trace_hessian(&mut self, p: usize, w: f64) {
        if !self.require(JetLayout::Laplacian) {
            return;
        }
        let d = self.ctx.d;
        let b = self.base(p);
        match self.ctx.layout {
            JetLayout::Laplacian => self.data[b + 1 + d] += w,
            _ => {
                for i in 0..d {
                    self.data[b + 1 + d + crate::jet::packed_index(d, i, i)] += w;
                }
            }
        }
    }

    pub fn radial_quadratic(&mut self, p: usize, w: f64) {
        if !self.require(JetLayout::Laplacian) {
            return;
        }
        let d = self.ctx.d;
        let b = self.base(p);
        match self.ctx.layout {
            JetLayout::Laplacian => self.data[b + 2 + d] += w,
            _ => {
                let mut idx = 0;
                for i in 0..d {
                    for j in i..d {
                        let f = if i == j { 1.0 } else { 2.0 };
                        let xi = self.ctx.points[p * d + i];
                        let xj = self.ctx.points[p * d + j];
                        self.data[b + 1 + d + idx] += w * f * xi * xj;
                        idx += 1;
                    }
                }
            }
        }
    }

    pub fn hess(&mut self, p: usize, i: usize, j: usize, w: f64) {
        if self.require(JetLayout::Full) {
            let d = self.ctx.d;
            let b = self.base(p);
            self.data[b + 1 + d + crate::jet::packed_index(d, i, j)] += w;
        }
    }

    /// Seeds `w` on `Δ₀u`.
    pub fn laplace_beltrami(&mut self, p: usize, w: f64) {
        let d = self.ctx.d as f64;
        self.trace_hessian(p, w);
        self.radial_quadratic(p, -w);
        self.radial_derivative(p, -(d - 1.0) * w);
    }
}

/// Output of an untraced forward pass.
pub struct ForwardPass {
    ctx: Ctx,
    output: Vec<f64>,
}

impl ForwardPass {
    pub fn output(&self) -> OutputJets<'_> {
        OutputJets::new(&self.ctx, &self.output)
    }
}

/// Recorded forward pass over one batch.
pub struct Trace<'p> {
    model: Model,
    params: &'p [f64],
    ctx: Ctx,
    tensors: Vec<Vec<f64>>,
    consumed: bool,
}

impl<'p> Trace<'p> {
    pub fn layout(&self) -> JetLayout {
        self.ctx.layout
    }

    pub fn output(&self) -> OutputJets<'_> {
        OutputJets::new(&self.ctx, self.tensors.last().unwrap())
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }
}

/// Gradient of `loss(output jets)` with respect to every parameter, plus the loss value.
///
/// The loss writes `∂loss/∂(component)` into the adjoint it is handed. A trace
/// supports exactly one backward pass.
pub fn param_gradient<F>(trace: &mut Trace<'_>, loss: F) -> Result<(f64, Vec<f64>)>
where
    F: FnOnce(&OutputJets<'_>, &mut OutputAdjoint<'_>) -> f64,
{
    if trace.consumed {
        return Err(Error::TraceConsumed);
    }
    let (value, seed) = {
        let out = trace.output();
        let mut adj = OutputAdjoint::new(&trace.ctx);
        let value = loss(&out, &mut adj);
        let missing = out.missing.get().max(adj.missing);
        if let Some(need) = missing {
            return Err(Error::ComponentNotRecorded {
                requested: need.to_string(),
                recorded: trace.ctx.layout.to_string(),
            });
        }
        (value, adj.data)
    };
    if !value.is_finite() {
        return Err(Error::non_finite("loss"));
    }
    trace.consumed = true;
    let mut grad = vec![0.0; trace.model.n_params];
    let mut bar = seed;
    let ops = &trace.model.ops;
    for idx in (0..ops.len()).rev() {
        let need_input = ops[..idx].iter().any(|(_, op)| op.params().is_some());
        let input = &trace.tensors[idx];
        bar = trace
            .ctx
            .backward(&ops[idx].1, input, bar, trace.params, &mut grad, need_input);
        if !need_input {
            break;
        }
    }
    trace.tensors.clear();
    Ok((value, grad))
}
