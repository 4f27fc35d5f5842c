use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::jet::{packed_index, Jet2};
use crate::network::{ArchSpec, BlockKind, ParamSet, SparsityMask};
use crate::sphere::{mc_sobolev_error, NormExponent, SampleSet, ScalarField};

use super::cubature::{cubature_rule, exact_rule, op_l, CubatureRule};
use super::cutoff::SmoothCutoff;
use super::factor::{conv_factorize, power_decomposition};
use super::spline::{interp_spline, truncated_powers, SplineSpec};
use super::zonal::ZonalKernel;

/// Longest coefficient sequence `m·d` factorized into a single-channel stack;
/// beyond it root finding loses the required accuracy.
pub const MAX_SINGLE_CHANNEL_LEN: usize = 40;

/// ReLU convolution layers in the network's layout: kernels `[C][c_in][S]` and
/// biases `[C][d_l]` per layer, each layer computing `ReLU(T v − b)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvStage {
    pub d: usize,
    pub kernel_size: usize,
    pub channels: usize,
    pub kernels: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Affine function of the input: value and gradient.
type Affine = (f64, Vec<f64>);

impl ConvStage {
    pub fn depth(&self) -> usize {
        self.kernels.len()
    }

    /// `d_0, …, d_L`.
    pub fn widths(&self) -> Vec<usize> {
        (0..=self.depth())
            .map(|l| self.d + l * (self.kernel_size - 1))
            .collect()
    }

    /// Downsampled, channel-concatenated outputs as affine functions of `x`
    /// (exact: every unit is piecewise linear).
    pub fn features(&self, x: &[f64]) -> Vec<Affine> {
        let d = self.d;
        let s = self.kernel_size;
        let widths = self.widths();
        let mut h: Vec<Vec<Affine>> = vec![(0..d)
            .map(|i| {
                let mut g = vec![0.0; d];
                g[i] = 1.0;
                (x[i], g)
            })
            .collect()];
        for l in 0..self.depth() {
            let c_in = h.len();
            let (w_in, w_out) = (widths[l], widths[l + 1]);
            let mut next = Vec::with_capacity(self.channels);
            for o in 0..self.channels {
                let mut out = Vec::with_capacity(w_out);
                for r in 0..w_out {
                    let mut v = -self.biases[l][o * w_out + r];
                    let mut g = vec![0.0; d];
                    for (ci, hi) in h.iter().enumerate() {
                        let k = &self.kernels[l][(o * c_in + ci) * s..][..s];
                        for (q, &wq) in k.iter().enumerate() {
                            if wq == 0.0 || q > r || r - q >= w_in {
                                continue;
                            }
                            let (hv, hg) = &hi[r - q];
                            v += wq * hv;
                            for (gi, hgi) in g.iter_mut().zip(hg) {
                                *gi += wq * hgi;
                            }
                        }
                    }
                    if v > 0.0 {
                        out.push((v, g));
                    } else {
                        out.push((0.0, vec![0.0; d]));
                    }
                }
                next.push(out);
            }
            h = next;
        }
        let mut z = Vec::new();
        for ch in h {
            z.extend((1..=ch.len() / d).map(|j| ch[j * d - 1].clone()));
        }
        z
    }

    pub fn kernel_sup(&self) -> f64 {
        self.kernels
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn bias_sup(&self) -> f64 {
        self.biases
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Convolution stage whose feature `slots[i]` equals `⟨x, y_i⟩ + B^(L)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerProductNet {
    pub stage: ConvStage,
    /// Orthogonal `d × d` map applied to the input before the stage.
    pub rotation: Vec<f64>,
    /// `B^(L)`.
    pub offset: f64,
    pub slots: Vec<usize>,
    /// Roots of the factorized sequence (empty for the multi-channel stage).
    pub roots: Vec<(f64, f64)>,
    pub single_channel: bool,
}

impl InnerProductNet {
    pub fn m(&self) -> usize {
        self.slots.len()
    }

    /// Slot features with gradients with respect to the unrotated `x`.
    pub fn slot_features(&self, x: &[f64]) -> Vec<Affine> {
        let d = self.stage.d;
        let q = &self.rotation;
        let z: Vec<f64> = (0..d)
            .map(|r| (0..d).map(|c| q[r * d + c] * x[c]).sum())
            .collect();
        let f = self.stage.features(&z);
        self.slots
            .iter()
            .map(|&s| {
                let (v, gz) = &f[s];
                let gx = (0..d)
                    .map(|c| (0..d).map(|r| q[r * d + c] * gz[r]).sum())
                    .collect();
                (*v, gx)
            })
            .collect()
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.slot_features(x).into_iter().map(|(v, _)| v).collect()
    }

    /// Structural free parameters: `L·S` kernel entries plus `2S − 1` distinct
    /// bias values per layer for the single-channel stack; all kernel entries
    /// and one bias per channel otherwise.
    pub fn free_params(&self) -> usize {
        let s = self.stage.kernel_size;
        let l = self.stage.depth();
        if self.single_channel {
            l * s + l * (2 * s - 1)
        } else {
            self.stage.channels * (s + 1)
        }
    }
}

fn identity(d: usize) -> Vec<f64> {
    let mut q = vec![0.0; d * d];
    for i in 0..d {
        q[i * d + i] = 1.0;
    }
    q
}

/// Householder reflection mapping the unit vector `y` to `e_1`.
pub fn householder_to_e1(y: &[f64]) -> Vec<f64> {
    let d = y.len();
    let mut v = y.to_vec();
    v[0] -= 1.0;
    let nn: f64 = v.iter().map(|a| a * a).sum();
    let mut q = identity(d);
    if nn < 1e-28 {
        return q;
    }
    for r in 0..d {
        for c in 0..d {
            q[r * d + c] -= 2.0 * v[r] * v[c] / nn;
        }
    }
    q
}

fn check_nodes(nodes: &[f64], d: usize) -> Result<usize> {
    if d < 2 || nodes.is_empty() || !nodes.len().is_multiple_of(d) {
        return Err(Error::invalid("y", "need a nonempty m × d node array"));
    }
    for y in nodes.chunks(d) {
        let n = y.iter().map(|a| a * a).sum::<f64>().sqrt();
        if (n - 1.0).abs() > 1e-10 {
            return Err(Error::OffSphere { norm: n });
        }
    }
    Ok(nodes.len() / d)
}

/// Single-channel ReLU convolution stack extracting all `⟨x, y_i⟩`.
///
/// The nodes are first rotated so that `y_m = e_1` (the rotation is part of
/// the result), making the top coefficient of the sequence
/// `W_{(j−1)d + (d−i)} = (y_j)_i` equal to one. `W` is factorized into kernels of
/// size `S`; biases follow `b^(1) = −‖w^(1)‖₁` and
/// `b^(l) = B^(l−1) T^(l) 1 − B^(l) 1` with `B^(l) = Π_{i ≤ l} ‖w^(i)‖₁`.
pub fn build_inner_product_network(nodes: &[f64], d: usize, s: usize) -> Result<InnerProductNet> {
    let m = check_nodes(nodes, d)?;
    let q = householder_to_e1(&nodes[(m - 1) * d..]);
    let mut w = vec![0.0; m * d];
    for j in 0..m {
        let y = &nodes[j * d..(j + 1) * d];
        for i in 0..d {
            w[j * d + (d - 1 - i)] = (0..d).map(|c| q[i * d + c] * y[c]).sum();
        }
    }
    w[m * d - 1] = 1.0;
    let fac = conv_factorize(&w, s)?;
    let depth = fac.kernels.len();
    let widths: Vec<usize> = (0..=depth).map(|l| d + l * (s - 1)).collect();
    let mut biases = Vec::with_capacity(depth);
    let mut b_prev = 1.0;
    for (l, k) in fac.kernels.iter().enumerate() {
        let norm1: f64 = k.iter().map(|a| a.abs()).sum();
        let b_cur = b_prev * norm1;
        let bias = if l == 0 {
            vec![-norm1; widths[1]]
        } else {
            (0..widths[l + 1])
                .map(|r| {
                    let row: f64 = (0..s)
                        .filter(|&q| q <= r && r - q < widths[l])
                        .map(|q| k[q])
                        .sum();
                    b_prev * row - b_cur
                })
                .collect()
        };
        biases.push(bias);
        b_prev = b_cur;
    }
    Ok(InnerProductNet {
        stage: ConvStage {
            d,
            kernel_size: s,
            channels: 1,
            kernels: fac.kernels,
            biases,
        },
        rotation: q,
        offset: b_prev,
        slots: (0..m).collect(),
        roots: fac.roots,
        single_channel: true,
    })
}

/// One ReLU convolution layer with one channel per node, kernel `y_j` reversed;
/// needs `S ≥ d`. All channels share the offset `B = max_j ‖y_j‖₁`.
pub fn build_multichannel_inner_product(
    nodes: &[f64],
    d: usize,
    s: usize,
) -> Result<InnerProductNet> {
    let m = check_nodes(nodes, d)?;
    if s < d {
        return Err(Error::invalid("S", "the multi-channel stage needs S >= d"));
    }
    let offset = nodes
        .chunks(d)
        .map(|y| y.iter().map(|a| a.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let width = d + s - 1;
    let mut kernel = vec![0.0; m * s];
    for j in 0..m {
        for q in 0..d {
            kernel[j * s + q] = nodes[j * d + d - 1 - q];
        }
    }
    let per_channel = width / d;
    Ok(InnerProductNet {
        stage: ConvStage {
            d,
            kernel_size: s,
            channels: m,
            kernels: vec![kernel],
            biases: vec![vec![-offset; m * width]],
        },
        rotation: identity(d),
        offset,
        slots: (0..m).map(|j| j * per_channel).collect(),
        roots: vec![],
        single_channel: false,
    })
}

/// `(k³ + 4k² + 4Nk + k + 8N) / 2`: hidden ReLU^k units per ridge input.
pub fn spline_block_width(k: usize, n: usize) -> usize {
    (k * k * k + 4 * k * k + 4 * n * k + k + 8 * n) / 2
}

/// Shared one-input ReLU^k block: `Σ_h w2_h ReLU^k(w1_h t' − b1_h) = Q(t' − B)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplineBlock {
    pub spec: SplineSpec,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    /// 1-based B-spline index each unit contributes to.
    pub basis: Vec<usize>,
    /// `−max_i |J_i|`, a bound below `−‖Q‖_∞`.
    pub b2: f64,
    pub coeffs: Vec<f64>,
}

impl SplineBlock {
    /// `[g, g', g'']` of `ReLU(Σ_h w2_h ReLU^k(w1_h t' − b1_h) − b2)` at `t'`.
    pub fn eval(&self, tp: f64) -> [f64; 3] {
        let k = self.spec.k as u32;
        let act = Activation::ReluPow(k);
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for h in 0..self.w1.len() {
            let z = self.w1[h] * tp - self.b1[h];
            if z <= 0.0 {
                continue;
            }
            let [a0, a1, a2, _] = act.derivatives(z);
            let (w1, w2) = (self.w1[h], self.w2[h]);
            s0 += w2 * a0;
            s1 += w2 * a1 * w1;
            s2 += w2 * a2 * w1 * w1;
        }
        let pre = s0 - self.b2;
        if pre > 0.0 {
            [pre, s1, s2]
        } else {
            [0.0; 3]
        }
    }
}

/// Builds the shared block from spline coefficients `J` and the conv offset `B`.
///
/// Each term `c·(t + a)^k_+` becomes one unit with `w = |c|^{1/k}`,
/// `b = w (B − a)` and output sign `sgn c`. Left-boundary powers `(t+1)^p`,
/// `p < k`, are expanded with [`power_decomposition`]; `(t+1)^k` takes the same
/// `k + 1` units, only the first of them nonzero.
pub fn build_spline_block(spec: SplineSpec, coeffs: Vec<f64>, offset: f64) -> Result<SplineBlock> {
    let k = spec.k;
    if k == 0 {
        return Err(Error::invalid("k", "spline power must be at least 1"));
    }
    if 2 * spec.n_half < k + 1 {
        return Err(Error::invalid(
            "N",
            "boundary splines overlap below 2N = k + 1; use a larger N",
        ));
    }
    if coeffs.len() != spec.basis_count() {
        return Err(Error::invalid(
            "coeffs",
            "one coefficient per B-spline is required",
        ));
    }
    let kf = k as f64;
    let mut terms: Vec<(usize, f64, f64)> = Vec::new();
    for i in 1..=spec.basis_count() {
        let tp = truncated_powers(&spec, i)?;
        for &(p, a) in &tp.poly {
            if p < k {
                let (zeta, xi) = power_decomposition(p, k)?;
                for (z, x) in zeta.iter().zip(&xi) {
                    terms.push((i, a * x, 1.0 + z));
                }
            } else {
                terms.push((i, a, 1.0));
                terms.extend((1..=k).map(|z| (i, 0.0, 1.0 + z as f64)));
            }
        }
        terms.extend(tp.jumps.iter().map(|&(tau, c)| (i, c, -tau)));
    }
    let expected = spline_block_width(k, spec.n_half);
    if terms.len() != expected {
        return Err(Error::invalid(
            "spline block",
            format!("built {} units, expected {expected}", terms.len()),
        ));
    }
    let mut block = SplineBlock {
        spec,
        w1: Vec::with_capacity(expected),
        b1: Vec::with_capacity(expected),
        w2: Vec::with_capacity(expected),
        basis: Vec::with_capacity(expected),
        b2: -coeffs.iter().fold(0.0, |m: f64, c| m.max(c.abs())),
        coeffs,
    };
    for (i, c, shift) in terms {
        let w = c.abs().powf(1.0 / kf);
        block.w1.push(w);
        block.b1.push(w * (offset - shift));
        block
            .w2
            .push(c.signum() * if c == 0.0 { 0.0 } else { 1.0 } * block.coeffs[i - 1]);
        block.basis.push(i);
    }
    Ok(block)
}

/// Convolution stage, shared spline block and affine output:
/// `F(x) = Σ_i c_i g(⟨x, y_i⟩ + B) − b_out`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructiveNetwork {
    pub d: usize,
    pub inner: InnerProductNet,
    pub block: SplineBlock,
    pub out_w: Vec<f64>,
    pub out_b: f64,
}

/// The FCNN stage over given inner-product features: block widths
/// `m·(k³+4k²+4Nk+k+8N)/2` and `m`, output weights `μ_i L_{n0}(u)(y_i)`.
pub fn build_spline_fcnn(
    inner: InnerProductNet,
    weights: &[f64],
    lu_values: &[f64],
    spec: SplineSpec,
    coeffs: Vec<f64>,
) -> Result<ConstructiveNetwork> {
    let m = inner.m();
    if weights.len() != m || lu_values.len() != m {
        return Err(Error::invalid(
            "mu",
            "one weight and one value per node are required",
        ));
    }
    let block = build_spline_block(spec, coeffs, inner.offset)?;
    let out_w: Vec<f64> = weights.iter().zip(lu_values).map(|(a, b)| a * b).collect();
    let out_b = -block.b2 * out_w.iter().sum::<f64>();
    Ok(ConstructiveNetwork {
        d: inner.stage.d,
        inner,
        block,
        out_w,
        out_b,
    })
}

impl ConstructiveNetwork {
    pub fn m(&self) -> usize {
        self.out_w.len()
    }

    /// `Σ_i c_i Q(⟨x, y_i⟩)` with the spline `Q` evaluated by de Boor, bypassing
    /// both the convolution stage and the ReLU^k block.
    pub fn ridge_sum(&self, nodes: &[f64], x: &[f64]) -> Result<f64> {
        let q = self.block.spec.spline(self.block.coeffs.clone())?;
        let d = self.d;
        let mut s = 0.0;
        for (y, c) in nodes.chunks(d).zip(&self.out_w) {
            let t: f64 = y.iter().zip(x).map(|(a, b)| a * b).sum();
            s += c * q.eval(t.clamp(-1.0, 1.0))?;
        }
        Ok(s)
    }

    pub fn hidden_width(&self) -> usize {
        self.block.w1.len()
    }

    /// Free parameters of the structured network: conv stage, then `w1`, `b1`,
    /// `w2` shared across the `m` blocks, one `b2`, `m` output weights, one output bias.
    pub fn free_params(&self) -> usize {
        self.inner.free_params() + 3 * self.hidden_width() + 1 + self.m() + 1
    }

    /// `3LS − L + (3/2)(k³+4k²+4Nk+k+8N) + m + 2`.
    pub fn formula_params(&self) -> usize {
        let s = self.inner.stage.kernel_size;
        let l = self.inner.stage.depth();
        3 * l * s - l
            + 3 * spline_block_width(self.block.spec.k, self.block.spec.n_half)
            + self.m()
            + 2
    }

    /// Dense architecture holding this network (ReLU convolutions, ReLU^k then ReLU).
    pub fn arch(&self) -> ArchSpec {
        let l = self.inner.stage.depth();
        let mut activations = vec![Activation::Relu; l];
        activations.push(Activation::ReluPow(self.block.spec.k as u32));
        activations.push(Activation::Relu);
        ArchSpec {
            d: self.d,
            conv_layers: l,
            kernel_size: self.inner.stage.kernel_size,
            channels: self.inner.stage.channels,
            fc_widths: vec![self.m() * self.hidden_width(), self.m()],
            activations,
            sup_budget: None,
        }
    }

    /// Dense parameters; refused above `max_params` entries. The input rotation
    /// must be the identity since the generic network has no input transform.
    pub fn to_param_set(&self, max_params: usize) -> Result<ParamSet> {
        let arch = self.arch();
        let n = arch.param_layout().len();
        if n > max_params {
            return Err(Error::invalid(
                "max_params",
                format!("dense form needs {n} entries"),
            ));
        }
        let d = self.d;
        let q = &self.inner.rotation;
        if (0..d * d).any(|i| (q[i] - if i % (d + 1) == 0 { 1.0 } else { 0.0 }).abs() > 0.0) {
            return Err(Error::invalid(
                "rotation",
                "dense form needs an unrotated stage",
            ));
        }
        let mut p = ParamSet::zeros(&arch)?;
        let l = self.inner.stage.depth();
        for layer in 0..l {
            p.block_mut(BlockKind::ConvKernel, layer + 1)
                .unwrap()
                .copy_from_slice(&self.inner.stage.kernels[layer]);
            p.block_mut(BlockKind::ConvBias, layer + 1)
                .unwrap()
                .copy_from_slice(&self.inner.stage.biases[layer]);
        }
        let h = self.hidden_width();
        let m = self.m();
        let n_feat = arch.feature_width();
        {
            let w = p.block_mut(BlockKind::FcWeight, l + 1).unwrap();
            for (i, &slot) in self.inner.slots.iter().enumerate() {
                for u in 0..h {
                    w[(i * h + u) * n_feat + slot] = self.block.w1[u];
                }
            }
        }
        {
            let b = p.block_mut(BlockKind::FcBias, l + 1).unwrap();
            for i in 0..m {
                b[i * h..(i + 1) * h].copy_from_slice(&self.block.b1);
            }
        }
        {
            let w = p.block_mut(BlockKind::FcWeight, l + 2).unwrap();
            for i in 0..m {
                w[i * m * h + i * h..][..h].copy_from_slice(&self.block.w2);
            }
        }
        p.block_mut(BlockKind::FcBias, l + 2)
            .unwrap()
            .fill(self.block.b2);
        p.block_mut(BlockKind::OutputWeight, l + 3)
            .unwrap()
            .copy_from_slice(&self.out_w);
        p.block_mut(BlockKind::OutputBias, l + 3).unwrap()[0] = self.out_b;
        Ok(p)
    }

    /// Sharing pattern of the dense form: structurally zero entries are `None`,
    /// shared entries share a group. Valid for the single-channel stage.
    pub fn sparsity_mask(&self) -> Result<SparsityMask> {
        if !self.inner.single_channel {
            return Err(Error::invalid(
                "stage",
                "mask is defined for the single-channel stage",
            ));
        }
        let arch = self.arch();
        let layout = arch.param_layout();
        let mut groups = vec![None; layout.len()];
        let mut next = 0usize;
        let mut fresh = || {
            next += 1;
            next - 1
        };
        let s = arch.kernel_size;
        let widths = arch.conv_widths();
        let l = arch.conv_layers;
        for (layer, &w) in widths.iter().enumerate().skip(1) {
            let kb = layout.find(BlockKind::ConvKernel, layer).unwrap();
            for g in &mut groups[kb.range()] {
                *g = Some(fresh());
            }
            let bb = layout.find(BlockKind::ConvBias, layer).unwrap();
            let left: Vec<usize> = (0..s - 1).map(|_| fresh()).collect();
            let right: Vec<usize> = (0..s - 1).map(|_| fresh()).collect();
            let mid = fresh();
            for (r, g) in groups[bb.range()].iter_mut().enumerate() {
                *g = Some(if r < s - 1 {
                    left[r]
                } else if r >= w - (s - 1) {
                    right[w - 1 - r]
                } else {
                    mid
                });
            }
        }
        let h = self.hidden_width();
        let m = self.m();
        let n_feat = arch.feature_width();
        let w1: Vec<usize> = (0..h).map(|_| fresh()).collect();
        let b1: Vec<usize> = (0..h).map(|_| fresh()).collect();
        let w2: Vec<usize> = (0..h).map(|_| fresh()).collect();
        let b2 = fresh();
        let o = layout.find(BlockKind::FcWeight, l + 1).unwrap().offset;
        for (i, &slot) in self.inner.slots.iter().enumerate() {
            for u in 0..h {
                groups[o + (i * h + u) * n_feat + slot] = Some(w1[u]);
            }
        }
        let o = layout.find(BlockKind::FcBias, l + 1).unwrap().offset;
        for i in 0..m {
            for u in 0..h {
                groups[o + i * h + u] = Some(b1[u]);
            }
        }
        let o = layout.find(BlockKind::FcWeight, l + 2).unwrap().offset;
        for i in 0..m {
            for u in 0..h {
                groups[o + i * m * h + i * h + u] = Some(w2[u]);
            }
        }
        let ob = layout.find(BlockKind::FcBias, l + 2).unwrap();
        for g in &mut groups[ob.range()] {
            *g = Some(b2);
        }
        let ow = layout.find(BlockKind::OutputWeight, l + 3).unwrap();
        for g in &mut groups[ow.range()] {
            *g = Some(fresh());
        }
        let obias = layout.find(BlockKind::OutputBias, l + 3).unwrap();
        groups[obias.offset] = Some(fresh());
        Ok(SparsityMask { groups })
    }
}

impl ScalarField for ConstructiveNetwork {
    fn dim(&self) -> usize {
        self.d
    }

    fn jet(&self, x: &[f64]) -> Jet2 {
        let d = self.d;
        let mut out = Jet2::constant(d, -self.out_b);
        for ((v, a), c) in self.inner.slot_features(x).iter().zip(&self.out_w) {
            if *c == 0.0 {
                continue;
            }
            let [g0, g1, g2] = self.block.eval(*v);
            out.value += c * g0;
            for i in 0..d {
                out.grad[i] += c * g1 * a[i];
                for j in i..d {
                    out.hess[packed_index(d, i, j)] += c * g2 * a[i] * a[j];
                }
            }
        }
        out
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut s = -self.out_b;
        for ((v, _), c) in self.inner.slot_features(x).iter().zip(&self.out_w) {
            if *c != 0.0 {
                s += c * self.block.eval(*v)[0];
            }
        }
        s
    }
}

/// Inputs of the explicit approximant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructiveParams {
    pub n0: usize,
    /// ReLU^k power.
    pub k: usize,
    /// Sobolev order of the reported error (0, 1 or 2).
    pub s: usize,
    /// Smoothness used to pick `N`.
    pub r: f64,
    pub d: usize,
    pub kernel_size: usize,
}

impl ConstructiveParams {
    /// `N = ⌈n0^{2 + (d + r + s − 1)/(k − s + 1)}⌉`, raised to `⌈(k+1)/2⌉` so the
    /// boundary splines stay disjoint.
    pub fn spline_half_count(&self) -> Result<usize> {
        if self.k < self.s {
            return Err(Error::invalid("k", "need k >= s"));
        }
        let e = 2.0 + (self.d as f64 + self.r + self.s as f64 - 1.0) / (self.k - self.s + 1) as f64;
        let floor = (self.k + 1).div_ceil(2);
        Ok(((self.n0 as f64).powf(e).ceil() as usize).max(floor))
    }
}

/// Errors of one approximant against the target.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport {
    pub n0: usize,
    pub m: usize,
    pub n_half: usize,
    pub conv_depth: usize,
    pub hidden_width: usize,
    pub free_params: usize,
    pub single_channel: bool,
    pub sup_error: f64,
    /// `‖·‖_{W^s_∞}` estimate.
    pub sobolev_error: f64,
    pub kernel_sup: f64,
    pub offset: f64,
}

/// Extra quadrature degree used for `L_{n0}(u)(y_i)` beyond the kernel's `2·n0`.
pub const TARGET_QUADRATURE_ALLOWANCE: usize = 24;

/// Assembles the explicit network for `u` and reports Monte-Carlo errors on `samples`.
///
/// The degree-`4n0` rule is rotated so its last node is `e_1` (still a valid
/// rule), which lets the convolution stage act on the raw input. Stacks with
/// `m·d > 40` use the one-layer multi-channel stage.
pub fn constructive_approximator<F: ScalarField + ?Sized>(
    u: &F,
    params: ConstructiveParams,
    samples: &SampleSet,
) -> Result<(ConstructiveNetwork, ApproxReport)> {
    let ConstructiveParams {
        n0,
        k,
        s,
        d,
        kernel_size,
        ..
    } = params;
    if !(2..=3).contains(&d) || u.dim() != d {
        return Err(Error::invalid(
            "d",
            "the explicit construction supports d = 2 or 3",
        ));
    }
    if s > 2 {
        return Err(Error::invalid(
            "s",
            "reported Sobolev order must be at most 2",
        ));
    }
    let base = cubature_rule(n0, d)?;
    let m = base.len();
    let q = householder_to_e1(base.node(m - 1));
    let rule: CubatureRule = base.rotated(&q);
    let mut nodes = rule.nodes.clone();
    for y in nodes.chunks_mut(d) {
        let n = y.iter().map(|a| a * a).sum::<f64>().sqrt();
        y.iter_mut().for_each(|a| *a /= n);
    }
    let kernel = ZonalKernel::new(n0, d, SmoothCutoff, false)?;
    let fine = exact_rule(2 * n0 + TARGET_QUADRATURE_ALLOWANCE, d)?;
    let lu: Vec<f64> = (0..m)
        .map(|i| op_l(u, &kernel, rule.node(i), &fine))
        .collect::<Result<_>>()?;
    let n_half = params.spline_half_count()?;
    let spec = SplineSpec::new(k, n_half)?;
    let coeffs = interp_spline(&spec, |t| kernel.eval(t).unwrap_or(f64::NAN))?;
    let inner = if m * d <= MAX_SINGLE_CHANNEL_LEN {
        let mut net = build_inner_product_network(&nodes, d, kernel_size)?;
        net.rotation = identity(d);
        net
    } else {
        warn!(
            "m·d = {} exceeds {MAX_SINGLE_CHANNEL_LEN}; using the multi-channel stage",
            m * d
        );
        build_multichannel_inner_product(&nodes, d, kernel_size)?
    };
    let net = build_spline_fcnn(inner, &rule.weights, &lu, spec, coeffs)?;
    let sup_error = mc_sobolev_error(&net, u, 0, samples, NormExponent::Infinity)?;
    let sobolev_error = mc_sobolev_error(&net, u, s as u8, samples, NormExponent::Infinity)?;
    let report = ApproxReport {
        n0,
        m,
        n_half,
        conv_depth: net.inner.stage.depth(),
        hidden_width: net.m() * net.hidden_width(),
        free_params: net.free_params(),
        single_channel: net.inner.single_channel,
        sup_error,
        sobolev_error,
        kernel_sup: net.inner.stage.kernel_sup(),
        offset: net.inner.offset,
    };
    info!(
        "n0 = {n0}: m = {m}, N = {n_half}, sup error {:.3e}, W^{s} error {:.3e}",
        sup_error, sobolev_error
    );
    Ok((net, report))
}

/// [`constructive_approximator`] over several `n0`, in parallel.
pub fn approximation_ladder<F: ScalarField + Sync + ?Sized>(
    u: &F,
    base: ConstructiveParams,
    n0s: &[usize],
    samples: &SampleSet,
) -> Result<Vec<ApproxReport>> {
    n0s.par_iter()
        .map(|&n0| {
            constructive_approximator(u, ConstructiveParams { n0, ..base }, samples).map(|r| r.1)
        })
        .collect()
}
