//! The 1-D CNN: Toeplitz convolution layers, stride-`d` downsampling, fully
//! connected layers and a final affine scalar output.
//!
//! Every layer computes `σ(T x − b)`. Parameters live in one flat vector whose
//! block structure is described by [`ParamLayout`].

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::io::fingerprint;
use crate::jet::Jet2;
use crate::rng::seeded_rng;
use crate::sphere::{SampleSet, ScalarField};
use crate::tape::{Model, Op};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    /// Input dimension `d`.
    pub d: usize,
    /// Convolution depth `L`.
    pub conv_layers: usize,
    /// Kernel size `S`, shared by all convolution layers.
    pub kernel_size: usize,
    pub channels: usize,
    /// Widths `d_{L+1}, …, d_{L+L0}`.
    pub fc_widths: Vec<usize>,
    /// One activation per convolution layer, then one per fully connected layer.
    pub activations: Vec<Activation>,
    /// Sup-norm budget `M`; `None` means unbounded.
    #[serde(default)]
    pub sup_budget: Option<f64>,
}

impl ArchSpec {
    /// Fixed experiment setting: `S = 3, L = 3, L0 = 2`, widths 12 and 4,
    /// 56 channels, GeLU on the convolutions, GeLU³ then GeLU on the FC layers.
    pub fn default_for_dim(d: usize) -> Self {
        Self {
            d,
            conv_layers: 3,
            kernel_size: 3,
            channels: 56,
            fc_widths: vec![12, 4],
            activations: vec![
                Activation::Gelu,
                Activation::Gelu,
                Activation::Gelu,
                Activation::GeluPow(3),
                Activation::Gelu,
            ],
            sup_budget: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::invalid("d", "input dimension must be at least 2"));
        }
        if self.conv_layers == 0 {
            return Err(Error::invalid(
                "conv_layers",
                "need at least one convolution layer",
            ));
        }
        if self.kernel_size == 0 {
            return Err(Error::invalid("kernel_size", "must be positive"));
        }
        if self.channels == 0 {
            return Err(Error::invalid("channels", "must be positive"));
        }
        if self.fc_widths.contains(&0) {
            return Err(Error::invalid("fc_widths", "widths must be positive"));
        }
        if self.activations.len() != self.conv_layers + self.fc_widths.len() {
            return Err(Error::invalid(
                "activations",
                format!(
                    "expected {} activations, got {}",
                    self.conv_layers + self.fc_widths.len(),
                    self.activations.len()
                ),
            ));
        }
        if let Some(m) = self.sup_budget {
            if !(m > 0.0) {
                return Err(Error::invalid("sup_budget", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn fc_depth(&self) -> usize {
        self.fc_widths.len()
    }

    /// `d_0, …, d_L` with `d_l = d_{l−1} + S − 1`.
    pub fn conv_widths(&self) -> Vec<usize> {
        (0..=self.conv_layers)
            .map(|l| self.d + l * (self.kernel_size - 1))
            .collect()
    }

    /// Length of the concatenated downsampled features.
    pub fn feature_width(&self) -> usize {
        self.channels * (self.conv_widths()[self.conv_layers] / self.d)
    }

    /// Largest activation power `k`.
    pub fn power(&self) -> u32 {
        self.activations
            .iter()
            .map(|a| a.power())
            .max()
            .unwrap_or(1)
    }

    /// `max_l d_l` over hidden layers, per channel.
    pub fn max_width(&self) -> usize {
        let conv = self.conv_widths()[self.conv_layers];
        self.fc_widths.iter().copied().fold(conv, usize::max)
    }

    pub fn param_layout(&self) -> ParamLayout {
        ParamLayout::new(self)
    }

    pub fn model(&self) -> Result<Model> {
        self.validate()?;
        let layout = self.param_layout();
        let widths = self.conv_widths();
        let mut ops = Vec::new();
        let mut blocks = layout.blocks.iter();
        for l in 0..self.conv_layers {
            let c_in = if l == 0 { 1 } else { self.channels };
            let kernel = blocks.next().unwrap();
            let bias = blocks.next().unwrap();
            ops.push((
                format!("conv{}", l + 1),
                Op::Conv {
                    c_in,
                    c_out: self.channels,
                    d_in: widths[l],
                    kernel: self.kernel_size,
                    offset: kernel.offset,
                },
            ));
            let n = self.channels * widths[l + 1];
            ops.push((
                format!("conv{}_bias", l + 1),
                Op::Bias {
                    n,
                    offset: bias.offset,
                },
            ));
            ops.push((
                format!("conv{}_act", l + 1),
                Op::Activation {
                    n,
                    act: self.activations[l],
                },
            ));
        }
        ops.push((
            "downsample".into(),
            Op::Downsample {
                channels: self.channels,
                d_in: widths[self.conv_layers],
                stride: self.d,
            },
        ));
        let mut prev = self.feature_width();
        for (j, &w) in self.fc_widths.iter().enumerate() {
            let weight = blocks.next().unwrap();
            let bias = blocks.next().unwrap();
            let name = format!("fc{}", j + 1);
            ops.push((
                name.clone(),
                Op::Dense {
                    n_in: prev,
                    n_out: w,
                    offset: weight.offset,
                },
            ));
            ops.push((
                format!("{name}_bias"),
                Op::Bias {
                    n: w,
                    offset: bias.offset,
                },
            ));
            ops.push((
                format!("{name}_act"),
                Op::Activation {
                    n: w,
                    act: self.activations[self.conv_layers + j],
                },
            ));
            prev = w;
        }
        let weight = blocks.next().unwrap();
        let bias = blocks.next().unwrap();
        ops.push((
            "output".into(),
            Op::Dense {
                n_in: prev,
                n_out: 1,
                offset: weight.offset,
            },
        ));
        ops.push((
            "output_bias".into(),
            Op::Bias {
                n: 1,
                offset: bias.offset,
            },
        ));
        Model::new(self.d, ops, layout.len())
    }

    pub fn fingerprint(&self) -> Result<String> {
        fingerprint(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    ConvKernel,
    ConvBias,
    FcWeight,
    FcBias,
    OutputWeight,
    OutputBias,
}

/// A contiguous parameter block. `layer` is 1-based in the network's layer numbering.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub kind: BlockKind,
    pub layer: usize,
    pub offset: usize,
    pub shape: Vec<usize>,
    /// Fan-in used by the default initializer.
    pub fan_in: usize,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamLayout {
    pub blocks: Vec<ParamBlock>,
}

impl ParamLayout {
    fn new(arch: &ArchSpec) -> Self {
        let mut blocks = Vec::new();
        let mut offset = 0;
        let mut push = |kind, layer, shape: Vec<usize>, fan_in| {
            let b = ParamBlock {
                kind,
                layer,
                offset,
                shape,
                fan_in,
            };
            offset += b.len();
            blocks.push(b);
        };
        let widths = arch.conv_widths();
        for l in 0..arch.conv_layers {
            let c_in = if l == 0 { 1 } else { arch.channels };
            let fan_in = c_in * arch.kernel_size;
            push(
                BlockKind::ConvKernel,
                l + 1,
                vec![arch.channels, c_in, arch.kernel_size],
                fan_in,
            );
            push(
                BlockKind::ConvBias,
                l + 1,
                vec![arch.channels, widths[l + 1]],
                fan_in,
            );
        }
        let mut prev = arch.feature_width();
        for (j, &w) in arch.fc_widths.iter().enumerate() {
            let layer = arch.conv_layers + j + 1;
            push(BlockKind::FcWeight, layer, vec![w, prev], prev);
            push(BlockKind::FcBias, layer, vec![w], prev);
            prev = w;
        }
        let last = arch.conv_layers + arch.fc_widths.len() + 1;
        push(BlockKind::OutputWeight, last, vec![prev], prev);
        push(BlockKind::OutputBias, last, vec![1], prev);
        Self { blocks }
    }

    pub fn len(&self) -> usize {
        self.blocks.last().map_or(0, |b| b.offset + b.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn find(&self, kind: BlockKind, layer: usize) -> Option<&ParamBlock> {
        self.blocks
            .iter()
            .find(|b| b.kind == kind && b.layer == layer)
    }
}

/// Trainable parameters for one [`ArchSpec`], stored flat.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamSet {
    arch: ArchSpec,
    values: Vec<f64>,
}

impl ParamSet {
    pub fn zeros(arch: &ArchSpec) -> Result<Self> {
        arch.validate()?;
        Ok(Self {
            values: vec![0.0; arch.param_layout().len()],
            arch: arch.clone(),
        })
    }

    /// Every entry uniform on `[−1/√fan_in, 1/√fan_in]` of its layer.
    pub fn init_uniform(arch: &ArchSpec, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(arch)?;
        let mut rng = seeded_rng(seed);
        for block in arch.param_layout().blocks {
            let a = 1.0 / (block.fan_in as f64).sqrt();
            for v in &mut p.values[block.range()] {
                *v = rng.random_range(-a..=a);
            }
        }
        Ok(p)
    }

    pub fn from_values(arch: &ArchSpec, values: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let n = arch.param_layout().len();
        if values.len() != n {
            return Err(Error::invalid(
                "params",
                format!("expected {n} values, got {}", values.len()),
            ));
        }
        Ok(Self {
            arch: arch.clone(),
            values,
        })
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, kind: BlockKind, layer: usize) -> Option<&[f64]> {
        let layout = self.arch.param_layout();
        layout.find(kind, layer).map(|b| &self.values[b.range()])
    }

    pub fn block_mut(&mut self, kind: BlockKind, layer: usize) -> Option<&mut [f64]> {
        let layout = self.arch.param_layout();
        let r = layout.find(kind, layer)?.range();
        Some(&mut self.values[r])
    }

    /// `(B1, B2, B3, B4)`: max |kernel entry|, |conv bias|, |FC weight|, |FC bias|.
    pub fn sup_norms(&self) -> [f64; 4] {
        let mut out = [0.0f64; 4];
        for b in self.arch.param_layout().blocks {
            let slot = match b.kind {
                BlockKind::ConvKernel => 0,
                BlockKind::ConvBias => 1,
                BlockKind::FcWeight | BlockKind::OutputWeight => 2,
                BlockKind::FcBias | BlockKind::OutputBias => 3,
            };
            for v in &self.values[b.range()] {
                out[slot] = out[slot].max(v.abs());
            }
        }
        out
    }

    pub fn fingerprint(&self) -> Result<String> {
        fingerprint(&self.to_document()?)
    }

    pub fn to_document(&self) -> Result<ParamDocument> {
        let layout = self.arch.param_layout();
        let mut conv = Vec::new();
        let mut fc = Vec::new();
        let mut output = OutputDoc {
            weight: Vec::new(),
            bias: 0.0,
        };
        let mut blocks = layout.blocks.iter();
        while let Some(b) = blocks.next() {
            let v = &self.values[b.range()];
            match b.kind {
                BlockKind::ConvKernel => {
                    let bias = blocks.next().unwrap();
                    let (c_out, c_in, s) = (b.shape[0], b.shape[1], b.shape[2]);
                    let kernel = (0..c_out)
                        .map(|o| {
                            (0..c_in)
                                .map(|i| v[(o * c_in + i) * s..][..s].to_vec())
                                .collect()
                        })
                        .collect();
                    let bv = &self.values[bias.range()];
                    let w = bias.shape[1];
                    conv.push(ConvDoc {
                        kernel,
                        bias: bv.chunks(w).map(<[f64]>::to_vec).collect(),
                    });
                }
                BlockKind::FcWeight => {
                    let bias = blocks.next().unwrap();
                    fc.push(FcDoc {
                        weight: v.chunks(b.shape[1]).map(<[f64]>::to_vec).collect(),
                        bias: self.values[bias.range()].to_vec(),
                    });
                }
                BlockKind::OutputWeight => output.weight = v.to_vec(),
                BlockKind::OutputBias => output.bias = v[0],
                _ => unreachable!("bias blocks follow their weights"),
            }
        }
        Ok(ParamDocument {
            arch_fingerprint: self.arch.fingerprint()?,
            arch: self.arch.clone(),
            conv,
            fc,
            output,
        })
    }

    pub fn from_document(doc: &ParamDocument) -> Result<Self> {
        if doc.arch.fingerprint()? != doc.arch_fingerprint {
            return Err(Error::invalid(
                "arch_fingerprint",
                "does not match the embedded arch",
            ));
        }
        let mut values = Vec::new();
        for c in &doc.conv {
            values.extend(c.kernel.iter().flatten().flatten());
            values.extend(c.bias.iter().flatten());
        }
        for f in &doc.fc {
            values.extend(f.weight.iter().flatten());
            values.extend(&f.bias);
        }
        values.extend(&doc.output.weight);
        values.push(doc.output.bias);
        let p = Self::from_values(&doc.arch, values)?;
        if p.to_document()? != *doc {
            return Err(Error::invalid(
                "params",
                "layer shapes do not match the arch",
            ));
        }
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String> {
        crate::io::to_json_sig17(&self.to_document()?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(s)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvDoc {
    /// `[c_out][c_in][S]`.
    pub kernel: Vec<Vec<Vec<f64>>>,
    /// `[c_out][d_l]`.
    pub bias: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FcDoc {
    pub weight: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputDoc {
    pub weight: Vec<f64>,
    pub bias: f64,
}

/// Layer-ordered JSON form of a [`ParamSet`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamDocument {
    pub arch_fingerprint: String,
    pub arch: ArchSpec,
    pub conv: Vec<ConvDoc>,
    pub fc: Vec<FcDoc>,
    pub output: OutputDoc,
}

/// `(d_in + S − 1) × d_in` matrix with entry `(i, j) = w_{i−j}` for `0 ≤ i − j < S`, row-major.
pub fn conv_toeplitz(w: &[f64], d_in: usize) -> Vec<f64> {
    let s = w.len();
    let rows = d_in + s - 1;
    let mut t = vec![0.0; rows * d_in];
    for i in 0..rows {
        for j in 0..d_in {
            if i >= j && i - j < s {
                t[i * d_in + j] = w[i - j];
            }
        }
    }
    t
}

/// `(v_d, v_{2d}, …)` in 1-based indexing, length `⌊len / d⌋`.
pub fn downsample(v: &[f64], d: usize) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::invalid("d", "stride must be positive"));
    }
    if v.len() < d {
        return Err(Error::invalid(
            "v",
            format!("length {} is shorter than stride {d}", v.len()),
        ));
    }
    Ok((1..=v.len() / d).map(|i| v[i * d - 1]).collect())
}

/// Network output by explicit Toeplitz products, without jets or GEMM.
pub fn forward_value(params: &ParamSet, x: &[f64]) -> Result<f64> {
    let arch = params.arch();
    if x.len() != arch.d {
        return Err(Error::invalid("x", "dimension mismatch"));
    }
    let layout = arch.param_layout();
    let v = params.values();
    let widths = arch.conv_widths();
    let c = arch.channels;
    let s = arch.kernel_size;
    let mut h: Vec<Vec<f64>> = vec![x.to_vec()];
    for l in 0..arch.conv_layers {
        let kernel = &v[layout.find(BlockKind::ConvKernel, l + 1).unwrap().range()];
        let bias = &v[layout.find(BlockKind::ConvBias, l + 1).unwrap().range()];
        let c_in = h.len();
        let mut next = Vec::with_capacity(c);
        for o in 0..c {
            let mut acc = vec![0.0; widths[l + 1]];
            for (i, hi) in h.iter().enumerate() {
                let t = conv_toeplitz(&kernel[(o * c_in + i) * s..][..s], widths[l]);
                for (r, a) in acc.iter_mut().enumerate() {
                    for (col, &xv) in hi.iter().enumerate() {
                        *a += t[r * widths[l] + col] * xv;
                    }
                }
            }
            for (r, a) in acc.iter_mut().enumerate() {
                *a = arch.activations[l].value(*a - bias[o * widths[l + 1] + r]);
            }
            next.push(acc);
        }
        h = next;
    }
    let mut z: Vec<f64> = Vec::new();
    for ch in &h {
        z.extend(downsample(ch, arch.d)?);
    }
    for (j, _) in arch.fc_widths.iter().enumerate() {
        let layer = arch.conv_layers + j + 1;
        let wb = layout.find(BlockKind::FcWeight, layer).unwrap();
        let w = &v[wb.range()];
        let b = &v[layout.find(BlockKind::FcBias, layer).unwrap().range()];
        let n_in = wb.shape[1];
        z = (0..wb.shape[0])
            .map(|r| {
                let pre: f64 = (0..n_in).map(|q| w[r * n_in + q] * z[q]).sum();
                arch.activations[layer - 1].value(pre - b[r])
            })
            .collect();
    }
    let last = arch.conv_layers + arch.fc_depth() + 1;
    let w = &v[layout.find(BlockKind::OutputWeight, last).unwrap().range()];
    let b = v[layout.find(BlockKind::OutputBias, last).unwrap().range()][0];
    Ok(w.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() - b)
}

/// A network with frozen parameters, usable as a [`ScalarField`].
pub struct Network {
    model: Model,
    params: ParamSet,
}

impl Network {
    pub fn new(params: ParamSet) -> Result<Self> {
        Ok(Self {
            model: params.arch().model()?,
            params,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn into_params(self) -> ParamSet {
        self.params
    }

    pub fn forward_jet(&self, x: &[f64]) -> Result<Jet2> {
        self.model.forward_jet(self.params.values(), x)
    }
}

impl ScalarField for Network {
    fn dim(&self) -> usize {
        self.model.input_dim()
    }

    fn jet(&self, x: &[f64]) -> Jet2 {
        self.forward_jet(x)
            .unwrap_or_else(|_| Jet2::constant(self.dim(), f64::NAN))
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.model
            .evaluate(self.params.values(), x, crate::tape::JetLayout::Value)
            .map_or(f64::NAN, |v| v[0])
    }
}

/// Output jet of the network at `x`.
pub fn forward_jet(params: &ParamSet, x: &[f64]) -> Result<Jet2> {
    params.arch().model()?.forward_jet(params.values(), x)
}

/// Tied-parameter description: `groups[i]` is the free-parameter group of
/// entry `i`, or `None` for an entry fixed by construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparsityMask {
    pub groups: Vec<Option<usize>>,
}

impl SparsityMask {
    pub fn dense(n: usize) -> Self {
        Self {
            groups: (0..n).map(Some).collect(),
        }
    }

    /// Number of distinct groups.
    pub fn free_count(&self) -> usize {
        let mut g: Vec<usize> = self.groups.iter().flatten().copied().collect();
        g.sort_unstable();
        g.dedup();
        g.len()
    }
}

/// Free-parameter count `𝒮`: all entries when dense, distinct groups under a mask.
pub fn count_free_params(arch: &ArchSpec, mask: Option<&SparsityMask>) -> Result<usize> {
    arch.validate()?;
    let n = arch.param_layout().len();
    match mask {
        None => Ok(n),
        Some(m) if m.groups.len() == n => Ok(m.free_count()),
        Some(m) => Err(Error::invalid(
            "sparsity_mask",
            format!("mask covers {} entries, arch has {n}", m.groups.len()),
        )),
    }
}

/// `𝒮 (L + L0) ln(k (L + L0) w)` for a given parameter count and max width `w`.
pub fn vc_metric_raw(free_params: f64, depth: usize, k: u32, max_width: f64) -> f64 {
    let depth = depth as f64;
    free_params * depth * (k as f64 * depth * max_width).ln()
}

/// VC-dimension complexity metric of a dense architecture.
pub fn vc_metric(arch: &ArchSpec) -> Result<f64> {
    let s = count_free_params(arch, None)? as f64;
    Ok(vc_metric_raw(
        s,
        arch.conv_layers + arch.fc_depth(),
        arch.power(),
        arch.max_width() as f64,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupNormCheck {
    pub within_budget: bool,
    pub max_observed: f64,
}

/// Empirical `max_{|α| ≤ order} |D^α u|` over the samples (Euclidean partials), against `budget`.
pub fn check_sup_norm<F: ScalarField + ?Sized>(
    field: &F,
    budget: f64,
    samples: &SampleSet,
    order: u8,
) -> Result<SupNormCheck> {
    if !(budget > 0.0) {
        return Err(Error::invalid("budget", "must be positive"));
    }
    if order > 2 {
        return Err(Error::invalid("order", "must be 0, 1 or 2"));
    }
    let mut max = 0.0f64;
    for x in samples.iter() {
        if order == 0 {
            max = max.max(field.value(x).abs());
            continue;
        }
        let j = field.jet(x);
        max = max.max(j.value.abs());
        max = j.grad.iter().fold(max, |m, g| m.max(g.abs()));
        if order == 2 {
            max = j.hess.iter().fold(max, |m, h| m.max(h.abs()));
        }
    }
    if !max.is_finite() {
        return Err(Error::non_finite("sup-norm check"));
    }
    Ok(SupNormCheck {
        within_budget: max <= budget,
        max_observed: max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ArchSpec {
        ArchSpec {
            d: 3,
            conv_layers: 1,
            kernel_size: 3,
            channels: 1,
            fc_widths: vec![2],
            activations: vec![Activation::Relu, Activation::Relu],
            sup_budget: None,
        }
    }

    #[test]
    fn toeplitz_examples() {
        let t = conv_toeplitz(&[1.0, 0.0, 0.0], 4);
        for i in 0..6 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_eq!(t[i * 4 + j], expect);
            }
        }
        assert_eq!(conv_toeplitz(&[2.0, 3.0, 5.0], 1), vec![2.0, 3.0, 5.0]);
    }

    #[test]
    fn downsample_examples() {
        let v: Vec<f64> = (1..=6).map(f64::from).collect();
        assert_eq!(downsample(&v, 3).unwrap(), vec![3.0, 6.0]);
        assert_eq!(downsample(&v, 1).unwrap(), v);
        let v7: Vec<f64> = (1..=7).map(f64::from).collect();
        assert_eq!(downsample(&v7, 3).unwrap(), vec![3.0, 6.0]);
        assert!(downsample(&v[..2], 3).is_err());
    }

    #[test]
    fn dense_count_by_hand() {
        // kernel 3, conv bias 5, fc weight 2x1, fc bias 2, output weight 2, output bias 1
        assert_eq!(count_free_params(&tiny(), None).unwrap(), 15);
    }

    #[test]
    fn passthrough_network_selects_a_coordinate() {
        let arch = tiny();
        let mut p = ParamSet::zeros(&arch).unwrap();
        p.block_mut(BlockKind::ConvKernel, 1).unwrap()[0] = 1.0;
        p.block_mut(BlockKind::FcWeight, 2)
            .unwrap()
            .copy_from_slice(&[1.0, 0.0]);
        p.block_mut(BlockKind::OutputWeight, 3)
            .unwrap()
            .copy_from_slice(&[1.0, 0.0]);
        let x = [0.48, 0.6, 0.64];
        let jet = forward_jet(&p, &x).unwrap();
        assert_eq!(jet.value, 0.64);
        assert_eq!(jet.grad, vec![0.0, 0.0, 1.0]);
        assert!(jet.hess.iter().all(|&h| h == 0.0));
        assert_eq!(forward_value(&p, &x).unwrap(), 0.64);
    }

    #[test]
    fn zero_network_is_zero() {
        let p = ParamSet::zeros(&ArchSpec::default_for_dim(3)).unwrap();
        let jet = forward_jet(&p, &[0.0, 0.6, 0.8]).unwrap();
        assert_eq!(jet, Jet2::zero(3));
    }

    #[test]
    fn json_round_trip() {
        let mut arch = tiny();
        arch.channels = 2;
        let p = ParamSet::init_uniform(&arch, 3).unwrap();
        let s = p.to_json().unwrap();
        assert_eq!(ParamSet::from_json(&s).unwrap(), p);
    }

    #[test]
    fn vc_metric_identity_case() {
        // 10 free params, depth 2, k = 1, width chosen so the log term is 1
        let v = vc_metric_raw(10.0, 2, 1, std::f64::consts::E / 2.0);
        assert!((v - 20.0).abs() < 1e-12);
        assert_eq!(
            vc_metric_raw(20.0, 2, 1, 7.0),
            2.0 * vc_metric_raw(10.0, 2, 1, 7.0)
        );
        let default = vc_metric(&ArchSpec::default_for_dim(3)).unwrap();
        assert!(default.is_finite() && default > 0.0);
    }
}
