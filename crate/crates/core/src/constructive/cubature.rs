use std::f64::consts::PI;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{dot, sample_uniform, ScalarField};

use super::cutoff::SmoothCutoff;
use super::zonal::ZonalKernel;

/// Nodes and weights on `S^{d−1}` for the normalized surface measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubatureRule {
    pub d: usize,
    /// Row-major `m × d`.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Total degree integrated exactly (nominal when `approximate`).
    pub degree: usize,
    /// Set for the Monte-Carlo fallback, which is not exact.
    pub approximate: bool,
}

impl CubatureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.d..(i + 1) * self.d]
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        (0..self.len())
            .map(|i| self.weights[i] * f(self.node(i)))
            .sum()
    }

    /// Nodes mapped by the orthogonal `q` (row-major `d × d`); still a rule of
    /// the same degree because the measure and polynomial spaces are rotation invariant.
    pub fn rotated(&self, q: &[f64]) -> Self {
        let d = self.d;
        let mut nodes = vec![0.0; self.nodes.len()];
        for i in 0..self.len() {
            let y = self.node(i);
            for r in 0..d {
                nodes[i * d + r] = (0..d).map(|c| q[r * d + c] * y[c]).sum();
            }
        }
        Self {
            nodes,
            ..self.clone()
        }
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let step = pn / dp;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Exact rule of total degree `degree` on `S¹` (`d = 2`) or `S²` (`d = 3`).
///
/// `S¹`: `degree + 1` equispaced angles. `S²`: Gauss–Legendre in `x₃` with
/// `⌈(degree+1)/2⌉` nodes times `degree + 1` equispaced azimuths.
pub fn exact_rule(degree: usize, d: usize) -> Result<CubatureRule> {
    let na = degree + 1;
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    match d {
        2 => {
            for j in 0..na {
                let th = 2.0 * PI * j as f64 / na as f64;
                nodes.extend([th.cos(), th.sin()]);
                weights.push(1.0 / na as f64);
            }
        }
        3 => {
            let (z, wz) = gauss_legendre((degree + 1).div_ceil(2));
            for (zi, wi) in z.iter().zip(&wz) {
                let rho = (1.0 - zi * zi).max(0.0).sqrt();
                for j in 0..na {
                    let ph = 2.0 * PI * j as f64 / na as f64;
                    nodes.extend([rho * ph.cos(), rho * ph.sin(), *zi]);
                    weights.push(wi / 2.0 / na as f64);
                }
            }
        }
        _ => {
            return Err(Error::invalid(
                "d",
                format!("exact rules exist for d = 2 or 3, got {d}"),
            ))
        }
    }
    Ok(CubatureRule {
        d,
        nodes,
        weights,
        degree,
        approximate: false,
    })
}

/// Rule of degree `4·n0` on `S^{d−1}`.
///
/// For `d > 3` this falls back to `10·n0^{d−1}` uniform random nodes with equal
/// weights, flagged `approximate`.
pub fn cubature_rule(n0: usize, d: usize) -> Result<CubatureRule> {
    if n0 == 0 {
        return Err(Error::invalid("n0", "must be at least 1"));
    }
    if d < 2 {
        return Err(Error::invalid("d", "must be at least 2"));
    }
    if d <= 3 {
        return exact_rule(4 * n0, d);
    }
    let m = 10 * n0.pow(d as u32 - 1);
    warn!("no exact cubature for d = {d}; using {m} Monte-Carlo nodes");
    let s = sample_uniform(m, d, 0x00C0_BA70 ^ ((n0 as u64) << 8) ^ d as u64)?;
    Ok(CubatureRule {
        d,
        nodes: s.as_flat().to_vec(),
        weights: vec![1.0 / m as f64; m],
        degree: 4 * n0,
        approximate: true,
    })
}

/// Mean of `x^α` over `S^{d−1}`: zero unless every exponent is even, else
/// `Π (α_i − 1)!! / (d (d+2) ⋯ (d + |α| − 2))`.
pub fn sphere_monomial_mean(alpha: &[u32]) -> f64 {
    if alpha.iter().any(|a| a % 2 == 1) {
        return 0.0;
    }
    let d = alpha.len() as f64;
    let mut num = 1.0;
    for &a in alpha {
        let mut k = a as i64 - 1;
        while k > 1 {
            num *= k as f64;
            k -= 2;
        }
    }
    let total: u32 = alpha.iter().sum();
    let den: f64 = (0..total / 2).map(|j| d + 2.0 * j as f64).product();
    num / den
}

/// `L_{n0}(u)(x)` by quadrature; the rule's degree must cover `u · l(⟨x, ·⟩)`.
pub fn op_l<F: ScalarField + ?Sized>(
    u: &F,
    kernel: &ZonalKernel,
    x: &[f64],
    quad: &CubatureRule,
) -> Result<f64> {
    if x.len() != quad.d || kernel.d != quad.d || u.dim() != quad.d {
        return Err(Error::invalid("x", "dimension mismatch"));
    }
    let mut s = 0.0;
    for i in 0..quad.len() {
        let y = quad.node(i);
        s += quad.weights[i] * u.value(y) * kernel.eval(dot(x, y))?;
    }
    Ok(s)
}

/// Extra quadrature degree reserved for the polynomial inputs used in checks.
pub const POLY_DEGREE_ALLOWANCE: usize = 8;

/// Largest deviation between `L̃_{n0}(u)(x)` by direct fine quadrature and the
/// ridge sum `Σ μ_i L_{n0}(u)(y_i) l_{n0}(⟨x, y_i⟩)` over a degree-`4·n0` rule.
///
/// `u` must be a polynomial of degree at most [`POLY_DEGREE_ALLOWANCE`].
pub fn verify_cubature_identity<F: ScalarField + ?Sized>(
    u: &F,
    n0: usize,
    d: usize,
    points: &[Vec<f64>],
) -> Result<f64> {
    let eta = SmoothCutoff;
    let l = ZonalKernel::new(n0, d, eta, false)?;
    let l2 = ZonalKernel::new(n0, d, eta, true)?;
    let coarse = cubature_rule(n0, d)?;
    if coarse.approximate {
        return Err(Error::invalid(
            "d",
            "the identity check needs an exact rule",
        ));
    }
    let fine = exact_rule(2 * n0 + POLY_DEGREE_ALLOWANCE, d)?;
    let lu: Vec<f64> = (0..coarse.len())
        .map(|i| op_l(u, &l, coarse.node(i), &fine))
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for x in points {
        let direct = op_l(u, &l2, x, &fine)?;
        let mut ridge = 0.0;
        for (i, v) in lu.iter().enumerate() {
            ridge += coarse.weights[i] * v * l.eval(dot(x, coarse.node(i)))?;
        }
        worst = worst.max((direct - ridge).abs());
    }
    Ok(worst)
}
