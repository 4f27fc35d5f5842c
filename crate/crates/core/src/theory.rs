//! Closed-form learning-rate exponents and the matching architecture scalings.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smoothness `r` of the solution; infinity is its own token.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    Finite(f64),
    Infinite,
}

impl fmt::Display for Smoothness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Smoothness::Finite(r) => write!(f, "{r}"),
            Smoothness::Infinite => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Smoothness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Smoothness::Infinite),
            t => t
                .parse::<f64>()
                .ok()
                .filter(|r| r.is_finite())
                .map(Smoothness::Finite)
                .ok_or_else(|| {
                    Error::invalid("r", format!("expected a number or 'inf', got {s:?}"))
                }),
        }
    }
}

/// Which formula applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateBranch {
    /// `r < ∞`, `d > 3`.
    FiniteHighDim,
    /// `r < ∞`, `2 ≤ d ≤ 3`.
    FiniteLowDim,
    /// `r = ∞`.
    Infinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateInputs {
    pub r: Smoothness,
    /// Operator order.
    pub s: u32,
    pub d: u32,
    /// ReLU^k power.
    pub k: u32,
}

impl RateInputs {
    /// The power forced on the `r < ∞`, `d > 3` branch: `s + ⌈(r + s + 2)/(d − 3)⌉`.
    pub fn required_k(r: f64, s: u32, d: u32) -> Option<u32> {
        (d > 3).then(|| s + ((r + s as f64 + 2.0) / (d - 3) as f64).ceil() as u32)
    }

    pub fn branch(&self) -> RateBranch {
        match self.r {
            Smoothness::Infinite => RateBranch::Infinite,
            Smoothness::Finite(_) if self.d > 3 => RateBranch::FiniteHighDim,
            Smoothness::Finite(_) => RateBranch::FiniteLowDim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::invalid("d", "dimension must be at least 2"));
        }
        if self.k < self.s {
            return Err(Error::invalid("k", format!("need k >= s = {}", self.s)));
        }
        if let Smoothness::Finite(r) = self.r {
            if r.is_nan() || r < self.s as f64 + 1.0 {
                return Err(Error::invalid(
                    "r",
                    format!("need r >= s + 1 = {}", self.s + 1),
                ));
            }
            if let Some(k) = Self::required_k(r, self.s, self.d) {
                if self.k != k {
                    return Err(Error::invalid(
                        "k",
                        format!(
                            "for r < inf and d > 3 the power must be {k}, got {}",
                            self.k
                        ),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Exponent `a` in the excess-risk rate `n^{−a}` (up to logarithms).
pub fn rate_exponent(inputs: &RateInputs) -> Result<f64> {
    inputs.validate()?;
    let s = inputs.s as f64;
    let d = inputs.d as f64;
    let k = inputs.k as f64;
    Ok(match inputs.r {
        Smoothness::Infinite => 1.0 - 1.0 / (2.0 * (k - s) + 3.0),
        Smoothness::Finite(r) if inputs.d > 3 => (r - s) / ((r - s) + (d - 1.0)),
        Smoothness::Finite(r) => {
            let num = d * (k - s + 2.0) + r + k;
            1.0 - num / (num + 2.0 * (r - s) * (k - s + 1.0))
        }
    })
}

/// Multipliers on the four asymptotic scalings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchConstants {
    pub depth: f64,
    pub width_first: f64,
    pub width_second: f64,
    pub params: f64,
}

impl Default for ArchConstants {
    fn default() -> Self {
        Self {
            depth: 1.0,
            width_first: 1.0,
            width_second: 1.0,
            params: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchRecommendation {
    pub branch: RateBranch,
    pub a: f64,
    /// Convolution depth `L`.
    pub conv_layers: u64,
    /// `d_{L+1}`.
    pub width_first: u64,
    /// `d_{L+2}`.
    pub width_second: u64,
    /// Free-parameter budget `𝒮`.
    pub free_params: u64,
}

/// `c · n^p (log n)^q`, rounded to the nearest positive integer.
fn scale(c: f64, n: f64, p: f64, q: f64) -> u64 {
    (c * n.powf(p) * n.ln().powf(q)).round().max(1.0) as u64
}

/// Sizes `(L, d_{L+1}, d_{L+2}, 𝒮)` from the rate theorem's scalings.
///
/// For `r = ∞` every `1/(r − s)` term is taken at its limit zero, and
/// `(d + r + s − 1)/(r − s)` at its limit one.
pub fn recommend_architecture(
    n: u64,
    inputs: &RateInputs,
    constants: &ArchConstants,
) -> Result<ArchRecommendation> {
    if n < 2 {
        return Err(Error::invalid("n", "sample size must be at least 2"));
    }
    let a = rate_exponent(inputs)?;
    let branch = inputs.branch();
    let s = inputs.s as f64;
    let d = inputs.d as f64;
    let k = inputs.k as f64;
    // inv = 1/(r − s), ratio = (d + r + s − 1)/(r − s).
    let (inv, ratio) = match inputs.r {
        Smoothness::Finite(r) => (1.0 / (r - s), (d + r + s - 1.0) / (r - s)),
        Smoothness::Infinite => (0.0, 1.0),
    };
    let nf = n as f64;
    let ks = k - s + 1.0;
    let depth_p = a * (d - 1.0) / 2.0 * inv;
    let conv_layers = scale(constants.depth, nf, depth_p, -2.0 * depth_p);
    let first_p = a * ratio / (2.0 * ks) + a * (d + 1.0) / 2.0 * inv;
    let width_first = scale(constants.width_first, nf, first_p, -2.0 * first_p);
    let width_second = scale(constants.width_second, nf, depth_p, -2.0 * depth_p);
    let free_params = match branch {
        RateBranch::FiniteHighDim => scale(constants.params, nf, depth_p, -2.0 * depth_p),
        _ => {
            let p = a * ratio / (2.0 * ks) + a * inv;
            scale(constants.params, nf, p, -2.0 * p)
        }
    };
    Ok(ArchRecommendation {
        branch,
        a,
        conv_layers,
        width_first,
        width_second,
        free_params,
    })
}
