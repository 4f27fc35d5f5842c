//! Element-wise activations with analytic derivatives through third order.
//!
//! The third derivative is needed by the reverse pass over second-order jets:
//! the adjoint of `g''(v) ∇v ∇vᵀ` with respect to `v` involves `g'''(v)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

/// Pre-activations beyond this magnitude are treated as saturated for
/// `softplus` and `logistic`.
pub const SATURATION_CLAMP: f64 = 500.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Relu,
    /// `max(0, x)^k`.
    ReluPow(u32),
    /// Tanh approximation `0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))`.
    Gelu,
    /// `gelu(x)^k`.
    GeluPow(u32),
    Softplus,
    Logistic,
}

impl Activation {
    /// `[g, g', g'', g''']` at `x`.
    ///
    /// Derivatives of the ReLU family at the kink are taken as 0.
    pub fn derivatives(self, x: f64) -> [f64; 4] {
        match self {
            Activation::Identity => [x, 1.0, 0.0, 0.0],
            Activation::Relu => {
                if x > 0.0 {
                    [x, 1.0, 0.0, 0.0]
                } else {
                    [0.0; 4]
                }
            }
            Activation::ReluPow(k) => {
                if x > 0.0 {
                    power_derivatives(x, k)
                } else {
                    [0.0; 4]
                }
            }
            Activation::Gelu => gelu_derivatives(x),
            Activation::GeluPow(k) => {
                let [g, g1, g2, g3] = gelu_derivatives(x);
                let [p0, p1, p2, p3] = power_derivatives(g, k);
                // Faa di Bruno through order three.
                [
                    p0,
                    p1 * g1,
                    p2 * g1 * g1 + p1 * g2,
                    p3 * g1 * g1 * g1 + 3.0 * p2 * g1 * g2 + p1 * g3,
                ]
            }
            Activation::Softplus => {
                if x > SATURATION_CLAMP {
                    [x, 1.0, 0.0, 0.0]
                } else if x < -SATURATION_CLAMP {
                    [0.0; 4]
                } else {
                    let s = logistic(x);
                    let s1 = s * (1.0 - s);
                    [x.exp().ln_1p(), s, s1, s1 * (1.0 - 2.0 * s)]
                }
            }
            Activation::Logistic => {
                if x > SATURATION_CLAMP {
                    [1.0, 0.0, 0.0, 0.0]
                } else if x < -SATURATION_CLAMP {
                    [0.0; 4]
                } else {
                    let s = logistic(x);
                    let s1 = s * (1.0 - s);
                    [
                        s,
                        s1,
                        s1 * (1.0 - 2.0 * s),
                        s1 * (1.0 - 6.0 * s + 6.0 * s * s),
                    ]
                }
            }
        }
    }

    #[inline]
    pub fn value(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::ReluPow(k) => {
                if x > 0.0 {
                    x.powi(k as i32)
                } else {
                    0.0
                }
            }
            _ => self.derivatives(x)[0],
        }
    }

    /// Polynomial degree of the activation where it is piecewise polynomial.
    pub fn power(self) -> u32 {
        match self {
            Activation::ReluPow(k) | Activation::GeluPow(k) => k,
            _ => 1,
        }
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Derivatives of `t -> t^k` at `t`.
fn power_derivatives(t: f64, k: u32) -> [f64; 4] {
    let kf = k as f64;
    let p = |n: i64| -> f64 {
        if n < 0 {
            0.0
        } else {
            t.powi(n as i32)
        }
    };
    let k = k as i64;
    [
        p(k),
        kf * p(k - 1),
        kf * (kf - 1.0) * p(k - 2),
        kf * (kf - 1.0) * (kf - 2.0) * p(k - 3),
    ]
}

fn gelu_derivatives(x: f64) -> [f64; 4] {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let u1 = GELU_C * (1.0 + 3.0 * GELU_A * x * x);
    let u2 = 6.0 * GELU_C * GELU_A * x;
    let u3 = 6.0 * GELU_C * GELU_A;
    let t = u.tanh();
    let s = 1.0 - t * t;
    let t1 = s * u1;
    let t2 = s * (u2 - 2.0 * t * u1 * u1);
    let t3 = s * ((4.0 * t * t - 2.0 * s) * u1 * u1 * u1 - 6.0 * t * u1 * u2 + u3);
    [
        0.5 * x * (1.0 + t),
        0.5 * (1.0 + t) + 0.5 * x * t1,
        t1 + 0.5 * x * t2,
        1.5 * t2 + 0.5 * x * t3,
    ]
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Identity => write!(f, "identity"),
            Activation::Relu => write!(f, "relu"),
            Activation::ReluPow(k) => write!(f, "relu^{k}"),
            Activation::Gelu => write!(f, "gelu"),
            Activation::GeluPow(k) => write!(f, "gelu^{k}"),
            Activation::Softplus => write!(f, "softplus"),
            Activation::Logistic => write!(f, "logistic"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let bad = || Error::invalid("activation", format!("unknown activation `{s}`"));
        let (name, power) = match lower.split_once('^') {
            Some((name, p)) => {
                let k: u32 = p.parse().map_err(|_| bad())?;
                if k == 0 {
                    return Err(Error::invalid("activation", "power must be at least 1"));
                }
                (name.to_string(), Some(k))
            }
            None => (lower.clone(), None),
        };
        Ok(match (name.as_str(), power) {
            ("identity", None) => Activation::Identity,
            ("relu", None) | ("relu", Some(1)) => Activation::Relu,
            ("relu", Some(k)) => Activation::ReluPow(k),
            ("gelu", None) | ("gelu", Some(1)) => Activation::Gelu,
            ("gelu", Some(k)) => Activation::GeluPow(k),
            ("softplus", None) => Activation::Softplus,
            ("logistic", None) => Activation::Logistic,
            _ => return Err(bad()),
        })
    }
}

impl Serialize for Activation {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Activation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
