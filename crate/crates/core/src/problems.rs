//! Closed-form ground truths and right-hand sides for the experiment families.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::jet::{packed_index, Jet2};
use crate::pinn::{OperatorSpec, Problem};
use crate::sphere::ScalarField;

/// `Σ_i φ(x_i)` for a univariate `φ` given with its first two derivatives.
pub struct Separable {
    d: usize,
    phi: Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>,
}

impl Separable {
    pub fn new(d: usize, phi: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static) -> Self {
        Self {
            d,
            phi: Arc::new(phi),
        }
    }
}

impl ScalarField for Separable {
    fn dim(&self) -> usize {
        self.d
    }

    fn jet(&self, x: &[f64]) -> Jet2 {
        let mut j = Jet2::zero(self.d);
        for (i, &xi) in x.iter().enumerate() {
            let [v, g, h] = (self.phi)(xi);
            j.value += v;
            j.grad[i] = g;
            j.hess[packed_index(self.d, i, i)] = h;
        }
        j
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|&xi| (self.phi)(xi)[0]).sum()
    }
}

/// `scale · Σ_{i=1}^{d−2} x_i x_{i+1} x_{i+2}`.
#[derive(Clone, Copy, Debug)]
pub struct TripleProducts {
    pub d: usize,
    pub scale: f64,
}

impl ScalarField for TripleProducts {
    fn dim(&self) -> usize {
        self.d
    }

    fn jet(&self, x: &[f64]) -> Jet2 {
        let d = self.d;
        let mut j = Jet2::zero(d);
        for i in 0..d - 2 {
            let (a, b, c) = (x[i], x[i + 1], x[i + 2]);
            j.value += a * b * c;
            j.grad[i] += b * c;
            j.grad[i + 1] += a * c;
            j.grad[i + 2] += a * b;
            j.hess[packed_index(d, i, i + 1)] += c;
            j.hess[packed_index(d, i, i + 2)] += b;
            j.hess[packed_index(d, i + 1, i + 2)] += a;
        }
        j.scale(self.scale)
    }
}

/// `max(0, t)^p` with its first two derivatives, exact branch logic.
pub fn relu_pow(t: f64, p: i32) -> [f64; 3] {
    if t <= 0.0 {
        return [0.0; 3];
    }
    let pf = p as f64;
    let pow = |e: i32| if e == 0 { 1.0 } else { t.powi(e) };
    [
        pow(p),
        if p >= 1 { pf * pow(p - 1) } else { 0.0 },
        if p >= 2 {
            pf * (pf - 1.0) * pow(p - 2)
        } else {
            0.0
        },
    ]
}

/// Value-only `max(0, t)^p`, with `max(0, t)^0` read as the indicator of `t > 0`.
fn rp(t: f64, p: i32) -> f64 {
    if t > 0.0 {
        t.powi(p)
    } else {
        0.0
    }
}

/// Family names accepted by [`problem_library`].
pub const PROBLEM_NAMES: [&str; 4] = ["smooth2d", "smoothness_r", "dim_smooth", "dim_structured"];

/// Closed-form problems for `−Δ₀u + u = f`.
///
/// `d` is ignored by `smooth2d` and `smoothness_r` (both live on `S²`); `r` is
/// read only by `smoothness_r`.
pub fn problem_library(name: &str, d: usize, r: u32) -> Result<Problem> {
    let op = OperatorSpec::Schrodinger { potential: 1.0 };
    match name {
        "smooth2d" => Ok(Problem::new(
            "smooth2d",
            3,
            Some(Arc::new(TripleProducts { d: 3, scale: 1.0 })),
            Arc::new(TripleProducts { d: 3, scale: 13.0 }),
            op,
        )?),
        "smoothness_r" => {
            if !(3..=8).contains(&r) {
                return Err(Error::invalid(
                    "r",
                    format!("smoothness must lie in 3..=8, got {r}"),
                ));
            }
            let ri = r as i32;
            let rf = r as f64;
            let u = Separable::new(3, move |t| {
                let [a0, a1, a2] = relu_pow(0.5 + t / rf, ri);
                let [b0, b1, b2] = relu_pow(0.5 - t / rf, ri);
                [a0 + b0, (a1 - b1) / rf, (a2 + b2) / (rf * rf)]
            });
            let f = Separable::new(3, move |t| {
                let (p, m) = (0.5 + t / rf, 0.5 - t / rf);
                let v = rp(p, ri) + rp(m, ri) + 2.0 * t * (rp(p, ri - 1) - rp(m, ri - 1))
                    - (rf - 1.0) / rf * (1.0 - t * t) * (rp(p, ri - 2) + rp(m, ri - 2));
                [v, f64::NAN, f64::NAN]
            });
            Problem::new(
                &format!("smoothness_r{r}"),
                3,
                Some(Arc::new(u)),
                Arc::new(f),
                op,
            )
        }
        "dim_smooth" => {
            check_dim(d)?;
            Problem::new(
                &format!("dim_smooth_d{d}"),
                d,
                Some(Arc::new(TripleProducts { d, scale: 1.0 })),
                Arc::new(TripleProducts {
                    d,
                    scale: (3 * d + 4) as f64,
                }),
                op,
            )
        }
        "dim_structured" => {
            check_dim(d)?;
            let u = Separable::new(d, |t| {
                let [a0, a1, a2] = relu_pow(0.5 + t, 3);
                let [b0, b1, b2] = relu_pow(0.5 - t, 3);
                [a0 + b0, a1 - b1, a2 + b2]
            });
            let df = d as f64;
            let f = Separable::new(d, move |t| {
                let (p, m) = (0.5 + t, 0.5 - t);
                let v = rp(p, 3) + rp(m, 3) + 3.0 * (df - 1.0) * t * (rp(p, 2) - rp(m, 2))
                    - 6.0 * (1.0 - t * t) * (rp(p, 1) + rp(m, 1));
                [v, f64::NAN, f64::NAN]
            });
            Problem::new(
                &format!("dim_structured_d{d}"),
                d,
                Some(Arc::new(u)),
                Arc::new(f),
                op,
            )
        }
        _ => Err(Error::invalid(
            "problem",
            format!("unknown problem `{name}`; expected one of {PROBLEM_NAMES:?}"),
        )),
    }
}

fn check_dim(d: usize) -> Result<()> {
    if (3..=10).contains(&d) {
        Ok(())
    } else {
        Err(Error::invalid(
            "d",
            format!("dimension must lie in 3..=10, got {d}"),
        ))
    }
}
