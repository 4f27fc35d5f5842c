use serde::{Deserialize, Serialize};

/// C^∞ cutoff with `η = 1` on `[0, 1]`, `η = 0` on `[2, ∞)`.
///
/// On `(1, 2)` it is the standard smooth step `g(2 − t) / (g(2 − t) + g(t − 1))`
/// built from `g(x) = exp(−1/x)`, which is flat to all orders at both ends.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SmoothCutoff;

fn flat(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

impl SmoothCutoff {
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 1.0 {
            1.0
        } else if t >= 2.0 {
            0.0
        } else {
            let a = flat(2.0 - t);
            a / (a + flat(t - 1.0))
        }
    }
}
