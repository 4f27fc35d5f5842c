use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const X_TOL: f64 = 1e-12;

/// Degree-`k` splines on the extended uniform partition of `[−1, 1]` into `2N`
/// intervals, endpoint knots repeated `k + 1` times.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplineSpec {
    pub k: usize,
    /// `N`: half the number of interior intervals.
    pub n_half: usize,
}

impl SplineSpec {
    pub fn new(k: usize, n_half: usize) -> Result<Self> {
        if n_half == 0 {
            return Err(Error::invalid("N", "must be at least 1"));
        }
        Ok(Self { k, n_half })
    }

    /// `t_1, …, t_{2N+2k+1}` (stored 0-based).
    pub fn knots(&self) -> Vec<f64> {
        let (k, n) = (self.k, self.n_half);
        let mut t = vec![-1.0; k + 1];
        t.extend((1..2 * n).map(|i| -1.0 + i as f64 / n as f64));
        t.extend(std::iter::repeat_n(1.0, k + 1));
        t
    }

    /// `2N + k`.
    pub fn basis_count(&self) -> usize {
        2 * self.n_half + self.k
    }

    /// Knot averages `(t_{i+1} + … + t_{i+k}) / k`, one per basis function.
    pub fn greville(&self) -> Vec<f64> {
        let t = self.knots();
        let k = self.k;
        (0..self.basis_count())
            .map(|b| {
                if k == 0 {
                    0.5 * (t[b] + t[b + 1])
                } else {
                    t[b + 1..=b + k].iter().sum::<f64>() / k as f64
                }
            })
            .collect()
    }

    pub fn spline(&self, coeffs: Vec<f64>) -> Result<Spline> {
        Spline::new(self.knots(), coeffs, self.k)
    }
}

/// `Σ_b c_b N_b` for a clamped knot vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Spline {
    knots: Vec<f64>,
    coeffs: Vec<f64>,
    degree: usize,
}

impl Spline {
    pub fn new(knots: Vec<f64>, coeffs: Vec<f64>, degree: usize) -> Result<Self> {
        if knots.len() != coeffs.len() + degree + 1 {
            return Err(Error::invalid(
                "coeffs",
                format!(
                    "{} knots need {} coefficients, got {}",
                    knots.len(),
                    knots.len().saturating_sub(degree + 1),
                    coeffs.len()
                ),
            ));
        }
        Ok(Self {
            knots,
            coeffs,
            degree,
        })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    fn domain(&self) -> (f64, f64) {
        (self.knots[self.degree], self.knots[self.coeffs.len()])
    }

    /// Knot span `μ` with `t_μ ≤ x < t_{μ+1}`; the right endpoint uses the last nonempty span.
    fn span(&self, x: f64) -> usize {
        let n = self.coeffs.len();
        let p = self.degree;
        if x >= self.knots[n] {
            let mut mu = n - 1;
            while mu > p && self.knots[mu] >= self.knots[n] {
                mu -= 1;
            }
            return mu;
        }
        let upper = self.knots[p..=n].partition_point(|&t| t <= x) + p;
        upper.saturating_sub(1).clamp(p, n - 1)
    }

    /// de Boor evaluation.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let (a, b) = self.domain();
        if !(x >= a - X_TOL && x <= b + X_TOL) {
            return Err(Error::invalid("x", format!("{x} lies outside [{a}, {b}]")));
        }
        let x = x.clamp(a, b);
        let p = self.degree;
        let mu = self.span(x);
        let t = &self.knots;
        let mut dd: Vec<f64> = (0..=p).map(|j| self.coeffs[j + mu - p]).collect();
        for r in 1..=p {
            for j in (r..=p).rev() {
                let i = j + mu - p;
                let den = t[i + p + 1 - r] - t[i];
                let alpha = if den == 0.0 { 0.0 } else { (x - t[i]) / den };
                dd[j] = (1.0 - alpha) * dd[j - 1] + alpha * dd[j];
            }
        }
        Ok(dd[p])
    }

    /// Exact derivative as a spline of one lower degree.
    pub fn derivative(&self) -> Result<Spline> {
        let p = self.degree;
        if p == 0 {
            return Err(Error::invalid(
                "degree",
                "cannot differentiate a piecewise constant",
            ));
        }
        let t = &self.knots;
        let coeffs = (0..self.coeffs.len() - 1)
            .map(|j| {
                let den = t[j + p + 1] - t[j + 1];
                if den == 0.0 {
                    0.0
                } else {
                    p as f64 * (self.coeffs[j + 1] - self.coeffs[j]) / den
                }
            })
            .collect();
        Spline::new(t[1..t.len() - 1].to_vec(), coeffs, p - 1)
    }

    /// `order`-th derivative spline (`order ≤ degree`).
    pub fn nth_derivative(&self, order: usize) -> Result<Spline> {
        (0..order).try_fold(self.clone(), |s, _| s.derivative())
    }
}

/// `N_i^{k+1}(x)` for `1 ≤ i ≤ 2N + k` (Cox–de Boor, via de Boor on a unit coefficient).
pub fn bspline(spec: &SplineSpec, i: usize, x: f64) -> Result<f64> {
    if i == 0 || i > spec.basis_count() {
        return Err(Error::invalid(
            "i",
            format!(
                "basis index must lie in 1..={}, got {i}",
                spec.basis_count()
            ),
        ));
    }
    if !(x.abs() <= 1.0 + X_TOL) {
        return Err(Error::invalid("x", format!("{x} lies outside [-1, 1]")));
    }
    let mut c = vec![0.0; spec.basis_count()];
    c[i - 1] = 1.0;
    spec.spline(c)?.eval(x)
}

/// Coefficients `J_i(f)` of the spline interpolating `f` at the Greville abscissae.
pub fn interp_spline(spec: &SplineSpec, f: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let n = spec.basis_count();
    let xi = spec.greville();
    let mut a = DMatrix::zeros(n, n);
    for (r, &x) in xi.iter().enumerate() {
        for b in 0..n {
            a[(r, b)] = bspline(spec, b + 1, x)?;
        }
    }
    let rhs = DVector::from_iterator(n, xi.iter().map(|&x| f(x)));
    a.lu()
        .solve(&rhs)
        .map(|v| v.iter().copied().collect())
        .ok_or_else(|| Error::Singular("spline collocation matrix".into()))
}

/// `N_i` on `[−1, 1]` as `Σ_p a_p (x+1)^p + Σ_j c_j (x − τ_j)^k_+`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedPowers {
    /// `(p, a_p)` for the left-boundary polynomial part.
    pub poly: Vec<(usize, f64)>,
    /// `(τ_j, c_j)`.
    pub jumps: Vec<(f64, f64)>,
}

impl TruncatedPowers {
    pub fn eval(&self, k: usize, x: f64) -> f64 {
        let poly: f64 = self
            .poly
            .iter()
            .map(|&(p, a)| a * (x + 1.0).powi(p as i32))
            .sum();
        let trunc: f64 = self
            .jumps
            .iter()
            .map(|&(tau, c)| {
                if x > tau {
                    c * (x - tau).powi(k as i32)
                } else {
                    0.0
                }
            })
            .sum();
        poly + trunc
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Truncated-power form of `N_i^{k+1}` on `[−1, 1]`.
///
/// Left boundary splines (`i ≤ k`) carry powers `(x+1)^p`, `p = i−1, …, k`, and
/// jumps at `t_{k+2}, …, t_{k+i+1}`; interior ones jump at `t_i, …, t_{i+k+1}`;
/// right boundary ones (`i > 2N`) jump at `t_i, …, t_{2N+k}`. Coefficients come
/// from the exact piecewise-constant `k`-th derivative.
pub fn truncated_powers(spec: &SplineSpec, i: usize) -> Result<TruncatedPowers> {
    let (k, n) = (spec.k, spec.n_half);
    if i == 0 || i > spec.basis_count() {
        return Err(Error::invalid("i", "basis index out of range"));
    }
    let t = spec.knots();
    let tk = |j: usize| t[j - 1];
    let mut c = vec![0.0; spec.basis_count()];
    c[i - 1] = 1.0;
    let s = spec.spline(c)?;
    let derivs: Vec<Spline> = (0..=k)
        .map(|o| s.nth_derivative(o))
        .collect::<Result<_>>()?;
    let dk = &derivs[k];
    let h = 0.5 / n as f64;
    let jump = |tau: f64| -> Result<f64> {
        let right = if tau + h <= 1.0 {
            dk.eval(tau + h)?
        } else {
            0.0
        };
        let left = if tau - h >= -1.0 {
            dk.eval(tau - h)?
        } else {
            0.0
        };
        Ok((right - left) / factorial(k))
    };
    let (poly, taus): (Vec<(usize, f64)>, Vec<f64>) = if i <= k {
        let poly = (i - 1..=k)
            .map(|p| Ok((p, derivs[p].eval(-1.0)? / factorial(p))))
            .collect::<Result<_>>()?;
        (poly, (1..=i).map(|j| tk(k + j + 1)).collect())
    } else if i <= 2 * n {
        (vec![], (i..=i + k + 1).map(tk).collect())
    } else {
        (vec![], (i..=2 * n + k).map(tk).collect())
    };
    let jumps = taus
        .into_iter()
        .map(|tau| Ok((tau, jump(tau)?)))
        .collect::<Result<_>>()?;
    Ok(TruncatedPowers { poly, jumps })
}
