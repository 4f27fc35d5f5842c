use crate::error::{Error, Result};

use super::cutoff::SmoothCutoff;

const T_TOL: f64 = 1e-12;

fn check_t(t: f64) -> Result<f64> {
    if !(t.abs() <= 1.0 + T_TOL) {
        return Err(Error::invalid(
            "t",
            format!("|t| must not exceed 1, got {t}"),
        ));
    }
    Ok(t.clamp(-1.0, 1.0))
}

/// `table[j][i] = D^j P_i(t)` for `i ≤ n`, `j ≤ order`, where `P_i` is `C^λ_i`
/// for `λ > 0` and the Chebyshev polynomial `T_i` for `λ = 0`.
fn recurrence_table(lambda: f64, n: usize, t: f64, order: usize) -> Vec<Vec<f64>> {
    let mut table = vec![vec![0.0; n + 1]; order + 1];
    table[0][0] = 1.0;
    if n == 0 {
        return table;
    }
    let c1 = if lambda > 0.0 { 2.0 * lambda } else { 1.0 };
    table[0][1] = c1 * t;
    if order >= 1 {
        table[1][1] = c1;
    }
    for m in 1..n {
        let mf = m as f64;
        let (a, b) = if lambda > 0.0 {
            (
                2.0 * (mf + lambda) / (mf + 1.0),
                (mf + 2.0 * lambda - 1.0) / (mf + 1.0),
            )
        } else {
            (2.0, 1.0)
        };
        for j in 0..=order {
            let lower = if j > 0 {
                j as f64 * table[j - 1][m]
            } else {
                0.0
            };
            table[j][m + 1] = a * (t * table[j][m] + lower) - b * table[j][m - 1];
        }
    }
    table
}

/// Gegenbauer polynomial `C^λ_i(t)` with `λ = (d − 2)/2`.
///
/// For `λ = 0` this returns the limit `(1/λ)·C^λ_i = (2/i)·cos(i·arccos t)`
/// (and `1` for `i = 0`).
pub fn gegenbauer(lambda: f64, i: usize, t: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::invalid("lambda", "must be nonnegative"));
    }
    let t = check_t(t)?;
    let v = recurrence_table(lambda, i, t, 0)[0][i];
    Ok(if lambda == 0.0 && i > 0 {
        2.0 * v / i as f64
    } else {
        v
    })
}

/// `((λ + i)/λ)·C^λ_i` and its derivatives up to `order`, for all `i ≤ n`;
/// `out[j][i]`. The `d = 2` limit is `2·T_i` for `i ≥ 1`.
pub fn zonal_terms(d: usize, n: usize, t: f64, order: usize) -> Result<Vec<Vec<f64>>> {
    if d < 2 {
        return Err(Error::invalid("d", "must be at least 2"));
    }
    let t = check_t(t)?;
    let lambda = (d as f64 - 2.0) / 2.0;
    let mut table = recurrence_table(lambda, n, t, order);
    for row in &mut table {
        for (i, v) in row.iter_mut().enumerate() {
            let scale = if lambda > 0.0 {
                (lambda + i as f64) / lambda
            } else if i == 0 {
                1.0
            } else {
                2.0
            };
            *v *= scale;
        }
    }
    Ok(table)
}

/// Zonal kernel `l_{n0}(t) = Σ_{i ≤ 2n0} η(i/n0)^p ((λ+i)/λ) C^λ_i(t)` with
/// `p = 1`, or `p = 2` for the squared variant.
#[derive(Clone, Debug, PartialEq)]
pub struct ZonalKernel {
    pub n0: usize,
    pub d: usize,
    pub squared: bool,
    weights: Vec<f64>,
}

impl ZonalKernel {
    pub fn new(n0: usize, d: usize, cutoff: SmoothCutoff, squared: bool) -> Result<Self> {
        if n0 == 0 {
            return Err(Error::invalid("n0", "must be at least 1"));
        }
        if d < 2 {
            return Err(Error::invalid("d", "must be at least 2"));
        }
        let weights = (0..=2 * n0)
            .map(|i| {
                let e = cutoff.eval(i as f64 / n0 as f64);
                if squared {
                    e * e
                } else {
                    e
                }
            })
            .collect();
        Ok(Self {
            n0,
            d,
            squared,
            weights,
        })
    }

    /// Polynomial degree bound `2·n0`.
    pub fn degree(&self) -> usize {
        2 * self.n0
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        Ok(self.derivatives(t, 0)?[0])
    }

    /// `[l, l', …, l^{(order)}]` at `t`.
    pub fn derivatives(&self, t: f64, order: usize) -> Result<Vec<f64>> {
        let table = zonal_terms(self.d, self.degree(), t, order)?;
        Ok(table
            .iter()
            .map(|row| row.iter().zip(&self.weights).map(|(z, w)| z * w).sum())
            .collect())
    }
}

/// `l_{n0}(t)` (or the squared-cutoff variant).
pub fn kernel_l(n0: usize, d: usize, t: f64, cutoff: SmoothCutoff, squared: bool) -> Result<f64> {
    ZonalKernel::new(n0, d, cutoff, squared)?.eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn gegenbauer_at_one_and_degree_zero() {
        assert_eq!(gegenbauer(1.5, 2, 1.0).unwrap(), 6.0);
        for d in 3..=8u64 {
            let lambda = (d as f64 - 2.0) / 2.0;
            for i in 0..8u64 {
                let v = gegenbauer(lambda, i as usize, 1.0).unwrap();
                let b = binom(i + d - 3, i);
                assert!(
                    (v - b).abs() < 1e-12 * b.max(1.0),
                    "d={d} i={i}: {v} vs {b}"
                );
            }
        }
        for t in [-1.0, -0.3, 0.0, 0.8] {
            assert_eq!(gegenbauer(0.7, 0, t).unwrap(), 1.0);
        }
        assert!(gegenbauer(0.5, 2, 1.1).is_err());
    }

    #[test]
    fn legendre_and_chebyshev_limits() {
        for g in 0..=20 {
            let t = -1.0 + g as f64 * 0.1;
            let p3 = 0.5 * (5.0 * t * t * t - 3.0 * t);
            assert!((gegenbauer(0.5, 3, t).unwrap() - p3).abs() < 1e-12);
            let lim = 2.0 / 5.0 * (5.0 * t.acos()).cos();
            assert!((gegenbauer(0.0, 5, t).unwrap() - lim).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_hand_value_and_derivatives() {
        let eta = SmoothCutoff;
        assert!((kernel_l(1, 3, 1.0, eta, false).unwrap() - 4.0).abs() < 1e-14);
        assert_eq!(
            kernel_l(1, 3, 0.3, eta, false).unwrap(),
            kernel_l(1, 3, 0.3, eta, true).unwrap()
        );
        let k = ZonalKernel::new(3, 4, eta, false).unwrap();
        let h = 1e-4;
        for t in [-0.7, 0.1, 0.6] {
            let dv = k.derivatives(t, 2).unwrap();
            let fd1 = (k.eval(t + h).unwrap() - k.eval(t - h).unwrap()) / (2.0 * h);
            let fd2 = (k.eval(t + h).unwrap() - 2.0 * dv[0] + k.eval(t - h).unwrap()) / (h * h);
            assert!((dv[1] - fd1).abs() < 1e-6 * dv[1].abs().max(1.0));
            assert!((dv[2] - fd2).abs() < 1e-4 * dv[2].abs().max(1.0));
        }
    }
}
