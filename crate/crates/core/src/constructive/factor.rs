use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `(ζ, ξ)` with `ζ_i = i` and `x^l = Σ_i ξ_i (x + ζ_i)^k` for `x ≥ 0`.
pub fn power_decomposition(l: usize, k: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if l >= k {
        return Err(Error::invalid(
            "l",
            format!("need l < k, got l = {l}, k = {k}"),
        ));
    }
    let zeta: Vec<f64> = (0..=k).map(|i| i as f64).collect();
    // Row q matches the coefficient of x^q.
    let a = DMatrix::from_fn(k + 1, k + 1, |q, i| {
        binom(k, q) * zeta[i].powi((k - q) as i32)
    });
    let mut rhs = DVector::zeros(k + 1);
    rhs[l] = 1.0;
    let xi = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("power decomposition system".into()))?;
    Ok((zeta, xi.iter().copied().collect()))
}

/// Coefficients of the product of two polynomials (ascending powers).
pub fn polymul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut c = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            c[i + j] += x * y;
        }
    }
    c
}

/// Kernels `w^(1), …, w^(L)` with `W = w^(L) ∗ ⋯ ∗ w^(1)`, plus the roots used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factorization {
    /// Each of length `S`, zero padded.
    pub kernels: Vec<Vec<f64>>,
    /// `(re, im)` of every root of `W(z)`.
    pub roots: Vec<(f64, f64)>,
}

impl Factorization {
    pub fn reconvolve(&self) -> Vec<f64> {
        self.kernels
            .iter()
            .fold(vec![1.0], |acc, w| polymul(&acc, w))
    }

    pub fn max_root_modulus(&self) -> f64 {
        self.roots
            .iter()
            .map(|&(re, im)| re.hypot(im))
            .fold(0.0, f64::max)
    }
}

fn horner(c: &[f64], z: Complex64) -> (Complex64, Complex64) {
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &a in c.iter().rev() {
        dp = dp * z + p;
        p = p * z + a;
    }
    (p, dp)
}

/// Roots of `Σ c_j z^j` from companion-matrix eigenvalues, each polished by one Newton step.
pub fn poly_roots(c: &[f64]) -> Result<Vec<Complex64>> {
    let n = c.len() - 1;
    let lead = c[n];
    if lead == 0.0 {
        return Err(Error::RootFinding {
            coefficients: c.to_vec(),
        });
    }
    if n == 0 {
        return Ok(vec![]);
    }
    let mut comp = DMatrix::zeros(n, n);
    for i in 1..n {
        comp[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        comp[(i, n - 1)] = -c[i] / lead;
    }
    let eig = comp
        .try_schur(f64::EPSILON, 10_000)
        .ok_or_else(|| Error::RootFinding {
            coefficients: c.to_vec(),
        })?
        .complex_eigenvalues();
    let mut roots = Vec::with_capacity(n);
    for z in eig.iter() {
        let z = Complex64::new(z.re, z.im);
        let (p, dp) = horner(c, z);
        let polished = if dp.norm() > 0.0 { z - p / dp } else { z };
        let z = if polished.is_finite() && horner(c, polished).0.norm() <= p.norm() {
            polished
        } else {
            z
        };
        if !z.is_finite() {
            return Err(Error::RootFinding {
                coefficients: c.to_vec(),
            });
        }
        roots.push(z);
    }
    Ok(roots)
}

/// Factors `W(z)` into real kernels of degree at most `S − 1`.
///
/// Conjugate pairs become real quadratics; quadratics are packed first, then
/// linear factors, greedily. The leading coefficient multiplies the first kernel.
pub fn conv_factorize(w: &[f64], s: usize) -> Result<Factorization> {
    if s < 3 {
        return Err(Error::invalid("S", "kernel size must be at least 3"));
    }
    let Some(top) = w.iter().rposition(|&v| v != 0.0) else {
        return Err(Error::invalid("W", "sequence is identically zero"));
    };
    if top + 1 != w.len() {
        return Err(Error::invalid("W", "leading coefficient must be nonzero"));
    }
    let roots = poly_roots(w)?;
    let scale = roots.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    let mut factors: Vec<Vec<f64>> = Vec::new();
    let mut upper = 0usize;
    let mut lower = 0usize;
    for z in &roots {
        if z.im > tol {
            upper += 1;
            factors.push(vec![z.norm_sqr(), -2.0 * z.re, 1.0]);
        } else if z.im < -tol {
            lower += 1;
        }
    }
    if upper != lower {
        return Err(Error::RootFinding {
            coefficients: w.to_vec(),
        });
    }
    factors.extend(
        roots
            .iter()
            .filter(|z| z.im.abs() <= tol)
            .map(|z| vec![-z.re, 1.0]),
    );
    let mut kernels: Vec<Vec<f64>> = Vec::new();
    let mut current = vec![w[top]];
    for f in factors {
        if current.len() - 1 + f.len() - 1 > s - 1 {
            kernels.push(std::mem::replace(&mut current, vec![1.0]));
        }
        current = polymul(&current, &f);
    }
    kernels.push(current);
    for k in &mut kernels {
        k.resize(s, 0.0);
    }
    Ok(Factorization {
        kernels,
        roots: roots.iter().map(|z| (z.re, z.im)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_decomposition_examples() {
        let (z, x) = power_decomposition(0, 1).unwrap();
        assert_eq!(z, vec![0.0, 1.0]);
        assert!((x[0] + 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
        let (_, x) = power_decomposition(1, 2).unwrap();
        for (a, b) in x.iter().zip([-0.75, 1.0, -0.25]) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(power_decomposition(2, 2).is_err());
    }

    #[test]
    fn factorize_examples() {
        let f = conv_factorize(&[1.0, -2.0, 1.0], 3).unwrap();
        assert_eq!(f.kernels.len(), 1);
        for (a, b) in f.kernels[0].iter().zip([1.0, -2.0, 1.0]) {
            assert!((a - b).abs() < 1e-7);
        }
        let f = conv_factorize(&[-1.0, 0.0, 0.0, 1.0], 3).unwrap();
        assert_eq!(f.kernels.len(), 2);
        let r = f.reconvolve();
        for (a, b) in r.iter().zip([-1.0, 0.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        let mut found: Vec<Vec<f64>> = f.kernels.clone();
        found.sort_by(|a, b| a[2].partial_cmp(&b[2]).unwrap());
        assert!((found[0][0] + 1.0).abs() < 1e-12 && (found[0][1] - 1.0).abs() < 1e-12);
        assert!(found[1].iter().all(|v| (v - 1.0).abs() < 1e-12));
    }
}
