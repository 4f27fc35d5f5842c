//! Second-order forward jets.
//!
//! A [`Jet2`] carries the value, Euclidean gradient and Euclidean Hessian of a
//! scalar field at one point in `R^d`. The Hessian is stored as its packed
//! upper triangle (row-major, `i <= j`), so symmetry holds by construction.

use std::ops::{Add, Mul, Neg, Sub};

use crate::activation::Activation;

/// Number of packed upper-triangle entries of a `d x d` symmetric matrix.
#[inline]
pub const fn packed_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Position of entry `(i, j)` in the packed upper triangle.
#[inline]
pub fn packed_index(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * d - i + 1) / 2 + (j - i)
}

/// Value, gradient and Hessian of a scalar field at a point.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub grad: Vec<f64>,
    /// Packed upper triangle, see [`packed_index`].
    pub hess: Vec<f64>,
}

impl Jet2 {
    pub fn zero(d: usize) -> Self {
        Self {
            value: 0.0,
            grad: vec![0.0; d],
            hess: vec![0.0; packed_len(d)],
        }
    }

    pub fn constant(d: usize, value: f64) -> Self {
        Self {
            value,
            ..Self::zero(d)
        }
    }

    /// Jet of the coordinate function `x -> x_i` at a point with `x_i = value`.
    pub fn variable(d: usize, i: usize, value: f64) -> Self {
        let mut j = Self::constant(d, value);
        j.grad[i] = 1.0;
        j
    }

    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    #[inline]
    pub fn hess_at(&self, i: usize, j: usize) -> f64 {
        self.hess[packed_index(self.dim(), i, j)]
    }

    /// Full symmetric Hessian as a row-major `d x d` array.
    pub fn hessian_matrix(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = self.hess_at(i, j);
            }
        }
        out
    }

    pub fn trace_hessian(&self) -> f64 {
        (0..self.dim()).map(|i| self.hess_at(i, i)).sum()
    }

    /// `v^T H v` for the stored Hessian.
    pub fn hess_quadratic(&self, v: &[f64]) -> f64 {
        let d = self.dim();
        let mut acc = 0.0;
        for i in 0..d {
            acc += v[i] * v[i] * self.hess_at(i, i);
            for j in i + 1..d {
                acc += 2.0 * v[i] * v[j] * self.hess_at(i, j);
            }
        }
        acc
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|g| g.is_finite())
            && self.hess.iter().all(|h| h.is_finite())
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            value: alpha * self.value,
            grad: self.grad.iter().map(|g| alpha * g).collect(),
            hess: self.hess.iter().map(|h| alpha * h).collect(),
        }
    }

    pub fn add_constant(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.value += c;
        out
    }

    /// Second-order chain rule through a univariate function given its value
    /// and first two derivatives at `self.value`.
    pub fn compose(&self, g0: f64, g1: f64, g2: f64) -> Self {
        let d = self.dim();
        let mut hess = Vec::with_capacity(packed_len(d));
        for i in 0..d {
            for j in i..d {
                hess.push(g1 * self.hess_at(i, j) + g2 * self.grad[i] * self.grad[j]);
            }
        }
        Self {
            value: g0,
            grad: self.grad.iter().map(|g| g1 * g).collect(),
            hess,
        }
    }

    /// Applies an activation through the chain rule.
    pub fn activate(&self, act: Activation) -> Self {
        let [g0, g1, g2, _] = act.derivatives(self.value);
        self.compose(g0, g1, g2)
    }

    pub fn powi(&self, n: i32) -> Self {
        let v = self.value;
        let (g0, g1, g2) = match n {
            0 => (1.0, 0.0, 0.0),
            1 => (v, 1.0, 0.0),
            _ => {
                let nf = n as f64;
                (
                    v.powi(n),
                    nf * v.powi(n - 1),
                    nf * (nf - 1.0) * v.powi(n - 2),
                )
            }
        };
        self.compose(g0, g1, g2)
    }
}

/// Seeds one jet per coordinate of `x`: value `x_i`, gradient `e_i`, zero Hessian.
pub fn jet_seed(x: &[f64]) -> Vec<Jet2> {
    let d = x.len();
    x.iter()
        .enumerate()
        .map(|(i, &xi)| Jet2::variable(d, i, xi))
        .collect()
}

/// Applies `g` (with derivatives `g'`, `g''`) to `a` by the exact second-order chain rule.
pub fn jet_compose_unary<F>(g: F, a: &Jet2) -> Jet2
where
    F: Fn(f64) -> (f64, f64, f64),
{
    let (g0, g1, g2) = g(a.value);
    a.compose(g0, g1, g2)
}

/// Binary operations supported directly on jets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JetBinaryOp {
    Add,
    Sub,
    Mul,
}

pub fn jet_binary(op: JetBinaryOp, a: &Jet2, b: &Jet2) -> Jet2 {
    assert_eq!(a.dim(), b.dim(), "jet dimension mismatch");
    match op {
        JetBinaryOp::Add => Jet2 {
            value: a.value + b.value,
            grad: a.grad.iter().zip(&b.grad).map(|(x, y)| x + y).collect(),
            hess: a.hess.iter().zip(&b.hess).map(|(x, y)| x + y).collect(),
        },
        JetBinaryOp::Sub => Jet2 {
            value: a.value - b.value,
            grad: a.grad.iter().zip(&b.grad).map(|(x, y)| x - y).collect(),
            hess: a.hess.iter().zip(&b.hess).map(|(x, y)| x - y).collect(),
        },
        JetBinaryOp::Mul => {
            let d = a.dim();
            let mut hess = Vec::with_capacity(packed_len(d));
            for i in 0..d {
                for j in i..d {
                    let k = hess.len();
                    hess.push(
                        a.value * b.hess[k]
                            + b.value * a.hess[k]
                            + a.grad[i] * b.grad[j]
                            + b.grad[i] * a.grad[j],
                    );
                }
            }
            Jet2 {
                value: a.value * b.value,
                grad: a
                    .grad
                    .iter()
                    .zip(&b.grad)
                    .map(|(ga, gb)| a.value * gb + b.value * ga)
                    .collect(),
                hess,
            }
        }
    }
}

impl Add for &Jet2 {
    type Output = Jet2;
    fn add(self, rhs: &Jet2) -> Jet2 {
        jet_binary(JetBinaryOp::Add, self, rhs)
    }
}

impl Sub for &Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: &Jet2) -> Jet2 {
        jet_binary(JetBinaryOp::Sub, self, rhs)
    }
}

impl Mul for &Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: &Jet2) -> Jet2 {
        jet_binary(JetBinaryOp::Mul, self, rhs)
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, rhs: Jet2) -> Jet2 {
        &self + &rhs
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, rhs: Jet2) -> Jet2 {
        &self - &rhs
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: Jet2) -> Jet2 {
        &self * &rhs
    }
}

impl Mul<f64> for &Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: f64) -> Jet2 {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, rhs: f64) -> Jet2 {
        self.scale(rhs)
    }
}

impl Neg for &Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packed_index_covers_upper_triangle() {
        for d in 1..7 {
            let mut seen = vec![false; packed_len(d)];
            let mut expect = 0;
            for i in 0..d {
                for j in i..d {
                    let k = packed_index(d, i, j);
                    assert_eq!(k, expect);
                    assert_eq!(k, packed_index(d, j, i));
                    seen[k] = true;
                    expect += 1;
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn seed_jets() {
        let jets = jet_seed(&[0.0, 0.0, 1.0]);
        assert_eq!(jets[2].value, 1.0);
        assert_eq!(jets[2].grad, vec![0.0, 0.0, 1.0]);
        let mut sum = vec![0.0; 3];
        for j in &jets {
            assert!(j.hess.iter().all(|&h| h == 0.0));
            for (s, g) in sum.iter_mut().zip(&j.grad) {
                *s += g;
            }
        }
        assert_eq!(sum, vec![1.0; 3]);
    }

    #[test]
    fn compose_identity_square_and_dead_relu_cube() {
        let x = jet_seed(&[0.3, -0.2, 0.5]);
        let id = jet_compose_unary(|v| (v, 1.0, 0.0), &x[0]);
        assert_eq!(id, x[0]);

        let sq = jet_compose_unary(|v| (v * v, 2.0 * v, 2.0), &x[0]);
        assert!((sq.value - 0.09).abs() < 1e-15);
        assert_eq!(sq.grad, vec![0.6, 0.0, 0.0]);
        assert_eq!(sq.hess_at(0, 0), 2.0);
        assert_eq!(sq.hess.iter().filter(|&&h| h != 0.0).count(), 1);

        let a = Jet2 {
            value: -0.5,
            grad: vec![1.0, 2.0, 3.0],
            hess: vec![1.0; 6],
        };
        let dead = a.activate(Activation::ReluPow(3));
        assert_eq!(dead, Jet2::zero(3));
    }

    #[test]
    fn product_of_two_seeds_has_single_mixed_entry() {
        let x = jet_seed(&[0.7, -0.1, 0.2]);
        let p = &x[0] * &x[1];
        let nonzero: Vec<_> = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .filter(|&(i, j)| p.hess_at(i, j) != 0.0)
            .collect();
        assert_eq!(nonzero, vec![(0, 1), (1, 0)]);
        assert_eq!(p.hess_at(0, 1), 1.0);

        let z = &x[0] - &x[0];
        assert_eq!(z, Jet2::zero(3));
    }
}
