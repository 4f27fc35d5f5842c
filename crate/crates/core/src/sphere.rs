//! Sampling on `S^{d-1}`, scalar fields, angular derivatives and Monte-Carlo
//! Sobolev-norm estimates.

use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::io::format_sig17;
use crate::jet::{jet_seed, Jet2};
use crate::rng::seeded_rng;

/// Maximum tolerated deviation of a sample's norm from 1.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// `n` points on `S^{d-1}`, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    points: Vec<f64>,
    d: usize,
    seed: u64,
}

impl SampleSet {
    /// Wraps existing rows after checking that each lies on the sphere.
    pub fn from_rows(points: Vec<f64>, d: usize, seed: u64) -> Result<Self> {
        if d < 2 {
            return Err(Error::invalid("d", "ambient dimension must be at least 2"));
        }
        if points.is_empty() || !points.len().is_multiple_of(d) {
            return Err(Error::invalid(
                "points",
                "expected a non-empty n x d matrix",
            ));
        }
        for row in points.chunks_exact(d) {
            let norm = norm(row);
            if (norm - 1.0).abs() >= UNIT_NORM_TOL {
                return Err(Error::OffSphere { norm });
            }
        }
        Ok(Self { points, d, seed })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.points
    }

    /// Rows selected by `indices`, flattened.
    pub fn gather(&self, indices: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            out.extend_from_slice(self.point(i));
        }
        out
    }

    /// Writes one row per point, `d` columns, 17 significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        self.write_csv_tagged(writer, None)
    }

    /// As [`SampleSet::write_csv`], with a trailing `config_fingerprint` column when given.
    pub fn write_csv_tagged<W: Write>(&self, writer: W, fingerprint: Option<&str>) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(writer);
        let mut header: Vec<String> = (1..=self.d).map(|i| format!("x{i}")).collect();
        if fingerprint.is_some() {
            header.push(FINGERPRINT_COLUMN.to_string());
        }
        w.write_record(&header)?;
        for row in self.iter() {
            let mut rec: Vec<String> = row.iter().map(|&v| format_sig17(v)).collect();
            if let Some(f) = fingerprint {
                rec.push(f.to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the format produced by [`SampleSet::write_csv_tagged`].
    pub fn read_csv<R: Read>(reader: R, seed: u64) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let skip = r.headers()?.iter().position(|h| h == FINGERPRINT_COLUMN);
        let d = r.headers()?.len() - usize::from(skip.is_some());
        let mut points = Vec::new();
        for record in r.records() {
            let record = record?;
            for (c, field) in record.iter().enumerate() {
                if Some(c) == skip {
                    continue;
                }
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid("csv", format!("not a number: `{field}`")))?;
                points.push(v);
            }
        }
        Self::from_rows(points, d, seed)
    }
}

const FINGERPRINT_COLUMN: &str = "config_fingerprint";

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `n` i.i.d. uniform points on `S^{d-1}` (normalized standard Gaussian vectors).
pub fn sample_uniform(n: usize, d: usize, seed: u64) -> Result<SampleSet> {
    if d < 2 {
        return Err(Error::invalid("d", "ambient dimension must be at least 2"));
    }
    if n == 0 {
        return Err(Error::invalid("n", "sample count must be positive"));
    }
    let mut rng = seeded_rng(seed);
    let mut points = Vec::with_capacity(n * d);
    let mut row = vec![0.0; d];
    for _ in 0..n {
        loop {
            for v in row.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let r = norm(&row);
            if r > 0.0 && r.is_finite() {
                points.extend(row.iter().map(|v| v / r));
                break;
            }
        }
    }
    Ok(SampleSet { points, d, seed })
}

/// A scalar field on `R^d` evaluated together with its first two derivatives.
pub trait ScalarField: Send + Sync {
    fn dim(&self) -> usize;

    fn jet(&self, x: &[f64]) -> Jet2;

    fn value(&self, x: &[f64]) -> f64 {
        self.jet(x).value
    }
}

impl<T: ScalarField + ?Sized> ScalarField for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn jet(&self, x: &[f64]) -> Jet2 {
        (**self).jet(x)
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
}

impl<T: ScalarField + ?Sized> ScalarField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn jet(&self, x: &[f64]) -> Jet2 {
        (**self).jet(x)
    }
    fn value(&self, x: &[f64]) -> f64 {
        (**self).value(x)
    }
}

/// Field given as a composition of jet operations on the seeded coordinates.
pub struct JetFn<F> {
    d: usize,
    f: F,
}

impl<F> JetFn<F>
where
    F: Fn(&[Jet2]) -> Jet2 + Send + Sync,
{
    pub fn new(d: usize, f: F) -> Self {
        Self { d, f }
    }
}

impl<F> ScalarField for JetFn<F>
where
    F: Fn(&[Jet2]) -> Jet2 + Send + Sync,
{
    fn dim(&self) -> usize {
        self.d
    }

    fn jet(&self, x: &[f64]) -> Jet2 {
        (self.f)(&jet_seed(x))
    }
}

/// The zero field.
#[derive(Clone, Copy, Debug)]
pub struct ZeroField(pub usize);

impl ScalarField for ZeroField {
    fn dim(&self) -> usize {
        self.0
    }
    fn jet(&self, _x: &[f64]) -> Jet2 {
        Jet2::zero(self.0)
    }
}

/// `alpha * a + beta * b`, evaluated jet-wise.
pub struct LinearCombination<A, B> {
    pub alpha: f64,
    pub a: A,
    pub beta: f64,
    pub b: B,
}

impl<A: ScalarField, B: ScalarField> ScalarField for LinearCombination<A, B> {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn jet(&self, x: &[f64]) -> Jet2 {
        &self.a.jet(x).scale(self.alpha) + &self.b.jet(x).scale(self.beta)
    }
}

/// `D_{i,j} f = x_i ∂_j f − x_j ∂_i f` from a jet; indices are 0-based.
pub fn angular_from_jet(jet: &Jet2, x: &[f64], i: usize, j: usize) -> f64 {
    x[i] * jet.grad[j] - x[j] * jet.grad[i]
}

/// `D_{i,j}(D_{i,j} f)` from a jet by the product rule:
/// `x_i² f_jj + x_j² f_ii − 2 x_i x_j f_ij − x_i f_i − x_j f_j`.
pub fn angular_second_from_jet(jet: &Jet2, x: &[f64], i: usize, j: usize) -> f64 {
    x[i] * x[i] * jet.hess_at(j, j) + x[j] * x[j] * jet.hess_at(i, i)
        - 2.0 * x[i] * x[j] * jet.hess_at(i, j)
        - x[i] * jet.grad[i]
        - x[j] * jet.grad[j]
}

fn check_pair(d: usize, i: usize, j: usize) -> Result<()> {
    if i == j {
        return Err(Error::invalid("i,j", "angular derivative needs i != j"));
    }
    if i == 0 || j == 0 || i > d || j > d {
        return Err(Error::invalid(
            "i,j",
            format!("indices must lie in 1..={d}, got ({i}, {j})"),
        ));
    }
    Ok(())
}

/// Angular derivative `D_{i,j} f(x)`, indices 1-based as in `1 <= i < j <= d`.
pub fn angular_derivative<F: ScalarField + ?Sized>(
    field: &F,
    x: &[f64],
    i: usize,
    j: usize,
) -> Result<f64> {
    check_pair(x.len(), i, j)?;
    Ok(angular_from_jet(&field.jet(x), x, i - 1, j - 1))
}

/// `D_{i,j}² f(x)`, indices 1-based.
pub fn angular_second_derivative<F: ScalarField + ?Sized>(
    field: &F,
    x: &[f64],
    i: usize,
    j: usize,
) -> Result<f64> {
    check_pair(x.len(), i, j)?;
    Ok(angular_second_from_jet(&field.jet(x), x, i - 1, j - 1))
}

/// Exponent of the Monte-Carlo `L^p` norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormExponent {
    Two,
    /// Empirical maximum over the samples; an under-estimate of the true sup.
    Infinity,
}

#[derive(Default)]
struct Accum {
    sum_sq: f64,
    max_abs: f64,
}

impl Accum {
    fn push(&mut self, v: f64) {
        self.sum_sq += v * v;
        self.max_abs = self.max_abs.max(v.abs());
    }

    fn finish(&self, n: usize, p: NormExponent) -> f64 {
        match p {
            NormExponent::Two => (self.sum_sq / n as f64).sqrt(),
            NormExponent::Infinity => self.max_abs,
        }
    }
}

/// Monte-Carlo estimate of `‖f‖_p + Σ_{i<j} ‖D^r_{i,j} f‖_p` with
/// `f = field_a − field_b` and `r = order ∈ {0, 1, 2}`.
///
/// For `order = 0` this is the empirical `L^p` norm of the difference alone.
pub fn mc_sobolev_error<A, B>(
    field_a: &A,
    field_b: &B,
    order: u8,
    samples: &SampleSet,
    p: NormExponent,
) -> Result<f64>
where
    A: ScalarField + ?Sized,
    B: ScalarField + ?Sized,
{
    if order > 2 {
        return Err(Error::invalid("order", "Sobolev order must be 0, 1 or 2"));
    }
    let d = samples.dim();
    let pairs: Vec<(usize, usize)> = (0..d)
        .flat_map(|i| (i + 1..d).map(move |j| (i, j)))
        .collect();
    let mut base = Accum::default();
    let mut per_pair: Vec<Accum> = pairs.iter().map(|_| Accum::default()).collect();
    for x in samples.iter() {
        let diff = &field_a.jet(x) - &field_b.jet(x);
        if !diff.is_finite() {
            return Err(Error::non_finite("field evaluation"));
        }
        base.push(diff.value);
        if order == 0 {
            continue;
        }
        for (acc, &(i, j)) in per_pair.iter_mut().zip(&pairs) {
            let v = if order == 1 {
                angular_from_jet(&diff, x, i, j)
            } else {
                angular_second_from_jet(&diff, x, i, j)
            };
            acc.push(v);
        }
    }
    let n = samples.len();
    let mut total = base.finish(n, p);
    if order > 0 {
        total += per_pair.iter().map(|a| a.finish(n, p)).sum::<f64>();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::Jet2;

    #[test]
    fn samples_are_unit_norm_and_deterministic() {
        let s = sample_uniform(3, 3, 7).unwrap();
        assert_eq!(s.len(), 3);
        for row in s.iter() {
            assert!((norm(row) - 1.0).abs() < 1e-12);
        }
        assert_eq!(s, sample_uniform(3, 3, 7).unwrap());
        assert_ne!(s, sample_uniform(3, 3, 8).unwrap());
    }

    #[test]
    fn rejects_degenerate_requests() {
        assert!(sample_uniform(0, 3, 1).is_err());
        assert!(sample_uniform(5, 1, 1).is_err());
        assert!(matches!(
            SampleSet::from_rows(vec![1.0, 1.0], 2, 0),
            Err(Error::OffSphere { .. })
        ));
    }

    #[test]
    fn coordinate_means_near_zero() {
        // 3 sigma / sqrt(n) with sigma^2 = 1/3
        let bound = 3.0 * (1.0f64 / 3.0).sqrt() / 100.0;
        assert!(bound < 0.05);
        let s = sample_uniform(10_000, 3, 1).unwrap();
        for c in 0..3 {
            let mean: f64 = s.iter().map(|x| x[c]).sum::<f64>() / s.len() as f64;
            assert!(mean.abs() < 0.05, "coordinate {c} mean {mean}");
        }
    }

    #[test]
    fn angular_derivative_examples() {
        let linear = JetFn::new(3, |x: &[Jet2]| x[0].clone());
        let v = angular_derivative(&linear, &[0.0, 1.0, 0.0], 1, 2).unwrap();
        assert_eq!(v, -1.0);

        let constant = JetFn::new(3, |_x: &[Jet2]| Jet2::constant(3, 4.2));
        assert_eq!(
            angular_derivative(&constant, &[0.6, 0.8, 0.0], 1, 3).unwrap(),
            0.0
        );

        let radial = JetFn::new(3, |x: &[Jet2]| {
            &(&(&x[0] * &x[0]) + &(&x[1] * &x[1])) + &(&x[2] * &x[2])
        });
        let s = sample_uniform(20, 3, 3).unwrap();
        for x in s.iter() {
            for (i, j) in [(1, 2), (1, 3), (2, 3)] {
                assert!(angular_derivative(&radial, x, i, j).unwrap().abs() < 1e-15);
            }
        }

        assert!(angular_derivative(&linear, &[1.0, 0.0, 0.0], 2, 2).is_err());
        assert!(angular_derivative(&linear, &[1.0, 0.0, 0.0], 1, 4).is_err());
        assert!(angular_derivative(&linear, &[1.0, 0.0, 0.0], 0, 1).is_err());
    }

    #[test]
    fn sobolev_error_identities() {
        let f = JetFn::new(3, |x: &[Jet2]| &(&x[0] * &x[1]) * &x[2]);
        let s = sample_uniform(500, 3, 11).unwrap();
        for order in 0..=2 {
            for p in [NormExponent::Two, NormExponent::Infinity] {
                assert_eq!(mc_sobolev_error(&f, &f, order, &s, p).unwrap(), 0.0);
            }
        }
        let zero = ZeroField(3);
        let one = mc_sobolev_error(&f, &zero, 0, &s, NormExponent::Two).unwrap();
        let doubled = LinearCombination {
            alpha: 2.0,
            a: &f,
            beta: 0.0,
            b: &zero,
        };
        let two = mc_sobolev_error(&doubled, &zero, 0, &s, NormExponent::Two).unwrap();
        assert_eq!(two, 2.0 * one);
        assert!(mc_sobolev_error(&f, &zero, 3, &s, NormExponent::Two).is_err());
    }

    #[test]
    fn csv_round_trip_preserves_bits() {
        let s = sample_uniform(17, 4, 5).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,x3,x4\n"));
        let back = SampleSet::read_csv(buf.as_slice(), 5).unwrap();
        assert_eq!(back, s);
    }
}
