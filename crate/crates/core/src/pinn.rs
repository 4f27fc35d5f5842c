//! The Laplace-Beltrami operator, PINN residuals, risks and relative losses.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::Jet2;
use crate::sphere::{norm, SampleSet, ScalarField};
use crate::tape::{param_gradient, JetLayout, Model, OutputAdjoint, OutputJets};

/// Points farther than this from the unit sphere are rejected.
pub const SPHERE_TOL: f64 = 1e-10;

fn check_on_sphere(x: &[f64]) -> Result<()> {
    let n = norm(x);
    if (n - 1.0).abs() > SPHERE_TOL {
        return Err(Error::OffSphere { norm: n });
    }
    Ok(())
}

/// `Δ₀u(x) = tr H − xᵀ H x − (d − 1) x·∇u` from the Euclidean jet.
pub fn laplace_beltrami(jet: &Jet2, x: &[f64]) -> Result<f64> {
    check_on_sphere(x)?;
    let d = x.len() as f64;
    let radial: f64 = x.iter().zip(&jet.grad).map(|(a, b)| a * b).sum();
    Ok(jet.trace_hessian() - jet.hess_quadratic(x) - (d - 1.0) * radial)
}

/// A derivative read off a jet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Derivative {
    Value,
    /// `∂_i u`, 0-based.
    Grad(usize),
    /// `∂_i ∂_j u`, 0-based.
    Hess(usize, usize),
    LaplaceBeltrami,
}

impl Derivative {
    fn layout(self) -> JetLayout {
        match self {
            Derivative::Value => JetLayout::Value,
            Derivative::Grad(_) | Derivative::LaplaceBeltrami => JetLayout::Laplacian,
            Derivative::Hess(..) => JetLayout::Full,
        }
    }

    fn read_jet(self, jet: &Jet2, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Derivative::Value => jet.value,
            Derivative::Grad(i) => jet.grad[i],
            Derivative::Hess(i, j) => jet.hess_at(i, j),
            Derivative::LaplaceBeltrami => laplace_beltrami(jet, x)?,
        })
    }

    fn read(self, out: &OutputJets<'_>, p: usize) -> f64 {
        match self {
            Derivative::Value => out.value(p),
            Derivative::Grad(i) => out.grad(p, i),
            Derivative::Hess(i, j) => out.hess(p, i, j),
            Derivative::LaplaceBeltrami => out.laplace_beltrami(p),
        }
    }

    fn seed(self, adj: &mut OutputAdjoint<'_>, p: usize, w: f64) {
        match self {
            Derivative::Value => adj.value(p, w),
            Derivative::Grad(i) => adj.grad(p, i, w),
            Derivative::Hess(i, j) => adj.hess(p, i, j, w),
            Derivative::LaplaceBeltrami => adj.laplace_beltrami(p, w),
        }
    }
}

/// A linear operator of order at most two.
#[derive(Clone)]
pub enum OperatorSpec {
    /// `−Δ₀u + V u` with constant `V > 0`.
    Schrodinger { potential: f64 },
    /// `Σ_α a_α(x) D^α u`.
    GeneralLinear {
        terms: Vec<(Derivative, Arc<dyn ScalarField>)>,
    },
}

impl fmt::Debug for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorSpec::Schrodinger { potential } => {
                write!(f, "Schrodinger {{ potential: {potential} }}")
            }
            OperatorSpec::GeneralLinear { terms } => {
                let ds: Vec<_> = terms.iter().map(|t| t.0).collect();
                write!(f, "GeneralLinear {{ terms: {ds:?} }}")
            }
        }
    }
}

impl OperatorSpec {
    /// Smallest jet layout that carries every derivative the operator reads.
    pub fn layout(&self) -> JetLayout {
        match self {
            OperatorSpec::Schrodinger { .. } => JetLayout::Laplacian,
            OperatorSpec::GeneralLinear { terms } => terms
                .iter()
                .map(|(d, _)| d.layout())
                .max()
                .unwrap_or(JetLayout::Value),
        }
    }

    /// `(derivative, coefficient)` pairs at `x`.
    fn coefficients(&self, x: &[f64]) -> Vec<(Derivative, f64)> {
        match self {
            OperatorSpec::Schrodinger { potential } => vec![
                (Derivative::LaplaceBeltrami, -1.0),
                (Derivative::Value, *potential),
            ],
            OperatorSpec::GeneralLinear { terms } => {
                terms.iter().map(|(d, a)| (*d, a.value(x))).collect()
            }
        }
    }
}

/// `𝓛u = f` on `S^{d−1}`, optionally with a known solution.
#[derive(Clone)]
pub struct Problem {
    pub label: String,
    pub d: usize,
    pub u_star: Option<Arc<dyn ScalarField>>,
    /// Right-hand side; only its values are used.
    pub f: Arc<dyn ScalarField>,
    pub operator: OperatorSpec,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("label", &self.label)
            .field("d", &self.d)
            .field("has_u_star", &self.u_star.is_some())
            .field("operator", &self.operator)
            .finish()
    }
}

impl Problem {
    pub fn new(
        label: &str,
        d: usize,
        u_star: Option<Arc<dyn ScalarField>>,
        f: Arc<dyn ScalarField>,
        operator: OperatorSpec,
    ) -> Result<Self> {
        if d < 2 {
            return Err(Error::invalid("d", "dimension must be at least 2"));
        }
        match &operator {
            OperatorSpec::Schrodinger { potential } if !(*potential > 0.0) => {
                return Err(Error::invalid("potential", "V must be positive"));
            }
            OperatorSpec::GeneralLinear { terms } => {
                for (der, _) in terms {
                    let bad = match *der {
                        Derivative::Grad(i) => i >= d,
                        Derivative::Hess(i, j) => i >= d || j >= d,
                        _ => false,
                    };
                    if bad {
                        return Err(Error::invalid("operator", format!("{der:?} out of range")));
                    }
                }
            }
            _ => {}
        }
        Ok(Self {
            label: label.to_string(),
            d,
            u_star,
            f,
            operator,
        })
    }

    pub fn layout(&self) -> JetLayout {
        self.operator.layout()
    }
}

/// `(𝓛u)(x) − f(x)` from the jet of `u` at `x`.
pub fn residual(problem: &Problem, u_jet: &Jet2, x: &[f64]) -> Result<f64> {
    check_on_sphere(x)?;
    let mut acc = 0.0;
    for (der, c) in problem.operator.coefficients(x) {
        acc += c * der.read_jet(u_jet, x)?;
    }
    Ok(acc - problem.f.value(x))
}

/// `(1/n) Σ |(𝓛u)(X_i) − f(X_i)|²` for a jet-evaluable field.
pub fn empirical_risk<F: ScalarField + ?Sized>(
    problem: &Problem,
    u: &F,
    samples: &SampleSet,
) -> Result<f64> {
    let mut acc = 0.0;
    for x in samples.iter() {
        let r = residual(problem, &u.jet(x), x)?;
        acc += r * r;
    }
    Ok(acc / samples.len() as f64)
}

/// Per-point problem data on a fixed sample set, precomputed once.
#[derive(Clone, Debug)]
pub struct PinnData {
    samples: SampleSet,
    f: Vec<f64>,
    u_star: Option<Vec<f64>>,
    coefficients: Vec<Vec<(Derivative, f64)>>,
}

impl PinnData {
    pub fn new(problem: &Problem, samples: SampleSet) -> Result<Self> {
        if samples.dim() != problem.d {
            return Err(Error::invalid(
                "samples",
                "dimension does not match the problem",
            ));
        }
        for x in samples.iter() {
            check_on_sphere(x)?;
        }
        let f: Vec<f64> = samples.iter().map(|x| problem.f.value(x)).collect();
        let u_star = problem
            .u_star
            .as_ref()
            .map(|u| samples.iter().map(|x| u.value(x)).collect::<Vec<_>>());
        let coefficients = samples
            .iter()
            .map(|x| problem.operator.coefficients(x))
            .collect();
        if !f.iter().all(|v| v.is_finite()) {
            return Err(Error::non_finite("right-hand side"));
        }
        Ok(Self {
            samples,
            f,
            u_star,
            coefficients,
        })
    }

    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn u_star(&self) -> Option<&[f64]> {
        self.u_star.as_deref()
    }
}

/// Residuals and values of a model on every point of `data`.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub residuals: Vec<f64>,
    pub values: Vec<f64>,
}

/// Points per forward chunk when evaluating whole sample sets.
pub const EVAL_CHUNK: usize = 256;

pub fn evaluate_model(
    problem: &Problem,
    model: &Model,
    params: &[f64],
    data: &PinnData,
) -> Result<Evaluation> {
    let n = data.len();
    let d = problem.d;
    let layout = problem.layout();
    let mut residuals = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let flat = data.samples.as_flat();
    for start in (0..n).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(n);
        let trace = model.forward(params, &flat[start * d..end * d], layout)?;
        let out = trace.output();
        for p in 0..end - start {
            let i = start + p;
            let mut acc = 0.0;
            for &(der, c) in &data.coefficients[i] {
                acc += c * der.read(&out, p);
            }
            residuals.push(acc - data.f[i]);
            values.push(out.value(p));
        }
    }
    Ok(Evaluation { residuals, values })
}

/// Mean squared residual over the points `indices` of `data` and its parameter gradient.
pub fn pinn_loss_gradient(
    problem: &Problem,
    model: &Model,
    params: &[f64],
    data: &PinnData,
    indices: &[usize],
) -> Result<(f64, Vec<f64>)> {
    if indices.is_empty() {
        return Err(Error::invalid("indices", "empty batch"));
    }
    let points = data.samples.gather(indices);
    let mut trace = model.record(params, &points, problem.layout())?;
    let inv = 1.0 / indices.len() as f64;
    param_gradient(&mut trace, |out, adj| {
        let mut loss = 0.0;
        for (p, &i) in indices.iter().enumerate() {
            let mut r = -data.f[i];
            for &(der, c) in &data.coefficients[i] {
                r += c * der.read(out, p);
            }
            loss += r * r;
            for &(der, c) in &data.coefficients[i] {
                der.seed(adj, p, 2.0 * inv * r * c);
            }
        }
        loss * inv
    })
}

/// The four relative losses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeLosses {
    pub train_pinn: f64,
    pub test_pinn: f64,
    pub train_mse: f64,
    pub test_mse: f64,
}

/// `Σ r² / Σ f²` and `Σ (u − u*)² / Σ u*²` for one data set.
pub fn relative_pair(eval: &Evaluation, data: &PinnData) -> Result<(f64, f64)> {
    let f2: f64 = data.f.iter().map(|v| v * v).sum();
    if f2 == 0.0 {
        return Err(Error::DivisionByZero("Σ f² vanishes".into()));
    }
    let pinn = eval.residuals.iter().map(|r| r * r).sum::<f64>() / f2;
    let u_star = data
        .u_star
        .as_ref()
        .ok_or_else(|| Error::invalid("problem", "relative MSE needs a known solution"))?;
    let u2: f64 = u_star.iter().map(|v| v * v).sum();
    if u2 == 0.0 {
        return Err(Error::DivisionByZero("Σ u*² vanishes".into()));
    }
    let mse = eval
        .values
        .iter()
        .zip(u_star)
        .map(|(u, s)| (u - s) * (u - s))
        .sum::<f64>()
        / u2;
    Ok((pinn, mse))
}

pub fn relative_losses(
    problem: &Problem,
    model: &Model,
    params: &[f64],
    train: &PinnData,
    test: &PinnData,
) -> Result<RelativeLosses> {
    let (train_pinn, train_mse) =
        relative_pair(&evaluate_model(problem, model, params, train)?, train)?;
    let (test_pinn, test_mse) =
        relative_pair(&evaluate_model(problem, model, params, test)?, test)?;
    Ok(RelativeLosses {
        train_pinn,
        test_pinn,
        train_mse,
        test_mse,
    })
}

/// Relative losses for an arbitrary jet-evaluable field.
pub fn relative_losses_field<F: ScalarField + ?Sized>(
    problem: &Problem,
    u: &F,
    train: &PinnData,
    test: &PinnData,
) -> Result<RelativeLosses> {
    let eval = |data: &PinnData| -> Result<Evaluation> {
        let mut residuals = Vec::with_capacity(data.len());
        let mut values = Vec::with_capacity(data.len());
        for x in data.samples.iter() {
            let j = u.jet(x);
            residuals.push(residual(problem, &j, x)?);
            values.push(j.value);
        }
        Ok(Evaluation { residuals, values })
    };
    let (train_pinn, train_mse) = relative_pair(&eval(train)?, train)?;
    let (test_pinn, test_mse) = relative_pair(&eval(test)?, test)?;
    Ok(RelativeLosses {
        train_pinn,
        test_pinn,
        train_mse,
        test_mse,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    /// `𝓡(u) − 𝓡(u*)`.
    pub risk_gap: f64,
    /// `E[(Δ₀e)² + e² + |∇₀e|²]` with `e = u − u*`.
    pub h2_gap: f64,
    /// `risk_gap / h2_gap`, absent when both vanish.
    pub ratio: Option<f64>,
    /// `min{1, V², 2V}`, the lower constant of the sandwich.
    pub lower_constant: f64,
}

/// Monte-Carlo check of the strong-convexity sandwich for a Schrödinger problem.
pub fn strong_convexity_check<F: ScalarField + ?Sized>(
    problem: &Problem,
    u: &F,
    samples: &SampleSet,
) -> Result<ConvexityReport> {
    let v = match problem.operator {
        OperatorSpec::Schrodinger { potential } => potential,
        _ => return Err(Error::invalid("operator", "needs a Schrödinger operator")),
    };
    let u_star = problem
        .u_star
        .as_ref()
        .ok_or_else(|| Error::invalid("problem", "needs a known solution"))?;
    let (mut risk_u, mut risk_star, mut h2) = (0.0, 0.0, 0.0);
    for x in samples.iter() {
        let ju = u.jet(x);
        let js = u_star.jet(x);
        let ru = residual(problem, &ju, x)?;
        let rs = residual(problem, &js, x)?;
        risk_u += ru * ru;
        risk_star += rs * rs;
        let e = &ju - &js;
        let lb = laplace_beltrami(&e, x)?;
        let radial: f64 = x.iter().zip(&e.grad).map(|(a, b)| a * b).sum();
        let tangential = e.grad.iter().map(|g| g * g).sum::<f64>() - radial * radial;
        h2 += lb * lb + e.value * e.value + tangential;
    }
    let n = samples.len() as f64;
    let risk_gap = (risk_u - risk_star) / n;
    let h2_gap = h2 / n;
    Ok(ConvexityReport {
        risk_gap,
        h2_gap,
        ratio: (h2_gap > 0.0).then(|| risk_gap / h2_gap),
        lower_constant: 1f64.min(v * v).min(2.0 * v),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::jet_seed;

    #[test]
    fn laplace_beltrami_examples() {
        let x = [0.48, 0.6, 0.64];
        let c = Jet2::constant(3, 2.0);
        assert_eq!(laplace_beltrami(&c, &x).unwrap(), 0.0);
        let s = jet_seed(&x);
        let lb = laplace_beltrami(&s[0], &x).unwrap();
        assert!((lb + 2.0 * x[0]).abs() < 1e-15);
        let u = &(&s[0] * &s[1]) * &s[2];
        let lb = laplace_beltrami(&u, &x).unwrap();
        assert!((lb + 12.0 * u.value).abs() < 1e-14);
        assert!(matches!(
            laplace_beltrami(&u, &[1.0, 1.0, 0.0]),
            Err(Error::OffSphere { .. })
        ));
    }

    #[test]
    fn radial_field_is_harmonic_on_sphere() {
        let x = [0.0, 0.6, 0.8];
        let s = jet_seed(&x);
        let r2 = &(&(&s[0] * &s[0]) + &(&s[1] * &s[1])) + &(&s[2] * &s[2]);
        assert!(laplace_beltrami(&r2, &x).unwrap().abs() < 1e-15);
    }
}
