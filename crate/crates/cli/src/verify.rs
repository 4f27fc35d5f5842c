//! Verification suites: each check compares a computed quantity with an
//! independent oracle and reports the largest deviation.

use picnn::constructive::{
    build_inner_product_network, build_multichannel_inner_product, constructive_approximator,
    conv_factorize, cubature_rule, exact_rule, householder_to_e1, interp_spline, polymul,
    power_decomposition, sphere_monomial_mean, spline_block_width, verify_cubature_identity,
    ConstructiveParams, SmoothCutoff, SplineSpec, ZonalKernel,
};
use picnn::network::{forward_value, ArchSpec, Network, ParamSet};
use picnn::pinn::{laplace_beltrami, pinn_loss_gradient, residual, PinnData};
use picnn::problems::problem_library;
use picnn::sphere::{angular_second_derivative, sample_uniform, JetFn};
use picnn::trainer::fit_loglog_slope;
use picnn::{Jet2, Result, ScalarField};
use serde::Serialize;

pub const SUITES: [&str; 7] = [
    "autodiff",
    "laplacian",
    "spline",
    "cubature",
    "factorize",
    "construct",
    "problems",
];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub suite: String,
    pub check: String,
    pub passed: bool,
    pub max_error: f64,
    pub tolerance: f64,
}

impl Check {
    fn below(suite: &str, check: impl Into<String>, max_error: f64, tolerance: f64) -> Self {
        Self {
            suite: suite.into(),
            check: check.into(),
            passed: max_error.is_finite() && max_error < tolerance,
            max_error,
            tolerance,
        }
    }
}

pub fn run_suite(name: &str) -> Result<Vec<Check>> {
    match name {
        "autodiff" => autodiff(),
        "laplacian" => laplacian(),
        "spline" => spline(),
        "cubature" => cubature(),
        "factorize" => factorize(),
        "construct" => construct(),
        "problems" => problems(),
        _ => Err(picnn::Error::invalid(
            "suite",
            format!("unknown suite `{name}`; expected one of {SUITES:?}"),
        )),
    }
}

/// Five-point central difference of `f` at `0`.
pub fn central5(mut f: impl FnMut(f64) -> f64, h: f64) -> f64 {
    (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h)
}

fn rel(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

fn small_arch(d: usize, channels: usize) -> ArchSpec {
    ArchSpec {
        channels,
        ..ArchSpec::default_for_dim(d)
    }
}

/// Largest relative error of the network jet against differences of values
/// (gradient) and of jet gradients (Hessian).
pub fn network_jet_error(params: &ParamSet, points: &[Vec<f64>]) -> Result<f64> {
    let net = Network::new(params.clone())?;
    let h = 1e-3;
    let mut worst = 0.0f64;
    for x in points {
        let jet = net.forward_jet(x)?;
        let d = x.len();
        let shifted = |i: usize, t: f64| {
            let mut y = x.clone();
            y[i] += t;
            y
        };
        let gmax = jet.grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let hmax = (0..d)
            .flat_map(|i| (0..d).map(move |j| (i, j)))
            .fold(0.0f64, |m, (i, j)| m.max(jet.hess_at(i, j).abs()));
        for i in 0..d {
            let g = central5(
                |t| forward_value(params, &shifted(i, t)).unwrap_or(f64::NAN),
                h,
            );
            worst = worst.max(rel(jet.grad[i], g, 1e-3 * gmax.max(1e-12)));
            for j in 0..d {
                let hij = central5(
                    |t| {
                        net.forward_jet(&shifted(j, t))
                            .map(|j2: Jet2| j2.grad[i])
                            .unwrap_or(f64::NAN)
                    },
                    h,
                );
                worst = worst.max(rel(jet.hess_at(i, j), hij, 1e-3 * hmax.max(1e-12)));
            }
        }
    }
    Ok(worst)
}

/// Largest relative error of the Schrödinger-loss parameter gradient on a
/// batch against central differences, over the parameter indices `which`.
pub fn loss_gradient_error(
    params: &ParamSet,
    problem_name: &str,
    batch: usize,
    which: &[usize],
    seed: u64,
) -> Result<f64> {
    let arch = params.arch().clone();
    let problem = problem_library(problem_name, arch.d, 3)?;
    let model = arch.model()?;
    let data = PinnData::new(&problem, sample_uniform(batch, arch.d, seed)?)?;
    let idx: Vec<usize> = (0..batch).collect();
    let (_, grad) = pinn_loss_gradient(&problem, &model, params.values(), &data, &idx)?;
    let gmax = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    let mut p = params.values().to_vec();
    for &i in which {
        let base = p[i];
        let h = 1e-4 * base.abs().max(1e-2);
        let fd = central5(
            |t| {
                p[i] = base + t;
                let v = pinn_loss_gradient(&problem, &model, &p, &data, &idx)
                    .map(|r| r.0)
                    .unwrap_or(f64::NAN);
                p[i] = base;
                v
            },
            h,
        );
        worst = worst.max(rel(grad[i], fd, 1e-4 * gmax));
    }
    Ok(worst)
}

fn autodiff() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (net, d) in [3usize, 3, 4, 5, 6].iter().enumerate() {
        let params = ParamSet::init_uniform(&small_arch(*d, 8), 100 + net as u64)?;
        let pts: Vec<Vec<f64>> = sample_uniform(20, *d, 7 + net as u64)?
            .iter()
            .map(|x| x.to_vec())
            .collect();
        let e = network_jet_error(&params, &pts)?;
        out.push(Check::below(
            "autodiff",
            format!("jet_vs_differences_net{net}_d{d}"),
            e,
            1e-5,
        ));
    }
    let params = ParamSet::init_uniform(&small_arch(3, 4), 5)?;
    let all: Vec<usize> = (0..params.len()).collect();
    let e = loss_gradient_error(&params, "smooth2d", 8, &all, 11)?;
    out.push(Check::below(
        "autodiff",
        "schrodinger_loss_parameter_gradient",
        e,
        1e-4,
    ));
    Ok(out)
}

fn laplacian() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let u = JetFn::new(3, |x| x[0].clone() * x[1].clone() * x[2].clone());
    let pts = sample_uniform(1000, 3, 2024)?;
    let mut worst = 0.0f64;
    for x in pts.iter() {
        let j = u.jet(x);
        worst = worst.max((laplace_beltrami(&j, x)? + 12.0 * j.value).abs());
    }
    out.push(Check::below(
        "laplacian",
        "x1x2x3_eigenvalue_minus_12",
        worst,
        1e-8,
    ));
    for d in 3..=10usize {
        let u = JetFn::new(d, move |x| {
            let mut s = x[0].clone() * x[1].clone() * x[2].clone();
            for i in 1..d - 2 {
                s = s + x[i].clone() * x[i + 1].clone() * x[i + 2].clone();
            }
            s
        });
        let mut worst = 0.0f64;
        for x in sample_uniform(1000, d, 2024 + d as u64)?.iter() {
            let j = u.jet(x);
            let lhs = -laplace_beltrami(&j, x)? + j.value;
            worst = worst.max((lhs - (3 * d + 4) as f64 * j.value).abs());
        }
        out.push(Check::below(
            "laplacian",
            format!("triple_products_d{d}"),
            worst,
            1e-7,
        ));
    }
    for d in [3usize, 4] {
        let u = JetFn::new(d, |x| {
            let a = x[0].clone() * x[0].clone() * x[1].clone() * x[2].clone();
            let b = x[1].clone() * x[1].clone() * x[1].clone();
            a + b.scale(2.0) + x[0].clone() * x[2].clone() + x[1].clone().scale(-0.5)
        });
        let mut worst = 0.0f64;
        for x in sample_uniform(200, d, 31 + d as u64)?.iter() {
            let lb = laplace_beltrami(&u.jet(x), x)?;
            let mut sum = 0.0;
            for i in 1..=d {
                for j in i + 1..=d {
                    sum += angular_second_derivative(&u, x, i, j)?;
                }
            }
            worst = worst.max((lb - sum).abs());
        }
        out.push(Check::below(
            "laplacian",
            format!("angular_square_sum_d{d}"),
            worst,
            1e-8,
        ));
    }
    Ok(out)
}

/// Sup-norm errors of `D^l(l − Q_N l)` on a uniform grid, for `l = 0, 1, 2`.
pub fn spline_errors(n0: usize, d: usize, k: usize, n: usize, grid: usize) -> Result<[f64; 3]> {
    let kernel = ZonalKernel::new(n0, d, SmoothCutoff, false)?;
    let spec = SplineSpec::new(k, n)?;
    let coeffs = interp_spline(&spec, |t| kernel.eval(t).unwrap_or(f64::NAN))?;
    let q0 = spec.spline(coeffs)?;
    let q1 = q0.derivative()?;
    let q2 = q1.derivative()?;
    let mut err = [0.0f64; 3];
    for g in 0..grid {
        let t = -1.0 + 2.0 * g as f64 / (grid - 1) as f64;
        let kd = kernel.derivatives(t, 2)?;
        for (l, q) in [&q0, &q1, &q2].iter().enumerate() {
            err[l] = err[l].max((kd[l] - q.eval(t)?).abs());
        }
    }
    Ok(err)
}

fn spline() -> Result<Vec<Check>> {
    let (n0, d, k) = (4, 3, 3);
    let ns = [8usize, 16, 32, 64];
    let errs: Vec<[f64; 3]> = ns
        .iter()
        .map(|&n| spline_errors(n0, d, k, n, 2001))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for l in 0..3 {
        let pts: Vec<(f64, f64)> = ns
            .iter()
            .zip(&errs)
            .map(|(&n, e)| (n as f64, e[l]))
            .collect();
        let fit = fit_loglog_slope(&pts)?;
        let need = (k - l + 1) as f64 - 0.3;
        // The regression slope of log error on log N is −fit.slope.
        out.push(Check {
            suite: "spline".into(),
            check: format!("interpolation_rate_order{l}"),
            passed: fit.slope >= need,
            max_error: -fit.slope,
            tolerance: -need,
        });
    }
    Ok(out)
}

/// Largest deviation of the degree-`4·n0` rule from exact monomial means.
pub fn cubature_monomial_error(n0: usize, d: usize) -> Result<f64> {
    let rule = cubature_rule(n0, d)?;
    let deg = 4 * n0 as u32;
    let mut worst = 0.0f64;
    let mut alpha = vec![0u32; d];
    loop {
        if alpha.iter().sum::<u32>() <= deg {
            let q = rule.integrate(|y| {
                y.iter()
                    .zip(&alpha)
                    .map(|(v, &a)| v.powi(a as i32))
                    .product()
            });
            worst = worst.max((q - sphere_monomial_mean(&alpha)).abs());
        }
        let mut i = 0;
        loop {
            if i == d {
                return Ok(worst);
            }
            alpha[i] += 1;
            if alpha[i] <= deg {
                break;
            }
            alpha[i] = 0;
            i += 1;
        }
    }
}

fn cubature() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for d in [2usize, 3] {
        let worst = (1..=8)
            .map(|n0| cubature_monomial_error(n0, d))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0f64, f64::max);
        out.push(Check::below(
            "cubature",
            format!("monomials_s{}", d - 1),
            worst,
            1e-9,
        ));
    }
    type Poly = fn(&[Jet2]) -> Jet2;
    let polys: [(&str, Poly); 2] = [
        ("linear", |x| x[0].clone().scale(2.0) + x[1].clone()),
        ("cubic", |x| {
            x[0].clone() * x[1].clone() * x[1].clone() + x[0].clone() * x[0].clone()
        }),
    ];
    for d in [2usize, 3] {
        let pts: Vec<Vec<f64>> = sample_uniform(20, d, 9)?
            .iter()
            .map(|x| x.to_vec())
            .collect();
        for (name, f) in polys {
            let u = JetFn::new(d, f);
            let worst = (1..=4)
                .map(|n0| verify_cubature_identity(&u, n0, d, &pts))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .fold(0.0f64, f64::max);
            out.push(Check::below(
                "cubature",
                format!("discretization_identity_{name}_d{d}"),
                worst,
                1e-9,
            ));
        }
    }
    Ok(out)
}

fn factorize() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut worst = 0.0f64;
    for k in 1..=6usize {
        for l in 0..k {
            let (zeta, xi) = power_decomposition(l, k)?;
            for g in 0..=400 {
                let x = 2.0 * g as f64 / 400.0;
                let s: f64 = zeta
                    .iter()
                    .zip(&xi)
                    .map(|(z, c)| c * (x + z).powi(k as i32))
                    .sum();
                worst = worst.max((s - x.powi(l as i32)).abs());
            }
        }
    }
    out.push(Check::below(
        "factorize",
        "power_decomposition_residual",
        worst,
        1e-9,
    ));
    let (mut rt, mut modulus) = (0.0f64, 0.0f64);
    for (m, d) in [(2usize, 2usize), (5, 3), (8, 4), (10, 4), (13, 3), (20, 2)] {
        for seed in 0..3u64 {
            let y = sample_uniform(m, d, 40 + seed)?;
            let q = householder_to_e1(y.point(m - 1));
            let mut w = vec![0.0; m * d];
            for j in 0..m {
                let yj = y.point(j);
                for i in 0..d {
                    w[j * d + d - 1 - i] = (0..d).map(|c| q[i * d + c] * yj[c]).sum();
                }
            }
            w[m * d - 1] = 1.0;
            for s in [3usize, 4, 5] {
                let f = conv_factorize(&w, s)?;
                let back = f.kernels.iter().fold(vec![1.0], |acc, k| polymul(&acc, k));
                for (i, v) in back.iter().enumerate() {
                    let want = w.get(i).copied().unwrap_or(0.0);
                    rt = rt.max((v - want).abs());
                }
                modulus = modulus.max(f.max_root_modulus());
            }
        }
    }
    out.push(Check::below(
        "factorize",
        "convolution_round_trip",
        rt,
        1e-6,
    ));
    out.push(Check {
        suite: "factorize".into(),
        check: "root_modulus_bound".into(),
        passed: modulus <= 2.0 + 1e-6,
        max_error: modulus,
        tolerance: 2.0 + 1e-6,
    });
    Ok(out)
}

fn construct() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let mut worst = 0.0f64;
    for (m, d, s) in [
        (2usize, 2usize, 3usize),
        (4, 3, 3),
        (6, 4, 4),
        (8, 4, 3),
        (8, 3, 5),
    ] {
        let y = sample_uniform(m, d, 60 + m as u64)?;
        let xs = sample_uniform(50, d, 61)?;
        for net in [
            build_inner_product_network(y.as_flat(), d, s)?,
            build_multichannel_inner_product(y.as_flat(), d, s.max(d))?,
        ] {
            for x in xs.iter() {
                let f = net.eval(x);
                for (i, fi) in f.iter().enumerate() {
                    let ip: f64 = y.point(i).iter().zip(x).map(|(a, b)| a * b).sum();
                    worst = worst.max((fi - ip - net.offset).abs());
                }
            }
        }
    }
    out.push(Check::below("construct", "inner_products", worst, 1e-6));
    let (mut ridge, mut counts) = (0.0f64, true);
    for (d, n0) in [(2usize, 1usize), (2, 2), (3, 2)] {
        let u = JetFn::new(d, |x| x[0].clone() * x[1].clone() + x[1].clone());
        let samples = sample_uniform(100, d, 77)?;
        let p = ConstructiveParams {
            n0,
            k: 3,
            s: 0,
            r: 1.0,
            d,
            kernel_size: 3,
        };
        let (net, _) = constructive_approximator(&u, p, &samples)?;
        let rule = cubature_rule(n0, d)?;
        let q = householder_to_e1(rule.node(rule.len() - 1));
        let nodes = rule.rotated(&q).nodes;
        for x in samples.iter() {
            ridge = ridge.max((net.value(x) - net.ridge_sum(&nodes, x)?).abs());
        }
        if net.inner.single_channel {
            let (l, s) = (net.inner.stage.depth(), net.inner.stage.kernel_size);
            counts &= net.inner.free_params() == 3 * l * s - l;
        }
        let (k, nh) = (net.block.spec.k, net.block.spec.n_half);
        let fc = net.free_params() - net.inner.free_params();
        counts &=
            2 * fc == 3 * (k * k * k + 4 * k * k + 4 * nh * k + k + 8 * nh) + 2 * (net.m() + 2);
        counts &= net.hidden_width() == spline_block_width(k, nh);
    }
    out.push(Check::below(
        "construct",
        "network_equals_ridge_sum",
        ridge,
        1e-6,
    ));
    out.push(Check {
        suite: "construct".into(),
        check: "parameter_counts".into(),
        passed: counts,
        max_error: if counts { 0.0 } else { 1.0 },
        tolerance: 0.5,
    });
    let fine = exact_rule(8, 3)?;
    out.push(Check::below(
        "construct",
        "fine_rule_normalized",
        (fine.weights.iter().sum::<f64>() - 1.0).abs(),
        1e-12,
    ));
    Ok(out)
}

fn problems() -> Result<Vec<Check>> {
    let mut cases: Vec<(String, usize, u32)> = vec![("smooth2d".into(), 3, 0)];
    cases.extend((3..=8).map(|r| ("smoothness_r".to_string(), 3, r)));
    for d in 3..=10 {
        cases.push(("dim_smooth".into(), d, 0));
        cases.push(("dim_structured".into(), d, 0));
    }
    let mut out = Vec::new();
    for (name, d, r) in cases {
        let p = problem_library(&name, d, r)?;
        let u = p.u_star.clone().expect("library problems carry u*");
        let mut worst = 0.0f64;
        for x in sample_uniform(500, p.d, 5)?.iter() {
            let f = p.f.value(x).abs().max(1.0);
            worst = worst.max(residual(&p, &u.jet(x), x)?.abs() / f);
        }
        out.push(Check::below(
            "problems",
            format!("{}_residual_of_solution", p.label),
            worst,
            1e-9,
        ));
    }
    Ok(out)
}
