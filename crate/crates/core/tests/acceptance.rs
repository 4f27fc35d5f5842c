//! One test per acceptance criterion. Each prints a single PASS/FAIL line
//! straight to stdout (bypassing capture) before asserting.
//!
//! The training criteria (8 to 10) honour `PICNN_ACCEPTANCE_SCALE`: unset or
//! `desk` runs a reduced ladder that fits a single core, `full` runs the
//! published sizes and replicate counts. Tolerances never change with scale.

use std::io::Write;
use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

use nalgebra::DMatrix;
use picnn::constructive::{
    build_inner_product_network, constructive_approximator, conv_factorize, cubature_rule,
    exact_rule, householder_to_e1, interp_spline, power_decomposition, ConstructiveParams,
    CubatureRule, SmoothCutoff, SplineSpec, ZonalKernel,
};
use picnn::network::{forward_value, ArchSpec, Network, ParamSet};
use picnn::pinn::{laplace_beltrami, pinn_loss_gradient, PinnData};
use picnn::problems::problem_library;
use picnn::sphere::{angular_second_derivative, sample_uniform, JetFn};
use picnn::theory::{rate_exponent, RateInputs, Smoothness};
use picnn::trainer::{run_replicates, test_data, SizePlan, SlopeFit, TrainConfig};
use picnn::{Activation, Jet2, ScalarField};
use statrs::function::gamma::ln_gamma;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(id: u32, title: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {id:>2} {tag}  {title}: {detail}\n");
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn d5(mut f: impl FnMut(f64) -> f64, h: f64) -> f64 {
    (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h)
}

/// Slope of the least-squares line through `(ln x, ln y)`.
fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn triple_products(d: usize) -> JetFn<impl Fn(&[Jet2]) -> Jet2 + Send + Sync> {
    JetFn::new(d, move |x: &[Jet2]| {
        let mut s = Jet2::constant(d, 0.0);
        for i in 0..d - 2 {
            s = s + x[i].clone() * x[i + 1].clone() * x[i + 2].clone();
        }
        s
    })
}

#[test]
fn criterion_01_laplacian_eigen_oracle() {
    let _g = serial();
    let start = Instant::now();
    let u = JetFn::new(3, |x: &[Jet2]| x[0].clone() * x[1].clone() * x[2].clone());
    let mut e1 = 0.0f64;
    for x in sample_uniform(1000, 3, 101).unwrap().iter() {
        let j = u.jet(x);
        e1 = e1.max((laplace_beltrami(&j, x).unwrap() + 12.0 * j.value).abs());
    }
    let mut e2 = 0.0f64;
    for d in 3..=10 {
        let u = triple_products(d);
        for x in sample_uniform(1000, d, 200 + d as u64).unwrap().iter() {
            let j = u.jet(x);
            let lhs = -laplace_beltrami(&j, x).unwrap() + j.value;
            e2 = e2.max((lhs - (3 * d + 4) as f64 * j.value).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = e1 < 1e-8 && e2 < 1e-7 && secs < 10.0;
    report(
        1,
        "Laplacian eigen-oracle",
        pass,
        &format!("x1x2x3 err {e1:.2e} (<1e-8), triple products d=3..10 err {e2:.2e} (<1e-7), {secs:.2}s (<10s)"),
    );
    assert!(pass);
}

fn autodiff_nets() -> Vec<ParamSet> {
    use Activation::*;
    let gelu = vec![Gelu, Gelu, Gelu, GeluPow(3), Gelu];
    let mixed = vec![Softplus, Gelu, Logistic, GeluPow(2), Softplus];
    [
        (3, 6, &gelu),
        (3, 4, &mixed),
        (4, 5, &gelu),
        (6, 3, &mixed),
        (5, 8, &gelu),
    ]
    .iter()
    .enumerate()
    .map(|(i, (d, c, acts))| {
        let arch = ArchSpec {
            channels: *c,
            activations: (*acts).clone(),
            ..ArchSpec::default_for_dim(*d)
        };
        ParamSet::init_uniform(&arch, 300 + i as u64).unwrap()
    })
    .collect()
}

#[test]
fn criterion_02_autodiff_correctness() {
    let _g = serial();
    let start = Instant::now();
    let h = 1e-3;
    let mut jet_err = 0.0f64;
    for (n, params) in autodiff_nets().iter().enumerate() {
        let d = params.arch().d;
        let net = Network::new(params.clone()).unwrap();
        for x in sample_uniform(20, d, 500 + n as u64).unwrap().iter() {
            let jet = net.forward_jet(x).unwrap();
            let at = |i: usize, t: f64| {
                let mut y = x.to_vec();
                y[i] += t;
                y
            };
            let gs = jet.grad.iter().fold(1e-12f64, |m, g| m.max(g.abs()));
            let hs = (0..d * d).fold(1e-12f64, |m, k| m.max(jet.hess_at(k / d, k % d).abs()));
            for i in 0..d {
                let fd = d5(|t| forward_value(params, &at(i, t)).unwrap(), h);
                jet_err = jet_err.max((fd - jet.grad[i]).abs() / jet.grad[i].abs().max(1e-3 * gs));
                for j in 0..d {
                    let fd = d5(|t| net.forward_jet(&at(j, t)).unwrap().grad[i], h);
                    let a = jet.hess_at(i, j);
                    jet_err = jet_err.max((fd - a).abs() / a.abs().max(1e-3 * hs));
                }
            }
        }
    }

    let params = autodiff_nets().swap_remove(0);
    let problem = problem_library("smooth2d", 3, 0).unwrap();
    let model = params.arch().model().unwrap();
    let data = PinnData::new(&problem, sample_uniform(8, 3, 77).unwrap()).unwrap();
    let idx: Vec<usize> = (0..8).collect();
    let (_, grad) = pinn_loss_gradient(&problem, &model, params.values(), &data, &idx).unwrap();
    let gs = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut p = params.values().to_vec();
    let mut loss_err = 0.0f64;
    for i in 0..p.len() {
        let base = p[i];
        let step = 1e-4 * base.abs().max(1e-2);
        let fd = d5(
            |t| {
                p[i] = base + t;
                let v = pinn_loss_gradient(&problem, &model, &p, &data, &idx)
                    .unwrap()
                    .0;
                p[i] = base;
                v
            },
            step,
        );
        loss_err = loss_err.max((fd - grad[i]).abs() / grad[i].abs().max(1e-4 * gs));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = jet_err < 1e-5 && loss_err < 1e-4 && secs < 60.0;
    report(
        2,
        "autodiff correctness",
        pass,
        &format!(
            "jet rel err {jet_err:.2e} (<1e-5), loss gradient rel err {loss_err:.2e} over {} params (<1e-4), {secs:.2}s (<60s)",
            p.len()
        ),
    );
    assert!(pass);
}

/// Closed form of `Δ₀p` on the sphere for
/// `p = x1²x2x3 + 2x2³ + x1x3 − x2/2 + x_d⁴`, summing
/// `Δp_n − n(n+d−2)p_n` over homogeneous parts.
fn lb_closed_form(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let e = |n: f64| n * (n + d - 2.0);
    let xd = x[x.len() - 1];
    let p4 = x[0] * x[0] * x[1] * x[2];
    (2.0 * x[1] * x[2] - e(4.0) * p4)
        + (12.0 * x[1] - e(3.0) * 2.0 * x[1].powi(3))
        + (-e(2.0) * x[0] * x[2])
        + (e(1.0) * 0.5 * x[1])
        + (12.0 * xd * xd - e(4.0) * xd.powi(4))
}

#[test]
fn criterion_03_angular_derivative_identity() {
    let _g = serial();
    let mut worst = 0.0f64;
    for d in [3usize, 4, 5] {
        let u = JetFn::new(d, move |x: &[Jet2]| {
            let a = x[0].clone() * x[0].clone() * x[1].clone() * x[2].clone();
            let b = x[1].clone().powi(3).scale(2.0);
            a + b
                + x[0].clone() * x[2].clone()
                + x[1].clone().scale(-0.5)
                + x[d - 1].clone().powi(4)
        });
        for x in sample_uniform(200, d, 600 + d as u64).unwrap().iter() {
            let want = lb_closed_form(x);
            let mut sum = 0.0;
            for i in 1..=d {
                for j in i + 1..=d {
                    sum += angular_second_derivative(&u, x, i, j).unwrap();
                }
            }
            let lb = laplace_beltrami(&u.jet(x), x).unwrap();
            worst = worst.max((sum - want).abs()).max((lb - want).abs());
        }
    }
    let pass = worst < 1e-8;
    report(
        3,
        "angular-derivative identity",
        pass,
        &format!("max |sum D_ij^2 p - closed form| {worst:.2e} (<1e-8), d=3,4,5, 200 points"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_spline_rates() {
    let _g = serial();
    let start = Instant::now();
    let (n0, d, k) = (4usize, 3usize, 3usize);
    let kernel = ZonalKernel::new(n0, d, SmoothCutoff, false).unwrap();
    let ns = [8usize, 16, 32, 64];
    let mut errs = vec![[0.0f64; 3]; ns.len()];
    for (e, &n) in errs.iter_mut().zip(&ns) {
        let spec = SplineSpec::new(k, n).unwrap();
        let q0 = spec
            .spline(interp_spline(&spec, |t| kernel.eval(t).unwrap()).unwrap())
            .unwrap();
        let q1 = q0.derivative().unwrap();
        let q2 = q1.derivative().unwrap();
        for g in 0..2001 {
            let t = -1.0 + 2.0 * g as f64 / 2000.0;
            let kd = kernel.derivatives(t, 2).unwrap();
            for (l, q) in [&q0, &q1, &q2].iter().enumerate() {
                e[l] = e[l].max((kd[l] - q.eval(t).unwrap()).abs());
            }
        }
    }
    let mut pass = true;
    let mut parts = Vec::new();
    for l in 0..3 {
        let pts: Vec<(f64, f64)> = ns
            .iter()
            .zip(&errs)
            .map(|(&n, e)| (n as f64, e[l]))
            .collect();
        let slope = loglog_slope(&pts);
        let bound = -((k - l + 1) as f64) + 0.3;
        pass &= slope <= bound;
        parts.push(format!("l={l} slope {slope:.3} (<={bound:.1})"));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 30.0;
    report(
        4,
        "spline rates",
        pass,
        &format!("{}, {secs:.2}s (<30s)", parts.join(", ")),
    );
    assert!(pass);
}

/// Degree-`4n0` rule rotated so its last node is `e1`, with nodes renormalized.
fn rotated_nodes(n0: usize, d: usize) -> (CubatureRule, Vec<f64>) {
    let base = cubature_rule(n0, d).unwrap();
    let q = householder_to_e1(base.node(base.len() - 1));
    let rule = base.rotated(&q);
    let mut nodes = rule.nodes.clone();
    for y in nodes.chunks_mut(d) {
        let n = dot(y, y).sqrt();
        y.iter_mut().for_each(|a| *a /= n);
    }
    (rule, nodes)
}

#[test]
fn criterion_05_constructive_fidelity() {
    let _g = serial();
    let start = Instant::now();
    let mut inner_err = 0.0f64;
    let mut counts_ok = true;
    for (m, d, s) in [
        (1usize, 2usize, 3usize),
        (3, 2, 3),
        (4, 3, 3),
        (5, 4, 4),
        (8, 4, 3),
        (8, 3, 5),
        (7, 2, 6),
    ] {
        let y = sample_uniform(m, d, 700 + m as u64).unwrap();
        let net = build_inner_product_network(y.as_flat(), d, s).unwrap();
        for x in sample_uniform(100, d, 701).unwrap().iter() {
            let f = net.eval(x);
            for (i, fi) in f.iter().enumerate() {
                inner_err = inner_err.max((fi - dot(y.point(i), x) - net.offset).abs());
            }
        }
        let l = net.stage.depth();
        let kernel_entries: usize = net.stage.kernels.iter().map(Vec::len).sum();
        counts_ok &= net.single_channel && kernel_entries == l * s;
        counts_ok &= net.free_params() == 3 * l * s - l;
    }

    let mut ridge_err = 0.0f64;
    for (d, n0) in [(2usize, 1usize), (2, 2), (2, 3), (3, 1), (3, 2)] {
        let u = JetFn::new(d, |x: &[Jet2]| {
            x[0].clone() * x[1].clone() + x[1].clone().powi(3) - x[0].clone().scale(0.3)
        });
        let samples = sample_uniform(200, d, 710 + n0 as u64).unwrap();
        let params = ConstructiveParams {
            n0,
            k: 3,
            s: 0,
            r: 1.0,
            d,
            kernel_size: 3,
        };
        let (net, _) = constructive_approximator(&u, params, &samples).unwrap();
        let (rule, nodes) = rotated_nodes(n0, d);
        let kernel = ZonalKernel::new(n0, d, SmoothCutoff, false).unwrap();
        let fine = exact_rule(2 * n0 + 30, d).unwrap();
        let lu: Vec<f64> = (0..rule.len())
            .map(|i| {
                let yi = rule.node(i);
                (0..fine.len())
                    .map(|j| {
                        fine.weights[j]
                            * u.value(fine.node(j))
                            * kernel.eval(dot(yi, fine.node(j))).unwrap()
                    })
                    .sum()
            })
            .collect();
        let spec = net.block.spec;
        let q = spec
            .spline(interp_spline(&spec, |t| kernel.eval(t).unwrap()).unwrap())
            .unwrap();
        for x in samples.iter() {
            let want: f64 = (0..rule.len())
                .map(|i| {
                    let y = &nodes[i * d..(i + 1) * d];
                    rule.weights[i] * lu[i] * q.eval(dot(x, y).clamp(-1.0, 1.0)).unwrap()
                })
                .sum();
            ridge_err = ridge_err.max((net.value(x) - want).abs());
        }
        let (k, nh) = (spec.k, spec.n_half);
        let twice_h = k * k * k + 4 * k * k + 4 * nh * k + k + 8 * nh;
        let h = net.block.w1.len();
        counts_ok &= 2 * h == twice_h && net.block.b1.len() == h && net.block.w2.len() == h;
        counts_ok &=
            2 * (net.free_params() - net.inner.free_params()) == 3 * twice_h + 2 * (net.m() + 2);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = inner_err < 1e-6 && ridge_err < 1e-6 && counts_ok && secs < 60.0;
    report(
        5,
        "constructive network fidelity",
        pass,
        &format!(
            "inner products err {inner_err:.2e} (<1e-6), ridge sum err {ridge_err:.2e} (<1e-6), counts {}, {secs:.2}s (<60s)",
            if counts_ok { "exact" } else { "MISMATCH" }
        ),
    );
    assert!(pass);
}

/// Mean of `x^α` under the normalized surface measure on `S^{d−1}`.
fn monomial_mean(alpha: &[u32]) -> f64 {
    if alpha.iter().any(|a| a % 2 == 1) {
        return 0.0;
    }
    let d = alpha.len() as f64;
    let total: f64 = alpha.iter().map(|&a| a as f64).sum();
    let ln: f64 = alpha
        .iter()
        .map(|&a| ln_gamma((a as f64 + 1.0) / 2.0))
        .sum::<f64>()
        + ln_gamma(d / 2.0)
        - ln_gamma((total + d) / 2.0)
        - d / 2.0 * std::f64::consts::PI.ln();
    ln.exp()
}

fn exponents(d: usize, deg: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|a: Vec<u32>| {
                let used: u32 = a.iter().sum();
                (0..=deg - used).map(move |e| {
                    let mut b = a.clone();
                    b.push(e);
                    b
                })
            })
            .collect();
    }
    out
}

#[test]
fn criterion_06_cubature_exactness() {
    let _g = serial();
    let mut mono = 0.0f64;
    for d in [2usize, 3] {
        for n0 in 1..=8 {
            let rule = cubature_rule(n0, d).unwrap();
            for alpha in exponents(d, 4 * n0 as u32) {
                let q = rule.integrate(|y| {
                    y.iter()
                        .zip(&alpha)
                        .map(|(v, &a)| v.powi(a as i32))
                        .product()
                });
                mono = mono.max((q - monomial_mean(&alpha)).abs());
            }
        }
    }
    let mut ident = 0.0f64;
    for d in [2usize, 3] {
        let pts = sample_uniform(25, d, 800 + d as u64).unwrap();
        let fields: [fn(&[Jet2]) -> Jet2; 2] = [
            |x| x[0].clone().scale(2.0) - x[1].clone(),
            |x| x[0].clone() * x[1].clone() * x[1].clone() + x[0].clone() * x[0].clone(),
        ];
        for f in fields {
            let u = JetFn::new(d, f);
            for n0 in 1..=4 {
                let l = ZonalKernel::new(n0, d, SmoothCutoff, false).unwrap();
                let l2 = ZonalKernel::new(n0, d, SmoothCutoff, true).unwrap();
                let coarse = cubature_rule(n0, d).unwrap();
                let fine = exact_rule(4 * n0 + 6, d).unwrap();
                let op = |k: &ZonalKernel, x: &[f64]| -> f64 {
                    (0..fine.len())
                        .map(|j| {
                            fine.weights[j]
                                * u.value(fine.node(j))
                                * k.eval(dot(x, fine.node(j))).unwrap()
                        })
                        .sum()
                };
                let lu: Vec<f64> = (0..coarse.len()).map(|i| op(&l, coarse.node(i))).collect();
                for x in pts.iter() {
                    let ridge: f64 = (0..coarse.len())
                        .map(|i| {
                            coarse.weights[i] * lu[i] * l.eval(dot(x, coarse.node(i))).unwrap()
                        })
                        .sum();
                    ident = ident.max((op(&l2, x) - ridge).abs());
                }
            }
        }
    }
    let pass = mono < 1e-9 && ident < 1e-9;
    report(
        6,
        "cubature exactness",
        pass,
        &format!("monomials deg<=4n0, n0<=8, S^1/S^2 err {mono:.2e} (<1e-9), discretization identity err {ident:.2e} (<1e-9)"),
    );
    assert!(pass);
}

/// Largest root modulus of `Σ c_i z^i` via companion-matrix eigenvalues.
fn max_root_modulus(c: &[f64]) -> f64 {
    let mut c = c.to_vec();
    while c.len() > 1 && c[c.len() - 1] == 0.0 {
        c.pop();
    }
    let n = c.len() - 1;
    if n == 0 {
        return 0.0;
    }
    let lead = c[n];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -c[i] / lead;
    }
    m.complex_eigenvalues()
        .iter()
        .fold(0.0f64, |a, z| a.max(z.norm()))
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

#[test]
fn criterion_07_power_decomposition_and_factorization() {
    let _g = serial();
    let mut power = 0.0f64;
    for k in 1..=6usize {
        for l in 0..k {
            let (zeta, xi) = power_decomposition(l, k).unwrap();
            for g in 0..=1000 {
                let x = 2.0 * g as f64 / 1000.0;
                let s: f64 = zeta
                    .iter()
                    .zip(&xi)
                    .map(|(z, c)| c * (x + z).powi(k as i32))
                    .sum();
                power = power.max((s - x.powi(l as i32)).abs());
            }
        }
    }
    let (mut round_trip, mut modulus) = (0.0f64, 0.0f64);
    for (m, d) in [
        (2usize, 2usize),
        (4, 3),
        (6, 4),
        (8, 5),
        (10, 4),
        (13, 3),
        (20, 2),
    ] {
        for seed in 0..4u64 {
            let y = sample_uniform(m, d, 900 + seed).unwrap();
            let q = householder_to_e1(y.point(m - 1));
            let mut w = vec![0.0; m * d];
            for j in 0..m {
                for i in 0..d {
                    w[j * d + d - 1 - i] = (0..d).map(|c| q[i * d + c] * y.point(j)[c]).sum();
                }
            }
            w[m * d - 1] = 1.0;
            for s in [3usize, 4, 5, 6] {
                let f = conv_factorize(&w, s).unwrap();
                let back = f.kernels.iter().fold(vec![1.0], |a, k| convolve(&a, k));
                for (i, v) in back.iter().enumerate() {
                    round_trip = round_trip.max((v - w.get(i).copied().unwrap_or(0.0)).abs());
                }
                for k in &f.kernels {
                    modulus = modulus.max(max_root_modulus(k));
                }
            }
        }
    }
    let pass = power < 1e-9 && round_trip < 1e-6 && modulus <= 2.0 + 1e-6;
    report(
        7,
        "power decomposition and factorization",
        pass,
        &format!(
            "power residual {power:.2e} (<1e-9), round trip {round_trip:.2e} (<1e-6), max root modulus {modulus:.4} (<=2+1e-6)"
        ),
    );
    assert!(pass);
}

struct Ladder {
    sizes: Vec<usize>,
    replicates: usize,
    test_size: usize,
}

fn full_scale() -> bool {
    std::env::var("PICNN_ACCEPTANCE_SCALE").is_ok_and(|v| v == "full")
}

fn scale_name() -> &'static str {
    if full_scale() {
        "full"
    } else {
        "desk"
    }
}

const TEST_SEED: u64 = 20_240_101;

fn slope_of(name: &str, d: usize, r: u32, ladder: &Ladder) -> (Option<SlopeFit>, bool) {
    let problem = problem_library(name, d, r).unwrap();
    let arch = ArchSpec::default_for_dim(problem.d);
    let config = TrainConfig {
        test_size: ladder.test_size,
        ..TrainConfig::default()
    };
    let plan: Vec<SizePlan> = ladder
        .sizes
        .iter()
        .map(|&n| SizePlan {
            train_size: n,
            seeds: (0..ladder.replicates as u64).collect(),
        })
        .collect();
    let test = test_data(&problem, config.test_size, TEST_SEED).unwrap();
    let table = run_replicates(&plan, &arch, &problem, &config, &test, TEST_SEED).unwrap();
    (table.fit, table.complete())
}

fn ladder_text(l: &Ladder) -> String {
    format!(
        "{} scale: sizes {:?}, {} replicates, test {}",
        scale_name(),
        l.sizes,
        l.replicates,
        l.test_size
    )
}

#[test]
fn criterion_08_desk_scale_convergence() {
    let _g = serial();
    let ladder = if full_scale() {
        Ladder {
            sizes: vec![128, 256, 512, 1024, 2048, 4096, 8192],
            replicates: 5,
            test_size: 5120,
        }
    } else {
        Ladder {
            sizes: vec![128, 256, 512, 1024, 2048],
            replicates: 2,
            test_size: 512,
        }
    };
    let start = Instant::now();
    let (fit, complete) = slope_of("smooth2d", 3, 0, &ladder);
    let secs = start.elapsed().as_secs_f64();
    let (slope, r2) = fit.map_or((f64::NAN, f64::NAN), |f| (f.slope, f.r2));
    let pass = complete && (0.4..=1.2).contains(&slope) && r2 >= 0.8;
    report(
        8,
        "smooth2d convergence",
        pass,
        &format!(
            "slope {slope:.3} (in [0.4, 1.2]), R^2 {r2:.3} (>=0.8), all sizes usable {complete}, {secs:.0}s; {}",
            ladder_text(&ladder)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_smoothness_monotonicity() {
    let _g = serial();
    let ladder = if full_scale() {
        Ladder {
            sizes: vec![128, 256, 512, 1024, 2048, 4096],
            replicates: 5,
            test_size: 5120,
        }
    } else {
        Ladder {
            sizes: vec![128, 256, 512, 1024],
            replicates: 2,
            test_size: 512,
        }
    };
    let start = Instant::now();
    let fits: Vec<(u32, f64, f64)> = [3u32, 5, 7]
        .iter()
        .map(|&r| {
            let (fit, _) = slope_of("smoothness_r", 3, r, &ladder);
            let f = fit.expect("at least two usable sizes");
            (r, f.slope, f.std_error.unwrap_or(f64::INFINITY))
        })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let pooled = |a: &(u32, f64, f64), b: &(u32, f64, f64)| (a.2 * a.2 + b.2 * b.2).sqrt();
    let mut pass = true;
    for i in 0..fits.len() {
        for j in i + 1..fits.len() {
            let (a, b) = (&fits[i], &fits[j]);
            pass &= b.1 >= a.1 || (a.1 - b.1) <= pooled(a, b);
        }
    }
    let (lo, hi) = (&fits[0], &fits[2]);
    pass &= hi.1 - lo.1 > pooled(lo, hi);
    let slopes: Vec<String> = fits
        .iter()
        .map(|(r, s, e)| format!("r={r}: {s:.3}+-{e:.3}"))
        .collect();
    report(
        9,
        "smoothness monotonicity",
        pass,
        &format!(
            "{} (weakly increasing, strict r=3 to r=7), {secs:.0}s; {}",
            slopes.join(", "),
            ladder_text(&ladder)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_dimension_robustness() {
    let _g = serial();
    let ladder = if full_scale() {
        Ladder {
            sizes: vec![128, 256, 512, 1024, 2048, 4096, 8192],
            replicates: 5,
            test_size: 5120,
        }
    } else {
        Ladder {
            sizes: vec![128, 256, 512],
            replicates: 2,
            test_size: 512,
        }
    };
    let start = Instant::now();
    let slopes: Vec<(usize, f64)> = [3usize, 6, 10]
        .iter()
        .map(|&d| {
            (
                d,
                slope_of("dim_smooth", d, 0, &ladder)
                    .0
                    .map_or(f64::NAN, |f| f.slope),
            )
        })
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let hi = slopes.iter().fold(f64::NEG_INFINITY, |m, s| m.max(s.1));
    let lo = slopes.iter().fold(f64::INFINITY, |m, s| m.min(s.1));
    let range = hi - lo;
    let pass = range < 0.35;
    let parts: Vec<String> = slopes
        .iter()
        .map(|(d, s)| format!("d={d}: {s:.3}"))
        .collect();
    report(
        10,
        "dimension robustness",
        pass,
        &format!(
            "{}, range {range:.3} (<0.35), {secs:.0}s; {}",
            parts.join(", "),
            ladder_text(&ladder)
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_11_rate_formulas() {
    let _g = serial();
    let at =
        |r: Smoothness, s: u32, d: u32, k: u32| rate_exponent(&RateInputs { r, s, d, k }).unwrap();
    let inf = Smoothness::Infinite;
    let fin = Smoothness::Finite;
    let cases = [
        (at(inf, 2, 3, 3), 0.8),
        (at(inf, 2, 5, 2), 2.0 / 3.0),
        (at(inf, 0, 3, 4), 10.0 / 11.0),
        (at(fin(4.0), 2, 4, 10), 0.4),
        (at(fin(7.0), 1, 8, 3), 6.0 / 13.0),
        (at(fin(4.0), 2, 3, 3), 1.0 / 3.0),
        (at(fin(5.0), 1, 2, 2), 16.0 / 29.0),
    ];
    let exact = cases[0].0 == 0.8;
    let worst = cases
        .iter()
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs() / b));
    let pass = exact && worst <= 4.0 * f64::EPSILON;
    report(
        11,
        "rate formulas",
        pass,
        &format!(
            "a(inf, s=2, k=3) = {} (exactly 0.8), worst relative spot-value error {worst:.1e}",
            cases[0].0
        ),
    );
    assert!(pass);
}
