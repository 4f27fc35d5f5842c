use picnn::constructive::{
    bspline, conv_factorize, householder_to_e1, polymul, power_decomposition, SplineSpec,
};
use picnn::io::{fingerprint, format_sig17};
use picnn::pinn::laplace_beltrami;
use picnn::sphere::{sample_uniform, JetFn};
use picnn::theory::{rate_exponent, RateInputs, Smoothness};
use picnn::trainer::TrainConfig;
use picnn::{Jet2, ScalarField};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn samples_are_unit_and_reproducible(n in 1usize..50, d in 2usize..11, seed in any::<u64>()) {
        let a = sample_uniform(n, d, seed).unwrap();
        let b = sample_uniform(n, d, seed).unwrap();
        prop_assert_eq!(a.as_flat(), b.as_flat());
        for x in a.iter() {
            let r: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_fields_are_first_eigenfunctions(
        c in proptest::collection::vec(-2.0f64..2.0, 5),
        seed in any::<u64>(),
    ) {
        let d = c.len();
        let cc = c.clone();
        let u = JetFn::new(d, move |x: &[Jet2]| {
            let mut s = Jet2::constant(d, 0.0);
            for (xi, ci) in x.iter().zip(&cc) {
                s = s + xi.scale(*ci);
            }
            s
        });
        for x in sample_uniform(10, d, seed).unwrap().iter() {
            let j = u.jet(x);
            let lb = laplace_beltrami(&j, x).unwrap();
            prop_assert!((lb + (d as f64 - 1.0) * j.value).abs() < 1e-12);
        }
    }

    #[test]
    fn bsplines_partition_unity(k in 1usize..6, n in 1usize..12, t in -1.0f64..1.0) {
        let spec = SplineSpec::new(k, n).unwrap();
        let s: f64 = (1..=spec.basis_count()).map(|i| bspline(&spec, i, t).unwrap()).sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_decomposition_holds(k in 1usize..7, l_frac in 0.0f64..1.0, x in 0.0f64..2.0) {
        let l = ((k as f64) * l_frac) as usize % k;
        let (z, xi) = power_decomposition(l, k).unwrap();
        let s: f64 = z.iter().zip(&xi).map(|(z, c)| c * (x + z).powi(k as i32)).sum();
        prop_assert!((s - x.powi(l as i32)).abs() < 1e-9);
    }

    #[test]
    fn factorization_round_trips(
        mut w in proptest::collection::vec(-1.0f64..1.0, 2..40),
        s in 3usize..7,
    ) {
        *w.last_mut().unwrap() = 1.0;
        let f = conv_factorize(&w, s).unwrap();
        prop_assert!(f.kernels.iter().all(|k| k.len() == s));
        let back = f.kernels.iter().fold(vec![1.0], |a, k| polymul(&a, k));
        for (i, v) in back.iter().enumerate() {
            prop_assert!((v - w.get(i).copied().unwrap_or(0.0)).abs() < 1e-6);
        }
        prop_assert!(f.max_root_modulus() <= 2.0 + 1e-6);
    }

    #[test]
    fn householder_sends_node_to_e1(seed in any::<u64>(), d in 2usize..8) {
        let y = sample_uniform(1, d, seed).unwrap();
        let q = householder_to_e1(y.point(0));
        for r in 0..d {
            let v: f64 = (0..d).map(|c| q[r * d + c] * y.point(0)[c]).sum();
            let want = if r == 0 { 1.0 } else { 0.0 };
            prop_assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rates_lie_in_unit_interval(s in 0u32..4, extra in 0u32..5, d in 2u32..12, r in 0.0f64..20.0) {
        let k = s + extra;
        let inf = RateInputs { r: Smoothness::Infinite, s, d, k };
        let a = rate_exponent(&inf).unwrap();
        prop_assert!(a > 0.0 && a < 1.0);
        let more = rate_exponent(&RateInputs { k: k + 1, ..inf }).unwrap();
        prop_assert!(more > a);
        let rf = s as f64 + 1.0 + r;
        let k = RateInputs::required_k(rf, s, d).unwrap_or(k);
        let a = rate_exponent(&RateInputs { r: Smoothness::Finite(rf), s, d, k }).unwrap();
        prop_assert!(a > 0.0 && a < 1.0);
    }

    #[test]
    fn sig17_round_trips(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(format_sig17(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn fingerprint_survives_json_round_trip(lr in 1e-5f64..1.0, epochs in 1usize..500, seed in any::<u64>()) {
        let c = TrainConfig { learning_rate: lr, epochs, seed, ..TrainConfig::default() };
        let back: TrainConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        prop_assert_eq!(fingerprint(&c).unwrap(), fingerprint(&back).unwrap());
    }
}

fn small_arch(d: usize, channels: usize) -> picnn::network::ArchSpec {
    picnn::network::ArchSpec {
        channels,
        ..picnn::network::ArchSpec::default_for_dim(d)
    }
}

fn d5(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (f(-2.0 * h) - 8.0 * f(-h) + 8.0 * f(h) - f(2.0 * h)) / (12.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn polynomial_jets_match_differences(
        c in proptest::collection::vec(-1.0f64..1.0, 15),
        d in 2usize..6,
        seed in any::<u64>(),
    ) {
        let cc = c.clone();
        let u = JetFn::new(d, move |x: &[Jet2]| {
            let lin = x.iter().enumerate().fold(Jet2::constant(d, cc[0]), |s, (i, xi)| s + xi.scale(cc[1 + i]));
            let quad = x[0].clone() * x[d - 1].clone().scale(cc[7]);
            let a = x.iter().enumerate().fold(Jet2::constant(d, 0.0), |s, (i, xi)| s + xi.scale(cc[8 + i % 7]));
            lin + quad + a.powi(3) + a.powi(4).scale(cc[14])
        });
        let h = 1e-3;
        for x in sample_uniform(4, d, seed).unwrap().iter() {
            let j = u.jet(x);
            let at = |i: usize, t: f64| {
                let mut y = x.to_vec();
                y[i] += t;
                y
            };
            let scale = 1.0 + j.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            for i in 0..d {
                let g = d5(|t| u.value(&at(i, t)), h);
                prop_assert!((g - j.grad[i]).abs() / scale < 1e-6);
                for k in 0..d {
                    let hk = d5(|t| u.jet(&at(k, t)).grad[i], h);
                    prop_assert!((hk - j.hess_at(i, k)).abs() / scale < 1e-6);
                    prop_assert_eq!(j.hess_at(i, k), j.hess_at(k, i));
                }
            }
        }
    }

    #[test]
    fn network_invariants(d in 2usize..7, channels in 1usize..6, seed in any::<u64>(), alpha in 0.01f64..10.0) {
        use picnn::network::{forward_jet, forward_value, BlockKind, ParamSet};
        let arch = small_arch(d, channels);
        let w = arch.conv_widths();
        for l in 1..w.len() {
            prop_assert_eq!(w[l], w[l - 1] + arch.kernel_size - 1);
        }
        let p = ParamSet::init_uniform(&arch, seed).unwrap();
        let mut scaled = p.clone();
        let layout = arch.param_layout();
        for b in layout.blocks.iter().filter(|b| matches!(b.kind, BlockKind::OutputWeight | BlockKind::OutputBias)) {
            scaled.values_mut()[b.range()].iter_mut().for_each(|v| *v *= alpha);
        }
        for x in sample_uniform(5, d, seed ^ 1).unwrap().iter() {
            let v = forward_value(&p, x).unwrap();
            prop_assert!((forward_jet(&p, x).unwrap().value - v).abs() < 1e-14);
            let s = forward_value(&scaled, x).unwrap();
            prop_assert!((s - alpha * v).abs() <= 1e-14 * (1.0 + s.abs()));
        }
    }

    #[test]
    fn slope_ignores_scaling(
        losses in proptest::collection::vec(1e-6f64..1.0, 3..8),
        c in 1e-3f64..1e3,
        m in 0.1f64..100.0,
    ) {
        use picnn::trainer::fit_loglog_slope;
        let pts: Vec<(f64, f64)> = losses.iter().enumerate().map(|(i, &l)| ((128usize << i) as f64, l)).collect();
        let base = fit_loglog_slope(&pts).unwrap().slope;
        let a: Vec<(f64, f64)> = pts.iter().map(|&(n, l)| (n, c * l)).collect();
        let b: Vec<(f64, f64)> = pts.iter().map(|&(n, l)| (m * n, l)).collect();
        prop_assert!((fit_loglog_slope(&a).unwrap().slope - base).abs() < 1e-12 * (1.0 + base.abs()));
        prop_assert!((fit_loglog_slope(&b).unwrap().slope - base).abs() < 1e-12 * (1.0 + base.abs()));
    }

    #[test]
    fn harmonics_are_eigenfunctions(d in 3usize..9, seed in any::<u64>()) {
        type Field = fn(&[Jet2]) -> Jet2;
        let basis: [(f64, Field); 4] = [
            (1.0, |x| x[0].clone()),
            (2.0, |x| x[0].clone() * x[1].clone()),
            (2.0, |x| x[0].clone() * x[0].clone() - x[1].clone() * x[1].clone()),
            (3.0, |x| x[0].clone() * x[1].clone() * x[2].clone()),
        ];
        for (n, f) in basis {
            let u = JetFn::new(d, f);
            for x in sample_uniform(20, d, seed).unwrap().iter() {
                let j = u.jet(x);
                let want = -n * (n + d as f64 - 2.0) * j.value;
                prop_assert!((laplace_beltrami(&j, x).unwrap() - want).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn parameter_gradients_are_linear_and_deterministic() {
    use picnn::network::ParamSet;
    use picnn::tape::{param_gradient, JetLayout};
    let arch = small_arch(3, 4);
    let p = ParamSet::init_uniform(&arch, 3).unwrap();
    let model = arch.model().unwrap();
    let pts = sample_uniform(6, 3, 4).unwrap();
    let grad = |alpha: f64, beta: f64| {
        let mut trace = model
            .record(p.values(), pts.as_flat(), JetLayout::Full)
            .unwrap();
        param_gradient(&mut trace, |out, adj| {
            let mut loss = 0.0;
            for q in 0..out.len() {
                let (v, g) = (out.value(q), out.grad(q, 1));
                loss += alpha * v * v + beta * g;
                adj.value(q, 2.0 * alpha * v);
                adj.grad(q, 1, beta);
            }
            loss
        })
        .unwrap()
        .1
    };
    let (a, b) = (grad(1.0, 0.0), grad(0.0, 1.0));
    let mix = grad(0.7, -1.3);
    for i in 0..a.len() {
        assert!((mix[i] - (0.7 * a[i] - 1.3 * b[i])).abs() < 1e-12 * (1.0 + mix[i].abs()));
    }
    assert_eq!(grad(0.7, -1.3), mix);
}

#[test]
fn residual_risk_is_zero_only_at_the_solution() {
    use picnn::pinn::empirical_risk;
    use picnn::problems::problem_library;
    use picnn::sphere::ZeroField;
    let p = problem_library("smooth2d", 3, 0).unwrap();
    let s = sample_uniform(50, 3, 8).unwrap();
    let u = p.u_star.clone().unwrap();
    assert!(empirical_risk(&p, u.as_ref(), &s).unwrap() < 1e-24);
    assert!(empirical_risk(&p, &ZeroField(3), &s).unwrap() > 0.0);
}

#[test]
fn best_epoch_has_the_smallest_train_loss() {
    use picnn::problems::problem_library;
    use picnn::trainer::{test_data, train};
    let p = problem_library("smooth2d", 3, 0).unwrap();
    let cfg = TrainConfig {
        epochs: 6,
        train_size: 32,
        test_size: 32,
        batch_fraction: 0.25,
        ..TrainConfig::default()
    };
    let test = test_data(&p, 32, 1).unwrap();
    let rec = train(&small_arch(3, 3), &p, &cfg, &test, 1).unwrap();
    let best = rec.best.unwrap().train_pinn;
    assert!(rec.history.iter().all(|h| best <= h.train_pinn));
    assert_eq!(rec.history[rec.best_epoch.unwrap()].train_pinn, best);
}

#[test]
fn sobolev_error_is_a_metric_on_polynomials() {
    use picnn::sphere::{mc_sobolev_error, NormExponent};
    let fields: [fn(&[Jet2]) -> Jet2; 3] = [
        |x| x[0].clone() * x[1].clone(),
        |x| x[2].clone().powi(3) - x[0].clone(),
        |x| x[0].clone() * x[1].clone() * x[2].clone() + x[1].clone().scale(0.5),
    ];
    let s = sample_uniform(300, 3, 21).unwrap();
    for order in 0..=2 {
        for p in [NormExponent::Two, NormExponent::Infinity] {
            let e = |a: usize, b: usize| {
                mc_sobolev_error(
                    &JetFn::new(3, fields[a]),
                    &JetFn::new(3, fields[b]),
                    order,
                    &s,
                    p,
                )
                .unwrap()
            };
            for a in 0..3 {
                for b in 0..3 {
                    assert!((e(a, b) - e(b, a)).abs() < 1e-9);
                    for c in 0..3 {
                        assert!(e(a, c) <= e(a, b) + e(b, c) + 1e-9);
                    }
                }
            }
        }
    }
}
