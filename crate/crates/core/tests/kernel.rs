use std::f64::consts::PI;

use holderlab::kernel::{Kernel, KernelError, KernelSpec};
use holderlab::quadrature::GaussLegendre;
use proptest::prelude::*;

fn kernel(alpha: f64, dim: usize) -> Kernel {
    Kernel::new(KernelSpec::new(alpha, dim)).unwrap()
}

fn gamma_fn(x: f64) -> f64 {
    // Lanczos, g = 7.
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma_fn(1.0 - x));
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let s: f64 = C[0] + (1..9).map(|i| C[i] / (x + i as f64)).sum::<f64>();
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * s
}

#[test]
fn gaussian_and_cauchy_values_at_origin() {
    let g = kernel(1.0, 1).eval(1.0, &[0.0]).unwrap();
    assert!((g - (4.0 * PI).powf(-0.5)).abs() < 1e-15);
    let c = kernel(0.5, 1);
    assert!((c.eval(1.0, &[0.0]).unwrap() - 1.0 / PI).abs() < 1e-15);
    assert!((c.eval_fourier(1.0, 0.0).unwrap() - 1.0 / PI).abs() < 1e-10);
}

/// Mass of the α = 0.75 kernel from an independent split: the window
/// `∫_{-X}^{X} K = (2/π) ∫₀^∞ sin(ξX)/ξ e^{-ξ^{3/2}} dξ` by brute-force
/// Gauss panels, plus the tail from the stable-density series.
#[test]
fn mass_matches_window_plus_series_tail() {
    let (alpha, x_cut) = (0.75f64, 100.0f64);
    let a = 2.0 * alpha;
    let rule = GaussLegendre::new(20);
    let f = |xi: f64| {
        let s = if xi == 0.0 {
            x_cut
        } else {
            (xi * x_cut).sin() / xi
        };
        s * (-xi.powf(a)).exp()
    };
    let mut window = 0.0;
    let width = 0.01;
    for i in 0..3000 {
        window += rule.integrate(i as f64 * width, (i + 1) as f64 * width, f);
    }
    window *= 2.0 / PI;
    let tail: f64 = (1..=4)
        .map(|n| {
            let n = n as f64;
            let c = (-1f64).powf(n + 1.0) * gamma_fn(n * a + 1.0) / gamma_fn(n + 1.0)
                * (n * PI * a / 2.0).sin()
                / PI;
            2.0 * c * x_cut.powf(-n * a) / (n * a)
        })
        .sum();
    let oracle = window + tail;
    assert!((oracle - 1.0).abs() < 1e-7, "oracle itself {oracle}");
    let mass = kernel(alpha, 1).mass(1.0).unwrap();
    assert!((mass - 1.0).abs() < 1e-6);
    assert!((mass - oracle).abs() < 1e-6);
}

#[test]
fn mass_examples() {
    assert!((kernel(1.0, 1).mass(0.5).unwrap() - 1.0).abs() < 1e-9);
    assert!((kernel(0.5, 1).mass(2.0).unwrap() - 1.0).abs() < 1e-6);
    assert!((kernel(0.75, 1).mass(1.0).unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn derivative_examples() {
    let c = kernel(0.5, 1);
    let d1 = c.deriv(1, 1.0, 1.0).unwrap();
    let exact = -(2.0 / PI) / 4.0;
    assert!((d1 - exact).abs() < 1e-9, "{d1} vs {exact}");
    let g = kernel(1.0, 1).deriv(2, 1.0, 0.0).unwrap();
    assert!((g + (4.0 * PI).powf(-0.5) / 2.0).abs() < 1e-9);
}

#[test]
fn sharp_bound_examples() {
    let k = kernel(0.5, 1);
    let rep = k.sharp_bound_ratio(&[1.0], &[10.0]).unwrap();
    let row = rep.rows[0];
    // |x|^{d+2α} = 100, so the envelope is 1e-2 and K = 1/(101π).
    assert!((row.bound - 1e-2).abs() < 1e-15);
    assert!((row.value - 1.0 / (101.0 * PI)).abs() < 1e-12);
    assert!((row.ratio - 100.0 / (101.0 * PI)).abs() < 1e-10);
    let near = k.sharp_bound_ratio(&[1.0], &[1e-9]).unwrap().rows[0];
    assert!((near.ratio - 1.0 / PI).abs() < 1e-9);
    let err = kernel(1.0, 1)
        .sharp_bound_ratio(&[1.0], &[1.0])
        .unwrap_err();
    assert!(err.to_string().contains("alpha < 1"));
}

#[test]
fn derivative_envelope_is_bounded() {
    let ts: Vec<f64> = (0..5).map(|i| 10f64.powf(-2.0 + i as f64 * 0.75)).collect();
    let xs: Vec<f64> = (0..9)
        .map(|i| 10f64.powf(-2.0 + i as f64 * 0.375))
        .collect();
    for alpha in [0.3, 0.5, 0.75] {
        let rep = kernel(alpha, 1).derivative_bound_ratio(&ts, &xs).unwrap();
        assert!(
            rep.min_ratio > 0.0 && rep.max_ratio.is_finite(),
            "alpha {alpha}"
        );
        assert!(
            rep.spread() < 100.0,
            "alpha {alpha}: spread {}",
            rep.spread()
        );
    }
}

#[test]
fn lq_norm_closed_forms() {
    let g = kernel(1.0, 1);
    for t in [0.1, 1.0, 7.0] {
        let exact = (8.0 * PI * t).powf(-0.25);
        assert!((g.lq_norm(t, 2.0).unwrap() - exact).abs() < 1e-10 * exact);
    }
    let c = kernel(0.5, 1);
    for t in [0.1, 1.0, 7.0] {
        // ∫ (t/π)² (t² + x²)^{-2} dx = 1/(2πt)
        let exact = (2.0 * PI * t).powf(-0.5);
        assert!((c.lq_norm(t, 2.0).unwrap() - exact).abs() < 1e-8 * exact);
    }
    let ts = [0.1, 0.3, 1.0, 3.0, 10.0];
    assert!((g.lq_norm_scaling(2.0, &ts).unwrap().slope + 0.25).abs() < 1e-8);
    assert!((c.lq_norm_scaling(2.0, &ts).unwrap().slope + 0.5).abs() < 1e-6);
    let near_one = kernel(0.75, 1).lq_norm_scaling(1.0001, &ts).unwrap().slope;
    assert!(near_one.abs() < 1e-3);
    assert!(matches!(
        g.lq_norm_scaling(2.0, &[1.0, 2.0]),
        Err(KernelError::Precondition(_))
    ));
}

#[test]
fn integral_conditions_plain_kernel() {
    let k = kernel(0.5, 1);
    let pairs: Vec<(f64, f64)> = (0..4).map(|i| (0.5, 0.5 + 1e-4 * 4f64.powi(i))).collect();
    let rep = k.integral_conditions(0.0, 0.2, &pairs).unwrap();
    assert!((rep.gamma_expected - 1.0).abs() < 1e-15);
    assert!(
        rep.gamma_hat >= rep.gamma_expected - 0.1,
        "{}",
        rep.gamma_hat
    );
    assert!((rep.gamma_hat - 1.0).abs() < 0.1, "{}", rep.gamma_hat);
    for (m, (s, _)) in rep.mass_lhs.iter().zip(&pairs) {
        assert!(*m <= s * (1.0 + 1e-9), "{m} > {s}");
    }
    assert!(matches!(
        k.integral_conditions(0.5, 0.2, &pairs),
        Err(KernelError::Precondition(_))
    ));
}

/// `∫₀ˢ (∫ |G(τ+h,z) - G(τ,z)| (1+|z|^β) dz)² dτ` evaluated straight from
/// `frac_grad` on coarse geometric panels.
fn increment_oracle(k: &Kernel, eps: f64, beta: f64, s: f64, h: f64) -> f64 {
    let rule = GaussLegendre::new(8);
    let inner = |tau: f64| {
        let scale = tau.powf(1.0 / (2.0 * k.alpha()));
        let f = |z: f64| {
            let d = k.frac_grad(eps, tau + h, z).unwrap() - k.frac_grad(eps, tau, z).unwrap();
            d.abs() * (1.0 + z.powf(beta))
        };
        let mut acc = rule.integrate(0.0, 0.25 * scale, f);
        let mut lo = 0.25 * scale;
        while lo < 1e5 {
            acc += rule.integrate(lo, 2.0 * lo, f);
            lo *= 2.0;
        }
        2.0 * acc
    };
    let g = |tau: f64| inner(tau).powi(2);
    let mut total = 0.0;
    let mut lo = h * 2f64.powi(-14);
    total += rule.integrate(0.0, lo, g);
    while lo < s {
        let hi = (2.0 * lo).min(s);
        total += rule.integrate(lo, hi, g);
        lo = hi;
    }
    total
}

#[test]
fn integral_conditions_fractional_gradient() {
    let (alpha, eps, beta) = (0.8, 0.4, 0.2);
    let k = kernel(alpha, 1);
    let pairs: Vec<(f64, f64)> = (0..4).map(|i| (0.5, 0.5 + 1e-4 * 4f64.powi(i))).collect();
    let rep = k.integral_conditions(eps, beta, &pairs).unwrap();
    assert!((rep.gamma_expected - 0.5).abs() < 1e-15);
    assert!(
        (rep.gamma_hat - 0.5).abs() < 0.1,
        "gamma_hat {}",
        rep.gamma_hat
    );
    let picks = [0usize, 3];
    let oracle: Vec<f64> = picks
        .iter()
        .map(|&i| increment_oracle(&k, eps, beta, pairs[i].0, pairs[i].1 - pairs[i].0))
        .collect();
    for (o, &i) in oracle.iter().zip(&picks) {
        let rel = (rep.increment_lhs[i] - o).abs() / o;
        assert!(
            rel < 0.02,
            "pair {i}: {} vs oracle {o}",
            rep.increment_lhs[i]
        );
    }
    let oracle_slope = (oracle[1] / oracle[0]).ln() / 64f64.ln();
    assert!(
        (oracle_slope - 0.5).abs() < 0.1,
        "oracle slope {oracle_slope}"
    );
}

#[test]
fn two_dimensional_kernel_is_radial() {
    let k = kernel(0.75, 2);
    let a = k.eval(0.7, &[0.3, 0.4]).unwrap();
    let b = k.eval(0.7, &[0.5, 0.0]).unwrap();
    let c = k.eval_radial(0.7, 0.5).unwrap();
    assert_eq!(a, c);
    assert_eq!(b, c);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn positive_and_symmetric(alpha in 0.2f64..1.0, t in 0.01f64..10.0, x in -20.0f64..20.0) {
        let k = kernel(alpha, 1);
        let v = k.eval(t, &[x]).unwrap();
        prop_assert!(v >= -1e-9, "K({t}, {x}) = {v}");
        prop_assert_eq!(v, k.eval(t, &[-x]).unwrap());
    }

    #[test]
    fn self_similar(alpha in 0.2f64..=1.0, t in 0.05f64..20.0, x in 0.0f64..8.0) {
        let k = kernel(alpha, 1);
        let a = 2.0 * alpha;
        let direct = k.eval(t, &[x]).unwrap();
        let rescaled = t.powf(-1.0 / a) * k.eval(1.0, &[t.powf(-1.0 / a) * x]).unwrap();
        prop_assert!((direct - rescaled).abs() <= 1e-8 * direct.abs().max(rescaled.abs()));
    }

    #[test]
    fn odd_derivative_vanishes_at_origin(alpha in 0.2f64..=1.0, t in 0.1f64..5.0) {
        prop_assert!(kernel(alpha, 1).deriv(1, t, 0.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn lq_slope_follows_scaling(alpha in 0.3f64..=1.0, q in 1.2f64..4.0) {
        let k = kernel(alpha, 1);
        let fit = k.lq_norm_scaling(q, &[0.2, 0.5, 1.0, 2.0, 5.0]).unwrap();
        let expected = -(q - 1.0) / (2.0 * alpha * q);
        prop_assert!((fit.slope - expected).abs() < 1e-6, "{} vs {}", fit.slope, expected);
        prop_assert!((k.lq_norm_slope(q) - expected).abs() < 1e-15);
    }

    #[test]
    fn non_positive_time_is_rejected(t in -5.0f64..=0.0) {
        prop_assert!(matches!(kernel(0.6, 1).eval(t, &[0.0]), Err(KernelError::NonPositiveTime(_))));
    }
}
