use holderlab::fields::{standard_normals, FieldSample, NoiseKind};
use holderlab::regularity::{
    beta_max, chaining_bound, make_plan, moment_increment_scan, space_pairs, tail_moment_split,
    time_pairs, verify_smoothing, InitialData, RegularityError, ScanOptions, SmoothingSetup,
};
use proptest::prelude::*;

#[test]
fn plan_examples() {
    let bm = make_plan(8.0, 0.75, 1, NoiseKind::SingleBm, 0.6, 0.5).unwrap();
    assert_eq!(bm.beta_max, 0.625);
    assert!((bm.theta - 2.6).abs() < 1e-12);
    assert!((bm.q - 12.0).abs() < 1e-12);
    assert!((bm.r - 6.0).abs() < 1e-12);
    let w = make_plan(10.0, 1.0, 1, NoiseKind::SpacetimeWhite, 0.3, 1.0).unwrap();
    assert!((w.beta_max - 0.4).abs() < 1e-15);
    let b = make_plan(10.0, 1.0, 1, NoiseKind::SingleBm, 0.4, 1.0).unwrap();
    assert!((b.beta_star - 0.2).abs() < 1e-15);
}

#[test]
fn plan_violations_are_named() {
    let msg = |r: Result<_, RegularityError>| r.unwrap_err().to_string();
    let e = msg(make_plan(
        10.0,
        1.0,
        1,
        NoiseKind::SpacetimeWhite,
        0.45,
        1.0,
    ));
    assert!(e.contains("p(2α−2β−1) ≤ 2"), "{e}");
    let e = msg(make_plan(3.0, 0.5, 1, NoiseKind::SpacetimeWhite, 0.1, 0.1));
    assert!(e.contains("1/2 < α ≤ 1"), "{e}");
    let e = msg(make_plan(8.0, 0.75, 2, NoiseKind::SpacetimeWhite, 0.1, 0.1));
    assert!(e.contains("d = 1"), "{e}");
    let e = msg(make_plan(8.0, 0.75, 1, NoiseKind::SingleBm, 0.7, 0.5));
    assert!(e.contains("(α−β)p − d ≥ 0"), "{e}");
    let e = msg(make_plan(8.0, 0.75, 1, NoiseKind::SingleBm, 0.1, 0.5));
    assert!(e.contains("0 < δ < βp/2"), "{e}");
    let e = msg(make_plan(8.0, 0.75, 1, NoiseKind::SingleBm, -0.1, 0.5));
    assert!(e.contains("β > 0"), "{e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn beta_max_grows_with_p(alpha in 0.51f64..1.0, p in 1.0f64..100.0, dp in 0.0f64..50.0, d in 1usize..3) {
        for kind in [NoiseKind::SingleBm, NoiseKind::SpacetimeWhite] {
            prop_assert!(beta_max(p + dp, alpha, d, kind) >= beta_max(p, alpha, d, kind));
        }
    }

    #[test]
    fn admissible_plans_are_consistent(alpha in 0.55f64..1.0, p in 4.0f64..64.0, frac in 0.05f64..0.95, gap in 0.05f64..0.95) {
        let kind = NoiseKind::SpacetimeWhite;
        let beta = frac * beta_max(p, alpha, 1, kind);
        prop_assume!(beta > 0.0);
        let delta = gap * beta * p / 2.0;
        if let Ok(plan) = make_plan(p, alpha, 1, kind, beta, delta) {
            prop_assert!(plan.beta_star < plan.beta);
            prop_assert!(plan.beta_star > 0.0);
            prop_assert!(plan.theta > 1.0);
            prop_assert!((plan.r - plan.q / 2.0).abs() < 1e-12);
            prop_assert!(plan.beta < plan.beta_max);
        }
    }
}

fn scan_plan(p: f64) -> holderlab::regularity::ExponentPlan {
    make_plan(p, 1.0, 1, NoiseKind::SingleBm, 0.2, 0.1).unwrap()
}

#[test]
fn scan_of_linear_profile_has_slope_p() {
    for p in [2.0, 3.5, 6.0] {
        let f = FieldSample::from_fn((0.0, 0.0, 1), (0.0, 1.0, 129), |_, x| x).unwrap();
        let ensemble = vec![f.clone(); 50];
        let probes = space_pairs(&f, 0, &[1, 2, 4, 8, 16, 32], 1);
        let scan =
            moment_increment_scan(&ensemble, &scan_plan(p), &probes, &ScanOptions::default())
                .unwrap();
        let fit = scan.space.unwrap();
        assert!((fit.slope - p).abs() < 1e-9, "p = {p}: {}", fit.slope);
        assert!((fit.raw_exponent - 1.0).abs() < 1e-9);
        assert!(fit.r_squared > 1.0 - 1e-12);
    }
}

#[test]
fn scan_needs_enough_replicates() {
    let f = FieldSample::from_fn((0.0, 0.0, 1), (0.0, 1.0, 9), |_, x| x).unwrap();
    let probes = space_pairs(&f, 0, &[1, 2], 1);
    let r = moment_increment_scan(
        &vec![f; 10],
        &scan_plan(2.0),
        &probes,
        &ScanOptions::default(),
    );
    assert!(r.is_err());
}

/// Fractional Brownian paths at `k / n`, `k = 0..=n`, by Cholesky factorization
/// of the covariance `(s^{2H} + t^{2H} - |t - s|^{2H}) / 2`.
fn fbm_paths(h: f64, n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let t: Vec<f64> = (1..=n).map(|k| k as f64 / n as f64).collect();
    let cov =
        |a: f64, b: f64| 0.5 * (a.powf(2.0 * h) + b.powf(2.0 * h) - (a - b).abs().powf(2.0 * h));
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (cov(t[i], t[i]) - s).sqrt();
            } else {
                l[i][j] = (cov(t[i], t[j]) - s) / l[j][j];
            }
        }
    }
    (0..count as u64)
        .map(|r| {
            let z = standard_normals(seed, r, n);
            let mut path = vec![0.0];
            path.extend((0..n).map(|i| (0..=i).map(|k| l[i][k] * z[k]).sum::<f64>()));
            path
        })
        .collect()
}

#[test]
fn scan_recovers_fractional_time_regularity() {
    let n = 64;
    for h in [0.3, 0.5, 0.7] {
        let p = 2.0;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
        let ensemble: Vec<FieldSample> = fbm_paths(h, n, 500, 7)
            .into_iter()
            .map(|v| FieldSample::new(times.clone(), vec![0.0], v).unwrap())
            .collect();
        let probes = time_pairs(&ensemble[0], 0, &[1, 2, 4, 8, 16], 1, 1);
        let scan =
            moment_increment_scan(&ensemble, &scan_plan(p), &probes, &ScanOptions::default())
                .unwrap();
        let fit = scan.time.unwrap();
        // δ = |t - s|^{1/2}, so the slope in δ is 2pH.
        assert!(
            (fit.slope / 2.0 - p * h).abs() < 0.05 * p,
            "H = {h}: slope {}",
            fit.slope
        );
        assert!(
            (fit.raw_exponent - h).abs() < 0.05,
            "H = {h}: {}",
            fit.raw_exponent
        );
    }
}

#[test]
fn chaining_examples() {
    let flat = chaining_bound(&[2.0; 17], 0.5, 0).unwrap();
    assert_eq!((flat.lhs, flat.rhs), (0.0, 0.0));
    assert!(flat.pass);
    for m in 0..=3 {
        let line: Vec<f64> = (0..=256).map(|j| j as f64 / 256.0).collect();
        let r = chaining_bound(&line, 1.0, m).unwrap();
        assert_eq!(r.big_m, 8);
        assert!((r.lhs - 1.0).abs() < 1e-12);
        assert!((r.rhs - 2.0 * (8 - m + 1) as f64).abs() < 1e-9, "{}", r.rhs);
        assert!(r.pass);
    }
    assert!(chaining_bound(&[0.0; 10], 0.5, 0).is_err());
    assert!(chaining_bound(&[0.0; 9], 1.5, 0).is_err());
    assert!(chaining_bound(&[0.0; 9], 0.5, 4).is_err());
}

#[test]
fn tail_split_examples() {
    let z = tail_moment_split(&[0.0; 5], 1.0, 3.0).unwrap();
    assert_eq!((z.moment, z.layer_cake, z.bound), (0.0, 0.0, 1.0));
    let r = tail_moment_split(&[1.0, -3.0], 2.0, 2.0).unwrap();
    assert_eq!(r.moment, 5.0);
    assert!((r.bound - 6.5).abs() < 1e-12);
    assert!(r.bound_holds);
    assert!(tail_moment_split(&[], 1.0, 2.0).is_err());
    assert!(tail_moment_split(&[1.0], 0.0, 2.0).is_err());
    assert!(tail_moment_split(&[f64::NAN], 1.0, 2.0).is_err());
}

#[test]
fn tail_split_on_normals() {
    let xs = standard_normals(5, 0, 10_000);
    for p in [1.0, 2.0, 4.0, 7.5] {
        for m in [0.1, 1.0, 2.5, 10.0] {
            let r = tail_moment_split(&xs, m, p).unwrap();
            assert!(
                r.identity_rel_err < 1e-10,
                "p = {p}: {}",
                r.identity_rel_err
            );
            assert!(r.bound_holds);
        }
    }
    let r = tail_moment_split(&xs, 1.0, 2.0).unwrap();
    assert!((r.moment - 1.0).abs() < 0.05, "{}", r.moment);
}

fn smoothing_setup() -> SmoothingSetup {
    SmoothingSetup::resolved(0.5, 1.0, 16_384, 6)
}

#[test]
fn smoothing_of_rough_data() {
    let plan = make_plan(4.0, 0.5, 1, NoiseKind::SingleBm, 0.2, 0.1).unwrap();
    let setup = smoothing_setup();
    let one = verify_smoothing(&plan, &InitialData::RoughPower { amplitude: 1.0 }, &setup).unwrap();
    assert!((one.expected_slope + 0.45).abs() < 1e-12);
    assert!((one.slope + 0.45).abs() < 0.1, "{}", one.slope);
    assert!(!one.flagged);
    let two = verify_smoothing(&plan, &InitialData::RoughPower { amplitude: 2.0 }, &setup).unwrap();
    let shift = two.intercept - one.intercept;
    let ln2 = std::f64::consts::LN_2;
    assert!((shift - ln2).abs() < 0.1 * ln2, "{shift}");
}

#[test]
fn smoothing_flags_a_smooth_mode() {
    let plan = make_plan(4.0, 0.5, 1, NoiseKind::SingleBm, 0.2, 0.1).unwrap();
    let mut setup = smoothing_setup();
    setup.times = (0..6).map(|k| 0.05 * 2f64.powi(k)).collect();
    let r = verify_smoothing(
        &plan,
        &InitialData::FourierMode {
            k: 3,
            amplitude: 1.0,
        },
        &setup,
    )
    .unwrap();
    assert!(r.flagged, "slope {}", r.slope);
}

#[test]
fn smoothing_rejects_bad_setups() {
    let plan = make_plan(4.0, 0.5, 1, NoiseKind::SingleBm, 0.2, 0.1).unwrap();
    let mut setup = smoothing_setup();
    setup.times = vec![0.1, 0.2];
    assert!(verify_smoothing(&plan, &InitialData::RoughPower { amplitude: 1.0 }, &setup).is_err());
    let flat = make_plan(8.0, 1.0, 2, NoiseKind::SingleBm, 0.2, 0.1).unwrap();
    let setup = smoothing_setup();
    assert!(verify_smoothing(&flat, &InitialData::RoughPower { amplitude: 1.0 }, &setup).is_err());
}
