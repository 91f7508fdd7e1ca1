use holderlab::fields::FieldSample;
use holderlab::seminorms::{
    self, atype_constant, campanato_at, campanato_seminorm, cylinder, cylinder_measure,
    embedding_gamma, holder_seminorm, parabolic_dist, reevaluate_witness, CampanatoSampling,
    DomainSpec, HolderSampling, ParabolicPoint, Witness,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn unit_field(nt: usize, nx: usize, f: impl Fn(f64, f64) -> f64) -> FieldSample {
    FieldSample::from_fn((0.0, 1.0, nt), (0.0, 1.0, nx), f).unwrap()
}

/// Radii `d(D) 2^{-j}` down to two grid cells.
fn radii_to(diam: f64, floor: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = diam;
    while r >= floor {
        out.push(r);
        r *= 0.5;
    }
    out
}

#[test]
fn distance_examples() {
    let o = ParabolicPoint::d1(0.0, 0.0);
    assert_eq!(parabolic_dist(&o, &ParabolicPoint::d1(1.0, 0.0)), 1.0);
    assert_eq!(parabolic_dist(&o, &ParabolicPoint::d1(0.25, 0.3)), 0.5);
    assert_eq!(parabolic_dist(&o, &ParabolicPoint::d1(0.01, -0.3)), 0.3);
    let a = ParabolicPoint::new(0.0, vec![0.0, 0.0]);
    let b = ParabolicPoint::new(0.0, vec![3.0, 4.0]);
    assert_eq!(parabolic_dist(&a, &b), 5.0);
}

#[test]
fn distance_is_a_metric_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pt = |rng: &mut ChaCha8Rng| {
        ParabolicPoint::new(
            rng.random_range(-3.0..3.0),
            vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)],
        )
    };
    for _ in 0..10_000 {
        let (a, b, c) = (pt(&mut rng), pt(&mut rng), pt(&mut rng));
        let ab = parabolic_dist(&a, &b);
        assert_eq!(ab, parabolic_dist(&b, &a));
        assert!(ab <= parabolic_dist(&a, &c) + parabolic_dist(&c, &b) + 1e-12);
        assert_eq!(parabolic_dist(&a, &a), 0.0);
    }
}

#[test]
fn cylinder_membership_matches_its_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100_000 {
        let c = rng.random_range(0.05..2.0);
        let x = ParabolicPoint::d1(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let y = ParabolicPoint::d1(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let inside = (y.t - x.t).abs() < c * c && (y.x[0] - x.x[0]).abs() < c;
        assert_eq!(cylinder(&x, c).unwrap().contains(&y), inside);
    }
    assert_eq!(cylinder_measure(1.5, 1), 4.0 * 1.5f64.powi(3));
    assert!(cylinder(&ParabolicPoint::d1(0.0, 0.0), 0.0).is_err());
}

#[test]
fn disc_cylinder_measure_by_monte_carlo() {
    let c = 0.7;
    let q = cylinder(&ParabolicPoint::new(0.0, vec![0.0, 0.0]), c).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 200_000;
    let hits = (0..n)
        .filter(|_| {
            let y = ParabolicPoint::new(
                rng.random_range(-c * c..c * c),
                vec![rng.random_range(-c..c), rng.random_range(-c..c)],
            );
            q.contains(&y)
        })
        .count();
    let box_measure = 2.0 * c * c * 4.0 * c * c;
    let est = box_measure * hits as f64 / n as f64;
    assert!(
        (est / q.measure() - 1.0).abs() < 0.01,
        "{est} vs {}",
        q.measure()
    );
}

#[test]
fn campanato_of_constant_is_zero() {
    let f = unit_field(17, 33, |_, _| 4.5);
    let dom = DomainSpec::of_field(&f).unwrap();
    let s = CampanatoSampling::dyadic(&f, &dom, 1, 1);
    let r = campanato_seminorm(&f, &dom, 2.0, 1.0, &s).unwrap();
    assert_eq!(r.value, 0.0);
    assert!(r.evaluated > 0);
}

#[test]
fn campanato_of_linear_profile_is_stable_under_refinement() {
    // θ = 1: sup of the L² oscillation, attained on the whole interval,
    // where the variance of x on [0, 1] is 1/12.
    let exact = (1.0f64 / 12.0).sqrt();
    for n in [33, 65, 129] {
        let f = unit_field(n, n, |_, x| x);
        let dom = DomainSpec::of_field(&f).unwrap();
        let s = CampanatoSampling::dyadic(&f, &dom, 2, 2);
        let v = campanato_seminorm(&f, &dom, 2.0, 1.0, &s).unwrap().value;
        assert!((v / exact - 1.0).abs() < 0.05, "n = {n}: {v} vs {exact}");
    }
}

fn sqrt_abs_campanato(nx: usize, theta: f64) -> f64 {
    let f = FieldSample::from_fn((0.0, 1.0, 9), (-1.0, 1.0, nx), |_, x| x.abs().sqrt()).unwrap();
    let dom = DomainSpec::of_field(&f).unwrap();
    let dx = 2.0 / (nx - 1) as f64;
    let s = CampanatoSampling {
        center_stride_t: 4,
        center_stride_x: 1,
        radii: radii_to(dom.diameter(), 2.0 * dx),
    };
    campanato_seminorm(&f, &dom, 2.0, theta, &s).unwrap().value
}

#[test]
fn campanato_of_square_root_cusp() {
    // ρ^{3(1-θ)} ρ^{pγ} with γ = 1/2, p = 2: bounded at θ = 4/3,
    // grows like ρ^{-1/4} at θ = 3/2 and like ρ^{-1} at θ = 2.
    let n = [65, 129, 257];
    let at = |theta: f64| n.map(|nx| sqrt_abs_campanato(nx, theta));
    let flat = at(4.0 / 3.0);
    assert!(flat.iter().all(|v| v.is_finite() && *v > 0.0));
    assert!((flat[2] / flat[0] - 1.0).abs() < 0.1, "{flat:?}");
    let mild = at(1.5);
    for w in mild.windows(2) {
        let g = (w[1] / w[0]).log2();
        assert!((g - 0.25).abs() < 0.08, "{mild:?}");
    }
    let steep = at(2.0);
    assert!(steep[2] / steep[0] > 2.0, "{steep:?}");
}

#[test]
fn holder_examples() {
    let s = HolderSampling::default();
    let x = unit_field(33, 33, |_, x| x);
    let r = holder_seminorm(&x, 1.0, &s).unwrap();
    assert!((r.value - 1.0).abs() < 1e-12, "{}", r.value);
    if let Witness::Pair { a, b, .. } = r.witness {
        assert_eq!(a.0, b.0);
    } else {
        panic!("no pair witness");
    }
    let t = unit_field(33, 33, |t, _| t);
    let r = holder_seminorm(&t, 1.0, &s).unwrap();
    assert!((r.value - 1.0).abs() < 1e-12, "{}", r.value);
    let c = unit_field(9, 9, |_, _| -2.0);
    assert_eq!(holder_seminorm(&c, 0.5, &s).unwrap().value, 0.0);
    assert!(holder_seminorm(&c, 1.5, &s).is_err());
    assert!(holder_seminorm(&c, 0.0, &s).is_err());
}

#[test]
fn holder_agrees_with_brute_force_on_small_grid() {
    let f = unit_field(9, 17, |t, x| (3.0 * x).sin() + t.sqrt());
    let mut brute = 0.0f64;
    for i in 0..9 {
        for j in 0..17 {
            for k in 0..9 {
                for l in 0..17 {
                    let d = (f.xs[j] - f.xs[l])
                        .abs()
                        .max((f.times[i] - f.times[k]).abs().sqrt());
                    if d > 0.0 {
                        brute = brute.max((f.at(i, j) - f.at(k, l)).abs() / d.powf(0.5));
                    }
                }
            }
        }
    }
    let sampling = HolderSampling {
        random_pairs: 100_000,
        seed: 3,
    };
    let v = holder_seminorm(&f, 0.5, &sampling).unwrap().value;
    assert!(v <= brute * (1.0 + 1e-12));
    assert!(v >= 0.95 * brute, "{v} vs {brute}");
}

#[test]
fn atype_examples() {
    let dom = DomainSpec::new((0.0, 1.0), vec![0.0], vec![1.0]).unwrap();
    let deep = atype_constant(&dom, &[ParabolicPoint::d1(0.5, 0.5)], &[0.1]).unwrap();
    assert!((deep.constant - 1.0).abs() < 1e-12);
    let corner = atype_constant(&dom, &[ParabolicPoint::d1(0.0, 0.0)], &[0.1]).unwrap();
    assert!((corner.constant - 0.25).abs() < 1e-12);
    assert!(atype_constant(&dom, &[ParabolicPoint::d1(0.0, 0.0)], &[2.0]).is_err());
}

#[test]
fn atype_lower_bound_on_boxes() {
    // Boxes long enough in time that every cylinder up to d(D) keeps half its
    // time extent.
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for d in [1usize, 2] {
        for _ in 0..20 {
            let side = rng.random_range(0.2..2.0);
            let lower: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let upper: Vec<f64> = lower.iter().map(|a| a + side).collect();
            let diam = side * (d as f64).sqrt();
            let t1 = diam * diam * rng.random_range(1.0..3.0);
            let dom = DomainSpec::new((0.0, t1), lower.clone(), upper.clone()).unwrap();
            let mut centers = Vec::new();
            for _ in 0..30 {
                let x = lower
                    .iter()
                    .map(|a| a + side * rng.random_range(0.0..1.0))
                    .collect();
                centers.push(ParabolicPoint::new(t1 * rng.random_range(0.0..1.0), x));
            }
            centers.push(ParabolicPoint::new(0.0, lower.clone()));
            centers.push(ParabolicPoint::new(t1, upper.clone()));
            let radii: Vec<f64> = (0..12)
                .map(|k| diam * 0.5f64.powf(k as f64 / 2.0))
                .collect();
            let r = atype_constant(&dom, &centers, &radii).unwrap();
            let floor = 2f64.powi(-(d as i32 + 2));
            assert!(r.constant >= floor, "d = {d}: {} < {floor}", r.constant);
        }
    }
}

#[test]
fn embedding_gamma_range() {
    assert!((embedding_gamma(3.0, 1.3, 1).unwrap() - 0.3).abs() < 1e-12);
    assert!((embedding_gamma(3.0, 2.0, 1).unwrap() - 1.0).abs() < 1e-15);
    assert!((embedding_gamma(4.0, 2.0, 2).unwrap() - 1.0).abs() < 1e-15);
    assert!(embedding_gamma(3.0, 1.0, 1).is_err());
    assert!(embedding_gamma(3.0, 2.1, 1).is_err());
    assert!(embedding_gamma(0.5, 1.1, 1).is_err());
}

#[test]
fn rejects_bad_parameters() {
    let f = unit_field(9, 9, |t, x| t * x);
    let dom = DomainSpec::of_field(&f).unwrap();
    let s = CampanatoSampling::dyadic(&f, &dom, 1, 1);
    assert!(campanato_seminorm(&f, &dom, 0.5, 1.0, &s).is_err());
    assert!(campanato_seminorm(&f, &dom, 2.0, -1.0, &s).is_err());
    let big = CampanatoSampling {
        radii: vec![10.0],
        ..s
    };
    assert!(campanato_seminorm(&f, &dom, 2.0, 1.0, &big).is_err());
    assert!(DomainSpec::new((1.0, 0.0), vec![0.0], vec![1.0]).is_err());
    assert!(DomainSpec::new((0.0, 1.0), vec![0.0], vec![0.0]).is_err());
}

fn random_field(seed: u64, nt: usize, nx: usize) -> FieldSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = (0..nt * nx).map(|_| rng.random_range(-1.0..1.0)).collect();
    let times = (0..nt).map(|i| i as f64 / (nt - 1) as f64).collect();
    let xs = (0..nx).map(|j| j as f64 / (nx - 1) as f64).collect();
    FieldSample::new(times, xs, vals).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn campanato_is_monotone_in_sampling(seed in any::<u64>(), drop in 1usize..4, p in 1.0f64..4.0, theta in 0.8f64..2.0) {
        let f = random_field(seed, 9, 17);
        let dom = DomainSpec::of_field(&f).unwrap();
        let full = CampanatoSampling::dyadic(&f, &dom, 1, 1);
        let sub = CampanatoSampling {
            center_stride_t: 2,
            center_stride_x: 2,
            radii: full.radii[..full.radii.len().saturating_sub(drop).max(1)].to_vec(),
        };
        let a = campanato_seminorm(&f, &dom, p, theta, &full).unwrap().value;
        let b = campanato_seminorm(&f, &dom, p, theta, &sub).unwrap().value;
        prop_assert!(b <= a);
    }

    #[test]
    fn seminorms_scale_with_the_field(seed in any::<u64>(), lambda in -5.0f64..5.0, gamma in 0.1f64..1.0) {
        let f = random_field(seed, 9, 17);
        let g = f.scaled(lambda);
        let dom = DomainSpec::of_field(&f).unwrap();
        let s = CampanatoSampling::dyadic(&f, &dom, 1, 1);
        let a = campanato_seminorm(&f, &dom, 2.0, 1.2, &s).unwrap().value;
        let b = campanato_seminorm(&g, &dom, 2.0, 1.2, &s).unwrap().value;
        prop_assert!((b - lambda.abs() * a).abs() <= 1e-12 * a.max(1.0));
        let hs = HolderSampling { random_pairs: 200, seed: 1 };
        let a = holder_seminorm(&f, gamma, &hs).unwrap().value;
        let b = holder_seminorm(&g, gamma, &hs).unwrap().value;
        prop_assert!((b - lambda.abs() * a).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn witnesses_reproduce_the_value(seed in any::<u64>(), p in 1.0f64..4.0, theta in 0.5f64..2.0, gamma in 0.1f64..1.0) {
        let f = random_field(seed, 9, 17);
        let dom = DomainSpec::of_field(&f).unwrap();
        let s = CampanatoSampling::dyadic(&f, &dom, 1, 1);
        let r = campanato_seminorm(&f, &dom, p, theta, &s).unwrap();
        prop_assert_eq!(reevaluate_witness(&f, &r), Some(r.value));
        if let Witness::Cylinder { t_index, x_index, radius, .. } = r.witness {
            prop_assert_eq!(campanato_at(&f, p, theta, t_index, x_index, radius), Some(r.value));
        } else {
            prop_assert!(false, "no cylinder witness");
        }
        let h = holder_seminorm(&f, gamma, &HolderSampling { random_pairs: 500, seed }).unwrap();
        prop_assert_eq!(reevaluate_witness(&f, &h), Some(h.value));
    }

    #[test]
    fn spatial_holder_of_a_line(slope in -3.0f64..3.0, n in 8usize..300) {
        let dx = 1.0 / n as f64;
        let row: Vec<f64> = (0..n).map(|j| slope * j as f64 * dx).collect();
        let (v, _) = seminorms::spatial_holder(&row, dx, 1.0, false);
        prop_assert!((v - slope.abs()).abs() <= 1e-9 * slope.abs().max(1.0));
    }
}
