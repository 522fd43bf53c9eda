use std::f64::consts::PI;

use maxrisk::numerics::*;
use maxrisk::Error;
use proptest::prelude::*;

fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + h * i as f64);
    }
    s * h / 3.0
}

#[test]
fn gamma_at_one_point_two_matches_simpson_oracle() {
    // Gamma(1.2) = int_0^inf x^0.2 e^-x dx; with x = y^5 the integrand is smooth.
    let oracle = simpson(
        |y: f64| 5.0 * y.powi(5) * (-y.powi(5)).exp(),
        0.0,
        4.0,
        40_000,
    );
    let frozen = 0.918_168_742_399_760_6;
    assert!((oracle - frozen).abs() < 1e-12);
    assert!((gamma(1.2).unwrap() - frozen).abs() < 1e-14);
}

#[test]
fn gamma_reference_values() {
    let cases = [
        (-2.5, -0.945_308_720_482_941_9),
        (0.001, 999.423_772_484_595_4),
        (29.5, 1.634_812_519_827_426_6e30),
        (0.5, PI.sqrt()),
        (5.0, 24.0),
    ];
    for (x, v) in cases {
        let g = gamma(x).unwrap();
        assert!(((g - v) / v).abs() < 1e-12, "gamma({x}) = {g}, want {v}");
    }
}

#[test]
fn gamma_poles_are_domain_errors() {
    for x in [0.0, -1.0, -7.0] {
        assert!(matches!(gamma(x), Err(Error::Domain(_))));
    }
}

#[test]
fn quantile_reference_values() {
    let cases = [
        (1e-10, -6.361_340_902_404_056),
        (0.01, -2.326_347_874_040_841),
        (0.5, 0.0),
        (0.95, 1.644_853_626_951_472_2),
        (0.999, 3.090_232_306_167_813_5),
    ];
    for (p, q) in cases {
        let got = std_normal_quantile(p).unwrap();
        assert!((got - q).abs() < 1e-12, "q({p}) = {got:.17}, want {q}");
    }
}

#[test]
fn quantile_rejects_closed_endpoints() {
    assert!(std_normal_quantile(0.0).is_err());
    assert!(std_normal_quantile(1.0).is_err());
}

#[test]
fn quantile_agrees_with_bisection_oracle() {
    for &p in &[1e-6, 0.03, 0.2, 0.5, 0.77, 0.975, 1.0 - 1e-7] {
        let (mut lo, mut hi) = (-10.0f64, 10.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if std_normal_cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((std_normal_quantile(p).unwrap() - 0.5 * (lo + hi)).abs() < 1e-9);
    }
}

type Integrand = Box<dyn Fn(f64) -> f64>;

#[test]
fn ten_known_integrals() {
    let spec = QuadSpec::default().with_rel_tol(1e-10);
    let cases: Vec<(Integrand, Domain, f64)> = vec![
        (Box::new(|x: f64| x.sin()), Domain::Finite(0.0, PI), 2.0),
        (Box::new(|x: f64| (-x).exp()), Domain::UpperTail(0.0), 1.0),
        (
            Box::new(|x: f64| (-x * x).exp()),
            Domain::WholeLine,
            PI.sqrt(),
        ),
        (
            Box::new(|x: f64| 1.0 / (1.0 + x * x)),
            Domain::WholeLine,
            PI,
        ),
        (Box::new(|x: f64| x.exp()), Domain::LowerTail(0.0), 1.0),
        (
            Box::new(|x: f64| 1.0 / x.sqrt()),
            Domain::Finite(0.0, 1.0),
            2.0,
        ),
        (Box::new(|x: f64| x.ln()), Domain::Finite(0.0, 1.0), -1.0),
        (
            Box::new(|x: f64| 1.0 / (x * x)),
            Domain::UpperTail(1.0),
            1.0,
        ),
        (
            Box::new(|x: f64| x.powf(0.2) * (-x).exp()),
            Domain::UpperTail(0.0),
            0.918_168_742_399_760_6,
        ),
        (
            Box::new(|x: f64| (-0.5 * x * x).exp() * x.cos()),
            Domain::WholeLine,
            (2.0 * PI).sqrt() * (-0.5f64).exp(),
        ),
    ];
    for (i, (f, d, want)) in cases.into_iter().enumerate() {
        let got = integrate(f, d, &spec).unwrap();
        assert!(
            ((got.value - want) / want).abs() < 1e-9,
            "case {i}: {} vs {want}",
            got.value
        );
    }
}

#[test]
fn exponential_infinite_map_works() {
    let spec = QuadSpec {
        infinite_map: TailMap::Exponential,
        ..QuadSpec::default()
    };
    let r = integrate(|x: f64| (-2.0 * x).exp(), Domain::UpperTail(1.0), &spec).unwrap();
    assert!((r.value - 0.5 * (-2.0f64).exp()).abs() < 1e-9);
    let r = integrate(|x: f64| (-x * x).exp(), Domain::WholeLine, &spec).unwrap();
    assert!((r.value - PI.sqrt()).abs() < 1e-8);
}

#[test]
fn non_convergence_reports_best_estimate() {
    let spec = QuadSpec {
        max_subdivisions: 3,
        ..QuadSpec::default().with_rel_tol(1e-12)
    };
    match integrate(|x: f64| (1.0 / x).sin(), Domain::Finite(1e-4, 1.0), &spec) {
        Err(Error::NoConvergence { estimate, .. }) => assert!(estimate.is_finite()),
        other => panic!("expected NoConvergence, got {other:?}"),
    }
}

proptest! {
    #[test]
    fn gamma_recurrence(x in -9.9f64..29.0) {
        prop_assume!((x - x.round()).abs() > 1e-3 && (x + 1.0 - (x + 1.0).round()).abs() > 1e-3);
        let lhs = gamma(x + 1.0).unwrap();
        let rhs = x * gamma(x).unwrap();
        prop_assert!(((lhs - rhs) / lhs).abs() < 1e-12);
    }

    #[test]
    fn cdf_quantile_round_trip(p in 1e-12f64..(1.0 - 1e-12)) {
        let q = std_normal_quantile(p).unwrap();
        let back = std_normal_cdf(q);
        prop_assert!((back - p).abs() <= 1e-12 * p.min(1.0 - p).max(1e-3));
    }

    #[test]
    fn log_cdf_is_increasing(x in -200.0f64..20.0, dx in 1e-3f64..1.0) {
        prop_assert!(ln_std_normal_cdf(x + dx) >= ln_std_normal_cdf(x));
    }

    #[test]
    fn polynomial_integrals_are_exact(c in prop::collection::vec(-5.0f64..5.0, 1..8), b in 0.1f64..4.0) {
        let f = |x: f64| c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci);
        let exact: f64 = c.iter().enumerate().map(|(k, ci)| ci * b.powi(k as i32 + 1) / (k as f64 + 1.0)).sum();
        let r = integrate(f, Domain::Finite(0.0, b), &QuadSpec::default()).unwrap();
        prop_assert!((r.value - exact).abs() <= 1e-10 * (1.0 + exact.abs()));
    }
}
