use maxrisk::dependence::{var_gev, GevParams, PowerSpec};
use maxrisk::geometry::{Region, Shape};
use maxrisk::numerics::{gamma, QuadSpec};
use maxrisk::risk::{
    asymptotic_cov_integral, clt_approx, es_asymptotic, mean_cost, r2, var_asymptotic, RiskQuery,
};
use maxrisk::variogram::{Sym2, Variogram};

fn reference(beta: u32) -> PowerSpec {
    PowerSpec::gev(beta, GevParams::new(30.0, 3.0, -0.2).unwrap()).unwrap()
}

fn query(shape: Shape, psi: f64, beta: u32) -> RiskQuery {
    RiskQuery::new(
        Region::new(shape, 1.0, 1.0).unwrap(),
        reference(beta),
        Variogram::power(1.0, psi).unwrap(),
    )
}

#[test]
fn mean_cost_values() {
    let simple = mean_cost(&PowerSpec::simple(0.5).unwrap()).unwrap();
    assert!((simple - std::f64::consts::PI.sqrt()).abs() < 1e-14);
    let m = mean_cost(&reference(1)).unwrap();
    assert!((m - (45.0 - 15.0 * gamma(1.2).unwrap())).abs() < 1e-12);
    let p = PowerSpec::gev(1, GevParams::new(7.0, 2.0, -1.0).unwrap()).unwrap();
    assert!((mean_cost(&p).unwrap() - 7.0).abs() < 1e-13);
    assert!(mean_cost(&PowerSpec::simple(1.0).unwrap()).is_err());
}

#[test]
fn tiny_region_gives_site_variance() {
    let q = query(Shape::Disk, 2.0, 1);
    let v = r2(&q, 1e-8).unwrap();
    let var = var_gev(&reference(1)).unwrap();
    assert!((v / var - 1.0).abs() < 1e-3);
}

#[test]
fn r2_decreases_and_square_is_slower() {
    let disk = query(Shape::Disk, 2.0, 1);
    let square = query(Shape::Square, 2.0, 1);
    let var = var_gev(&reference(1)).unwrap();
    let mut prev = f64::INFINITY;
    for k in 0..12 {
        let lambda = 0.25 * 2f64.powi(k) * 0.5;
        let d = r2(&disk, lambda).unwrap();
        let s = r2(&square, lambda).unwrap();
        assert!(d < prev, "lambda={lambda}");
        assert!(s >= d, "lambda={lambda}: square {s} < disk {d}");
        prev = d;
    }
    assert!(r2(&disk, 50.0).unwrap() < 3e-3 * var);
}

#[test]
fn anisotropic_variogram_is_unsupported() {
    let sigma = Sym2([[2.0, 0.3], [0.3, 1.0]]);
    let mut q = query(Shape::Disk, 1.0, 1);
    q.variogram = Variogram::anisotropic_power(1.0, sigma, 1.0).unwrap();
    assert!(matches!(r2(&q, 1.0), Err(maxrisk::Error::Unsupported(_))));
}

#[test]
fn clt_scaling_and_risk_ordering() {
    let q = query(Shape::Disk, 1.0, 1);
    let a = clt_approx(&q, 10.0).unwrap();
    let b = clt_approx(&q, 20.0).unwrap();
    assert!((b.variance * 4.0 / a.variance - 1.0).abs() < 1e-10);
    assert_eq!(a.mean, b.mean);
    assert!(a.variance > 0.0);

    let half = var_asymptotic(&q.clone().with_alpha(0.5), 10.0).unwrap();
    assert_eq!(half.value, half.mean);
    assert!(half.warning.is_some());
    let mut last = half.value;
    for alpha in [0.9, 0.95, 0.99] {
        let qa = q.clone().with_alpha(alpha);
        let var = var_asymptotic(&qa, 10.0).unwrap();
        let es = es_asymptotic(&qa, 10.0).unwrap();
        assert!(var.value > last);
        assert!(es.value > var.value);
        last = var.value;
    }
    let es_half = es_asymptotic(&q.clone().with_alpha(0.5), 10.0).unwrap();
    let k = asymptotic_cov_integral(&q.power, &q.variogram, &q.quad).unwrap();
    let want = es_half.mean
        + (1.0 / (2.0 * std::f64::consts::PI).sqrt()) / (0.5 * q.region.area().sqrt()) * k.sqrt()
            / 10.0;
    assert!((es_half.value - want).abs() < 1e-12 * want);
    assert!(var_asymptotic(&q.clone().with_alpha(1.0), 10.0).is_err());
}

#[test]
fn covariance_integral_basics() {
    let v = Variogram::power(1.0, 2.0).unwrap();
    let zero = PowerSpec::gev(0, GevParams::new(30.0, 3.0, -0.2).unwrap()).unwrap();
    assert_eq!(
        asymptotic_cov_integral(&zero, &v, &QuadSpec::default()).unwrap(),
        0.0
    );
    for psi in [0.5, 1.0, 2.0] {
        let v = Variogram::power(1.0, psi).unwrap();
        for beta in [1, 3] {
            let k = asymptotic_cov_integral(&reference(beta), &v, &QuadSpec::default()).unwrap();
            assert!(k > 0.0 && k.is_finite());
        }
    }
}

#[test]
fn large_region_variance_approaches_clt() {
    let gap = |psi: f64, lambda: f64| {
        let q = query(Shape::Disk, psi, 1);
        let k = asymptotic_cov_integral(&q.power, &q.variogram, &q.quad).unwrap();
        1.0 - lambda * lambda * r2(&q, lambda).unwrap() * q.region.area() / k
    };
    assert!(gap(2.0, 100.0).abs() <= 0.05);
    // The remaining gap is a boundary effect of order 1/lambda.
    for psi in [1.0, 2.0] {
        let (g1, g2) = (gap(psi, 200.0), gap(psi, 400.0));
        assert!(
            g1 > 0.0 && (g1 / g2 - 2.0).abs() < 0.05,
            "psi={psi}: {g1} {g2}"
        );
    }
}
