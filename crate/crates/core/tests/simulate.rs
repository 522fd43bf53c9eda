use maxrisk::dependence::{cov_simple, extremal_coefficient, GevParams, Margin, PowerSpec};
use maxrisk::geometry::Region;
use maxrisk::numerics::{std_normal_cdf, QuadSpec};
use maxrisk::risk::mean_cost;
use maxrisk::simulate::*;
use maxrisk::variogram::{Sym2, Variogram};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn line(n: usize, spacing: f64) -> Grid {
    Grid::new([0.0, 0.0], n, 1, spacing).unwrap()
}

fn column(samples: &[FieldSample], k: usize) -> Vec<f64> {
    samples.iter().map(|s| s.values[k]).collect()
}

fn frechet_pvalue(z: &[f64]) -> f64 {
    let u: Vec<f64> = z.iter().map(|&x| (-1.0 / x).exp()).collect();
    ks_uniform(&u).unwrap().p_value
}

/// Mean and standard error of a sample.
fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Empirical covariance of powers with a delta-method standard error.
fn power_cov(a: &[f64], b: &[f64], beta: f64) -> (f64, f64) {
    let pa: Vec<f64> = a.iter().map(|x| x.powf(beta)).collect();
    let pb: Vec<f64> = b.iter().map(|x| x.powf(beta)).collect();
    let (ma, _) = mean_se(&pa);
    let (mb, _) = mean_se(&pb);
    let prod: Vec<f64> = pa
        .iter()
        .zip(&pb)
        .map(|(x, y)| (x - ma) * (y - mb))
        .collect();
    mean_se(&prod)
}

fn joint_below(a: &[f64], b: &[f64], u: f64) -> (f64, f64) {
    let n = a.len() as f64;
    let p = a
        .iter()
        .zip(b)
        .filter(|(x, y)| **x <= u && **y <= u)
        .count() as f64
        / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

#[test]
fn brown_resnick_margins_are_standard_frechet() {
    let v = Variogram::power(1.0, 1.0).unwrap();
    let grid = Grid::new([0.0, 0.0], 3, 3, 0.7).unwrap();
    let s = simulate_brown_resnick(&v, grid, 10_000, 3, BrMethod::ExtremalFunctions).unwrap();
    for k in 0..9 {
        let z = column(&s, k);
        assert!(z.iter().all(|&x| x > 0.0));
        assert!(frechet_pvalue(&z) > 0.01, "site {k}");
        let p = z.iter().filter(|&&x| x <= 1.0).count() as f64 / z.len() as f64;
        let e = (-1f64).exp();
        assert!((p - e).abs() < 3.0 * (e * (1.0 - e) / z.len() as f64).sqrt());
    }
}

#[test]
fn brown_resnick_pairs_follow_extremal_coefficient() {
    let v = Variogram::power(1.0, 1.5).unwrap();
    let s =
        simulate_brown_resnick(&v, line(4, 0.8), 20_000, 5, BrMethod::ExtremalFunctions).unwrap();
    for k in 1..4 {
        let theta = extremal_coefficient(&v, [0.0, 0.0], [0.8 * k as f64, 0.0]);
        for u in [0.5, 2.0] {
            let (p, se) = joint_below(&column(&s, 0), &column(&s, k), u);
            let want = (-theta / u).exp();
            assert!((p - want).abs() < 3.0 * se, "k={k} u={u}: {p} vs {want}");
        }
    }
}

#[test]
fn brown_resnick_power_covariance_golden() {
    let v = Variogram::power(1.0, 1.0).unwrap();
    let s = simulate_brown_resnick(
        &v,
        line(2, 2.0),
        1_000_000,
        2024,
        BrMethod::ExtremalFunctions,
    )
    .unwrap();
    // Small power keeps the fourth moment of the product finite.
    let (c, se) = power_cov(&column(&s, 0), &column(&s, 1), 0.1);
    let exact = cov_simple(0.1, 0.1, &v, [0.0, 0.0], [2.0, 0.0], &QuadSpec::default()).unwrap();
    assert!((c - exact).abs() < 3.0 * se, "{c} +- {se} vs {exact}");
}

#[test]
fn truncated_spectral_agrees_with_exact() {
    let v = Variogram::power(1.0, 1.0).unwrap();
    let grid = line(4, 0.5);
    let exact = simulate_brown_resnick(&v, grid, 20_000, 8, BrMethod::ExtremalFunctions).unwrap();
    let trunc = simulate_brown_resnick(
        &v,
        grid,
        20_000,
        9,
        BrMethod::TruncatedSpectral { n_points: 1000 },
    )
    .unwrap();
    let bias = trunc
        .iter()
        .map(|s| s.truncation.unwrap().unresolved)
        .sum::<f64>()
        / trunc.len() as f64;
    assert!(bias < 0.01, "unresolved fraction {bias}");
    for k in 1..4 {
        let (pe, se_e) = joint_below(&column(&exact, 0), &column(&exact, k), 1.0);
        let (pt, se_t) = joint_below(&column(&trunc, 0), &column(&trunc, k), 1.0);
        assert!(
            (pe - pt).abs() < 3.0 * se_e.hypot(se_t),
            "k={k}: {pe} vs {pt}"
        );
    }
}

#[test]
fn max_stability() {
    let v = Variogram::power(1.0, 1.0).unwrap();
    let s =
        simulate_brown_resnick(&v, line(2, 1.0), 40_000, 12, BrMethod::ExtremalFunctions).unwrap();
    let m = 4;
    let maxima: Vec<f64> = s
        .chunks(m)
        .map(|c| c.iter().map(|x| x.values[1]).fold(0.0, f64::max) / m as f64)
        .collect();
    assert!(frechet_pvalue(&maxima) > 0.01);
}

#[test]
fn increment_field_moments() {
    let v = Variogram::power(1.0, 1.0).unwrap();
    let grid = Grid::new([0.0, 0.0], 4, 3, 0.5).unwrap();
    let pts: Vec<[f64; 2]> = (0..grid.len()).map(|i| grid.point(i)).collect();
    let factor = IncrementFactor::new(&v, &pts, grid.origin).unwrap();
    let mut rng = replicate_rng(1, 0);
    let draws: Vec<Vec<f64>> = (0..10_000).map(|_| factor.draw(&mut rng)).collect();
    let (x, y) = (11, 5);
    let sq_x: Vec<f64> = draws.iter().map(|w| w[x] * w[x]).collect();
    let (m, se) = mean_se(&sq_x);
    assert!((m - v.eval(pts[x])).abs() < 3.0 * se);
    let inc: Vec<f64> = draws.iter().map(|w| (w[x] - w[y]).powi(2)).collect();
    let (m, se) = mean_se(&inc);
    let want = v.eval([pts[x][0] - pts[y][0], pts[x][1] - pts[y][1]]);
    assert!((m - want).abs() < 3.0 * se);
    let w = gaussian_increment_field(&v, &grid, 4).unwrap();
    assert_eq!(w[0], 0.0);
    assert_eq!(w, gaussian_increment_field(&v, &grid, 4).unwrap());
}

#[test]
fn quadratic_variogram_fields_are_linear() {
    let v = Variogram::power(1.0, 2.0).unwrap();
    let grid = Grid::new([-1.0, 2.0], 7, 5, 0.3).unwrap();
    let pts: Vec<[f64; 2]> = (0..grid.len()).map(|i| grid.point(i)).collect();
    assert_eq!(
        IncrementFactor::new(&v, &pts, grid.origin).unwrap().rank(),
        2
    );
    for seed in 0..5 {
        let w = gaussian_increment_field(&v, &grid, seed).unwrap();
        // W(x) = a . (x - origin): every row is an arithmetic progression.
        for iy in 0..grid.ny {
            let row = &w[iy * grid.nx..(iy + 1) * grid.nx];
            let step = row[1] - row[0];
            for ix in 2..grid.nx {
                assert!((row[ix] - row[0] - ix as f64 * step).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn reproducible_across_thread_counts() {
    let v = Variogram::power(1.0, 1.0).unwrap();
    let grid = Grid::new([0.0, 0.0], 5, 4, 0.4).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| {
            simulate_brown_resnick(&v, grid, 50, 77, BrMethod::ExtremalFunctions).unwrap()
        })
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a, b);
    let c = simulate_brown_resnick(&v, grid, 50, 78, BrMethod::ExtremalFunctions).unwrap();
    assert_ne!(a[0].values, c[0].values);
    let t1 = simulate_tube(1.0, grid, 20, 5).unwrap();
    assert_eq!(t1, simulate_tube(1.0, grid, 20, 5).unwrap());
}

#[test]
fn smith_matches_brown_resnick_with_quadratic_variogram() {
    let sigma = Sym2([[1.5, 0.4], [0.4, 0.8]]);
    let v = Variogram::quadratic_form(sigma).unwrap();
    let grid = Grid::new([0.0, 0.0], 3, 2, 0.6).unwrap();
    let smith = simulate_smith(&sigma, grid, 40_000, 1).unwrap();
    let br = simulate_brown_resnick(&v, grid, 40_000, 2, BrMethod::ExtremalFunctions).unwrap();
    for k in 0..6 {
        assert!(frechet_pvalue(&column(&smith, k)) > 0.01, "site {k}");
    }
    for k in 1..6 {
        let x = grid.point(k);
        let theta = extremal_coefficient(&v, [0.0, 0.0], x);
        let (p, se) = joint_below(&column(&smith, 0), &column(&smith, k), 1.0);
        assert!((p - (-theta).exp()).abs() < 3.0 * se, "site {k}");
        let (cs, ses) = power_cov(&column(&smith, 0), &column(&smith, k), 0.2);
        let (cb, seb) = power_cov(&column(&br, 0), &column(&br, k), 0.2);
        assert!(
            (cs - cb).abs() < 3.0 * ses.hypot(seb),
            "site {k}: {cs} vs {cb}"
        );
    }
}

#[test]
fn tube_model_margins_and_independence() {
    let grid = line(6, 0.5);
    let s = simulate_tube(0.6, grid, 20_000, 4).unwrap();
    for k in 0..6 {
        assert!(frechet_pvalue(&column(&s, k)) > 0.01, "site {k}");
    }
    // 2.5 apart > 2 * 0.6: disjoint storm supports.
    let (c, se) = power_cov(&column(&s, 0), &column(&s, 5), 0.25);
    assert!(c.abs() < 3.0 * se, "{c} +- {se}");
    let (c_near, _) = power_cov(&column(&s, 0), &column(&s, 1), 0.25);
    assert!(c_near > 0.05);
}

#[test]
fn tube_losses_are_translation_invariant() {
    let region = Region::disk(1.0).unwrap().scaled(2.0);
    let shifted = region.translated([3.0, 3.0]);
    let loss = |r: &Region, seed: u64| {
        let grid = Grid::covering(r, 50).unwrap();
        let sites = Sites::within(grid, r).unwrap();
        let s = simulate_tube(0.5, sites, 1000, seed).unwrap();
        mc_normalized_loss(&s, r, 1.0, 0.25).unwrap()
    };
    let a = loss(&region, 1);
    let b = loss(&shifted, 2);
    assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.01);
}

#[test]
fn schlather_margins_and_extremal_coefficient() {
    let corr = Correlation::Exponential { range: 1.0 };
    let grid = line(4, 0.5);
    let s = simulate_schlather(&corr, grid, 20_000, 6).unwrap();
    let flagged = s
        .iter()
        .map(|x| x.truncation.unwrap().unresolved)
        .sum::<f64>()
        / 20_000.0;
    assert!(flagged < 0.01);
    for k in 0..4 {
        assert!(frechet_pvalue(&column(&s, k)) > 0.01);
    }
    for k in 1..4 {
        let rho = corr.eval(0.5 * k as f64);
        let theta = 1.0 + ((1.0 - rho) / 2.0).sqrt();
        let (p, se) = joint_below(&column(&s, 0), &column(&s, k), 1.0);
        assert!((p - (-theta).exp()).abs() < 3.0 * se, "k={k}: {p}");
    }
    let close = simulate_schlather(&corr, line(2, 1e-14), 200, 1).unwrap();
    for x in &close {
        assert!((x.values[0] / x.values[1] - 1.0).abs() < 1e-4);
    }
}

#[test]
fn gev_transform_properties() {
    let p = GevParams::new(30.0, 3.0, -0.2).unwrap();
    let v = Variogram::power(1.0, 1.0).unwrap();
    let s =
        simulate_brown_resnick(&v, line(3, 1.0), 100_000, 10, BrMethod::ExtremalFunctions).unwrap();
    let g: Vec<FieldSample> = s.iter().map(|x| gev_transform(x, &p).unwrap()).collect();
    assert!(g.iter().all(|x| x.values.iter().all(|&y| y < 45.0)));
    assert!(g.iter().all(|x| x.margin == Margin::Gev(p)));
    assert!((p.from_frechet(1.0) - 30.0).abs() < 1e-12);
    assert!(45.0 - p.from_frechet(1e25) < 1e-3);
    let (m, se) = mean_se(&column(&g, 1));
    let want = mean_cost(&PowerSpec::gev(1, p).unwrap()).unwrap();
    assert!((m - want).abs() < 3.0 * se);
    assert!(gev_transform(&g[0], &p).is_err());
    let gumbel = GevParams::new(1.0, 2.0, 0.0).unwrap();
    let t = gev_transform(&s[0], &gumbel).unwrap();
    assert!((t.values[0] - (1.0 + 2.0 * s[0].values[0].ln())).abs() < 1e-14);
}

#[test]
fn normalized_loss_rules() {
    let region = Region::disk(1.0).unwrap();
    let grid = Grid::covering(&region, 50).unwrap();
    let sites = Sites::within(grid, &region).unwrap();
    let constant = FieldSample {
        sites: sites.clone(),
        values: vec![2.5; sites.len()],
        margin: Margin::Simple,
        seed: 0,
        replicate: 0,
        truncation: None,
    };
    let l = mc_normalized_loss(std::slice::from_ref(&constant), &region, 1.0, 1.0).unwrap();
    assert!((l[0] - 2.5).abs() < 1e-14);
    // Too coarse for a region this size.
    assert!(mc_normalized_loss(std::slice::from_ref(&constant), &region, 0.5, 1.0).is_err());
    // Grid does not cover the dilated region.
    assert!(mc_normalized_loss(std::slice::from_ref(&constant), &region, 2.0, 1.0).is_err());
    let coarse = LossOptions {
        min_cells_across: 20.0,
    };
    assert!(mc_normalized_loss_with(&[constant], &region, 0.5, 1.0, &coarse).is_ok());

    let v = Variogram::power(1.0, 1.0).unwrap();
    let grid = Grid::covering(&region, 20).unwrap();
    let sites = Sites::within(grid, &region).unwrap();
    let s = simulate_brown_resnick(&v, sites, 1000, 3, BrMethod::ExtremalFunctions).unwrap();
    let losses = mc_normalized_loss_with(&s, &region, 1.0, 0.25, &coarse).unwrap();
    let (m, se) = mean_se(&losses);
    let want = mean_cost(&PowerSpec::simple(0.25).unwrap()).unwrap();
    assert!((m - want).abs() < 3.0 * se, "{m} +- {se} vs {want}");
}

#[test]
fn risk_estimators() {
    let c = vec![3.0; 500];
    for m in [
        RiskMeasure::Mean,
        RiskMeasure::Variance,
        RiskMeasure::Var(0.95),
        RiskMeasure::Es(0.95),
    ] {
        let e = mc_risk(&c, m).unwrap();
        assert_eq!(e.std_error, 0.0);
        if m != RiskMeasure::Variance {
            assert_eq!(e.estimate, 3.0);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let x: Vec<f64> = (0..20_000)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let var = mc_risk(&x, RiskMeasure::Var(0.95)).unwrap();
    assert!((var.estimate - 1.644_853_626_951_472_2).abs() < 3.0 * var.std_error);
    let es = mc_risk(&x, RiskMeasure::Es(0.95)).unwrap();
    let want = (-0.5f64 * 1.644_853_626_951_472_2f64.powi(2)).exp()
        / (2.0 * std::f64::consts::PI).sqrt()
        / 0.05;
    assert!((es.estimate - want).abs() < 3.0 * es.std_error);
    assert!(var.warning.is_none());
    assert!(mc_risk(&x[..100], RiskMeasure::Es(0.95))
        .unwrap()
        .warning
        .is_some());
    assert!(mc_risk(&[], RiskMeasure::Mean).is_err());
    assert!(mc_risk(&x, RiskMeasure::Var(1.5)).is_err());
}

#[test]
fn ks_tests_behave() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let y: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
    assert!(ks_normal(&x, 0.0, 1.0).unwrap().p_value > 0.01);
    assert!(ks_normal(&x, 0.3, 1.0).unwrap().p_value < 1e-6);
    assert!(ks_two_sample(&x, &y).unwrap().p_value > 0.01);
    let shifted: Vec<f64> = y.iter().map(|v| v + 0.3).collect();
    assert!(ks_two_sample(&x, &shifted).unwrap().p_value < 1e-6);
    let u: Vec<f64> = x.iter().map(|&v| std_normal_cdf(v)).collect();
    assert_eq!(ks_uniform(&u).unwrap(), ks_normal(&x, 0.0, 1.0).unwrap());
}

#[test]
fn dump_round_trip() {
    let v = Variogram::power(1.0, 1.0).unwrap();
    let region = Region::square(1.0).unwrap();
    let grid = Grid::covering(&region, 6).unwrap();
    let sites = Sites::within(grid, &region).unwrap();
    let s = simulate_brown_resnick(&v, sites, 5, 42, BrMethod::ExtremalFunctions).unwrap();
    let g: Vec<FieldSample> = s
        .iter()
        .map(|x| gev_transform(x, &GevParams::new(30.0, 3.0, -0.2).unwrap()).unwrap())
        .collect();
    for batch in [&s, &g] {
        let mut buf = Vec::new();
        write_samples(&mut buf, batch).unwrap();
        assert_eq!(&buf[..4], b"FSMP");
        let back = read_samples(buf.as_slice()).unwrap();
        assert_eq!(&back, batch);
    }
    let mut buf = Vec::new();
    write_samples(&mut buf, &s).unwrap();
    assert!(read_samples(&buf[..buf.len() - 3]).is_err());
    buf[0] = b'X';
    assert!(read_samples(buf.as_slice()).is_err());
}

#[test]
fn covering_grid_and_sites() {
    let region = Region::disk(1.0)
        .unwrap()
        .scaled(10.0)
        .translated([5.0, -2.0]);
    let grid = Grid::covering(&region, 50).unwrap();
    assert_eq!((grid.nx, grid.ny), (50, 50));
    assert!((grid.spacing - 0.4).abs() < 1e-12);
    let sites = Sites::within(grid, &region).unwrap();
    let ratio = sites.len() as f64 / grid.len() as f64;
    assert!((ratio - std::f64::consts::PI / 4.0).abs() < 0.02);
    assert!(Grid::new([0.0, 0.0], 0, 3, 1.0).is_err());
    assert!(Grid::new([0.0, 0.0], 3, 3, -1.0).is_err());
    let sample = &simulate_tube(1.0, sites.clone(), 1, 0).unwrap()[0];
    let k = sites.indices()[7] as usize;
    let (ix, iy) = grid.coords(k);
    assert_eq!(sample.value_at(ix, iy), Some(sample.values[7]));
    assert_eq!(sample.value_at(0, 0), None);
}
