use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dependence::Margin;
use crate::error::{domain, Result};
use crate::geometry::Region;
use crate::numerics::std_normal_cdf;

use super::FieldSample;

/// Discretization requirements for [`mc_normalized_loss_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossOptions {
    /// The grid spacing may not exceed the region diameter divided by this.
    pub min_cells_across: f64,
}

impl Default for LossOptions {
    fn default() -> Self {
        Self {
            min_cells_across: 50.0,
        }
    }
}

/// Midpoint-rule estimate of the normalized loss over `lambda * region`
/// for each replicate, with cost `value^beta`.
pub fn mc_normalized_loss(
    samples: &[FieldSample],
    region: &Region,
    lambda: f64,
    beta: f64,
) -> Result<Vec<f64>> {
    mc_normalized_loss_with(samples, region, lambda, beta, &LossOptions::default())
}

pub fn mc_normalized_loss_with(
    samples: &[FieldSample],
    region: &Region,
    lambda: f64,
    beta: f64,
    opts: &LossOptions,
) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return domain(format!("lambda = {lambda} must be positive"));
    }
    if !beta.is_finite() {
        return domain("beta must be finite");
    }
    let Some(first) = samples.first() else {
        return Ok(Vec::new());
    };
    let region = region.scaled(lambda);
    region.validate()?;
    let g = *first.grid();
    if g.spacing > region.diameter() / opts.min_cells_across * (1.0 + 1e-9) {
        return domain(format!(
            "grid spacing {} exceeds diameter / {}",
            g.spacing, opts.min_cells_across
        ));
    }
    let [rx0, ry0, rx1, ry1] = region.bounding_box();
    let half = 0.5 * g.spacing;
    let slack = 1e-9 * region.diameter();
    let (gx0, gy0) = (g.origin[0] - half, g.origin[1] - half);
    let (gx1, gy1) = (
        g.origin[0] + (g.nx as f64 - 0.5) * g.spacing,
        g.origin[1] + (g.ny as f64 - 0.5) * g.spacing,
    );
    if gx0 > rx0 + slack || gy0 > ry0 + slack || gx1 < rx1 - slack || gy1 < ry1 - slack {
        return domain("grid does not cover the region");
    }
    let positions = |s: &FieldSample| -> Result<Vec<usize>> {
        let idx = s.sites.indices();
        let mut out = Vec::new();
        for i in 0..g.len() {
            if region.contains(g.point(i)) {
                match idx.binary_search(&(i as u32)) {
                    Ok(k) => out.push(k),
                    Err(_) => return domain("a grid point inside the region was not simulated"),
                }
            }
        }
        if out.is_empty() {
            return domain("no grid point inside the region");
        }
        Ok(out)
    };
    let base = positions(first)?;
    let integer = beta == beta.round() && beta.abs() <= i32::MAX as f64;
    let cost = |v: f64| {
        if integer {
            v.powi(beta as i32)
        } else {
            v.powf(beta)
        }
    };
    samples
        .iter()
        .map(|s| {
            if *s.grid() != g {
                return domain("all samples must share one grid");
            }
            if matches!(s.margin, Margin::Simple) && s.values.iter().any(|&v| !(v > 0.0)) {
                return domain("simple-margin values must be positive");
            }
            let own;
            let pos = if s.sites.shares_storage(&first.sites) {
                &base
            } else {
                own = positions(s)?;
                &own
            };
            Ok(pos.iter().map(|&k| cost(s.values[k])).sum::<f64>() / pos.len() as f64)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "alpha")]
pub enum RiskMeasure {
    Mean,
    Variance,
    /// Value-at-risk at level alpha.
    Var(f64),
    /// Expected shortfall `E[X | X > VaR]` at level alpha.
    Es(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bootstrap {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for Bootstrap {
    fn default() -> Self {
        Self {
            resamples: 200,
            seed: 0x5EED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    /// Set when fewer than 20 observations lie beyond the VaR level.
    pub warning: Option<String>,
}

fn point_estimate(sorted: &[f64], m: RiskMeasure) -> f64 {
    let n = sorted.len();
    let quantile = |alpha: f64| sorted[((n as f64 * alpha).ceil() as usize).clamp(1, n) - 1];
    match m {
        RiskMeasure::Mean => sorted.iter().sum::<f64>() / n as f64,
        RiskMeasure::Variance => {
            if n < 2 {
                return 0.0;
            }
            let mean = sorted.iter().sum::<f64>() / n as f64;
            sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        }
        RiskMeasure::Var(alpha) => quantile(alpha),
        RiskMeasure::Es(alpha) => {
            let var = quantile(alpha);
            let tail: Vec<f64> = sorted.iter().copied().filter(|&x| x > var).collect();
            if tail.is_empty() {
                var
            } else {
                tail.iter().sum::<f64>() / tail.len() as f64
            }
        }
    }
}

pub fn mc_risk(losses: &[f64], measure: RiskMeasure) -> Result<McEstimate> {
    mc_risk_with(losses, measure, &Bootstrap::default())
}

/// Empirical risk measure with a bootstrap standard error.
pub fn mc_risk_with(losses: &[f64], measure: RiskMeasure, boot: &Bootstrap) -> Result<McEstimate> {
    if losses.is_empty() {
        return domain("no losses");
    }
    if losses.iter().any(|x| !x.is_finite()) {
        return domain("losses must be finite");
    }
    let mut warning = None;
    if let RiskMeasure::Var(alpha) | RiskMeasure::Es(alpha) = measure {
        if !(alpha > 0.0 && alpha < 1.0) {
            return domain(format!("alpha = {alpha} must lie in (0, 1)"));
        }
        let tail = losses.len() as f64 * (1.0 - alpha);
        if tail < 20.0 {
            warning = Some(format!(
                "only {tail:.1} expected observations beyond the {alpha} quantile"
            ));
        }
    }
    let mut sorted = losses.to_vec();
    sorted.sort_by(f64::total_cmp);
    let estimate = point_estimate(&sorted, measure);
    let mut rng = ChaCha8Rng::seed_from_u64(boot.seed);
    let n = losses.len();
    let mut buf = vec![0.0; n];
    let reps: Vec<f64> = (0..boot.resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = sorted[rng.random_range(0..n)];
            }
            buf.sort_by(f64::total_cmp);
            point_estimate(&buf, measure)
        })
        .collect();
    let std_error = if reps.len() < 2 {
        0.0
    } else {
        let m = reps.iter().sum::<f64>() / reps.len() as f64;
        (reps.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps.len() - 1) as f64).sqrt()
    };
    Ok(McEstimate {
        estimate,
        std_error,
        warning,
    })
}

/// Kolmogorov-Smirnov statistic with its asymptotic p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        let c = PI * PI / (8.0 * x * x);
        let s: f64 = (0..6)
            .map(|k| {
                let m = (2 * k + 1) as f64;
                (-m * m * c).exp()
            })
            .sum();
        (1.0 - (2.0 * PI).sqrt() / x * s).clamp(0.0, 1.0)
    } else {
        let s: f64 = (1..=6)
            .map(|k| {
                let k = k as f64;
                let sign = if k as u32 % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * k * k * x * x).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

fn p_value(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// One-sample test of values already mapped through the hypothesized cdf.
pub fn ks_uniform(u: &[f64]) -> Result<KsResult> {
    if u.is_empty() {
        return domain("no observations");
    }
    let mut s = u.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max);
    Ok(KsResult {
        statistic: d,
        p_value: p_value(d, n),
    })
}

/// One-sample test against `N(mean, sd^2)`.
pub fn ks_normal(values: &[f64], mean: f64, sd: f64) -> Result<KsResult> {
    if !(sd > 0.0) {
        return domain("sd must be positive");
    }
    let u: Vec<f64> = values
        .iter()
        .map(|&x| std_normal_cdf((x - mean) / sd))
        .collect();
    ks_uniform(&u)
}

/// Two-sample test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return domain("no observations");
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let n_eff = (n * m) as f64 / (n + m) as f64;
    Ok(KsResult {
        statistic: d,
        p_value: p_value(d, n_eff),
    })
}
