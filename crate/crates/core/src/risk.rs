//! Spatial risk measures of the normalized aggregated loss
//! `L(lambda A) = (1 / |lambda A|) * integral of Z(x)^beta over lambda A`.
//!
//! Only disks and squares are supported: for them the variance reduces to a
//! one-dimensional integral of the covariance against the pair-distance
//! density.

use serde::{Deserialize, Serialize};

use crate::dependence::{moment, var_gev, CovKernel, PowerSpec};
use crate::error::{domain, Error, Result};
use crate::geometry::{Region, Shape};
use crate::numerics::{integrate_pieces, std_normal_pdf, std_normal_quantile, Domain, QuadSpec};
use crate::variogram::Variogram;

fn default_alpha() -> f64 {
    0.95
}

/// Everything needed to evaluate a risk measure of the aggregated loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskQuery {
    pub region: Region,
    pub power: PowerSpec,
    pub variogram: Variogram,
    #[serde(default)]
    pub quad: QuadSpec,
    /// Confidence level for VaR and ES.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

impl RiskQuery {
    pub fn new(region: Region, power: PowerSpec, variogram: Variogram) -> Self {
        Self {
            region,
            power,
            variogram,
            quad: QuadSpec::default(),
            alpha: default_alpha(),
        }
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    pub fn with_quad(self, quad: QuadSpec) -> Self {
        Self { quad, ..self }
    }

    fn check_alpha(&self) -> Result<()> {
        if self.alpha > 0.0 && self.alpha < 1.0 {
            Ok(())
        } else {
            domain(format!("alpha = {} must lie in (0, 1)", self.alpha))
        }
    }
}

/// Normal approximation of the loss over a large region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltApprox {
    pub mean: f64,
    pub variance: f64,
}

impl CltApprox {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// An asymptotic risk value `mean + correction`, where the correction is
/// the order `1/lambda` term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Asymptotic {
    pub value: f64,
    pub mean: f64,
    pub correction: f64,
    /// Set when the level lies outside the range where the expansion is
    /// meaningful (alpha = 1/2 makes the VaR correction vanish).
    pub warning: Option<String>,
}

/// `E[C(x)]`, the same at every site.
pub fn mean_cost(p: &PowerSpec) -> Result<f64> {
    moment(p)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        domain(format!("lambda = {lambda} must be positive"))
    }
}

/// Runs a quadrature whose integrand can fail, returning the first failure.
fn integrate_fallible<F>(mut f: F, pieces: &[Domain], spec: &QuadSpec) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut failure: Option<Error> = None;
    let out = integrate_pieces(
        |x| {
            if failure.is_some() {
                return 0.0;
            }
            match f(x) {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        pieces,
        spec,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(out?.value)
}

/// Tolerance used for covariance evaluations nested inside an outer
/// quadrature.
fn inner_spec(spec: &QuadSpec) -> QuadSpec {
    QuadSpec {
        rel_tol: (0.1 * spec.rel_tol).max(1e-13),
        ..spec.clone()
    }
}

/// Sorted breakpoints inside `(lo, hi)` where the Husler-Reiss distance
/// crosses 0.5, 1, 2, ... so that the decay of the covariance is resolved
/// whatever the scale of the region.
fn decay_breakpoints(v: &Variogram, lo: f64, hi: f64) -> Result<Vec<f64>> {
    let mut pts = Vec::new();
    let mut s: f64 = 0.5;
    while s <= 64.0 {
        let h = v.radial_inverse(s * s)?;
        if h > lo && h < hi {
            pts.push(h);
        }
        s *= 2.0;
    }
    Ok(pts)
}

fn pieces_from(points: &mut Vec<f64>) -> Vec<Domain> {
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| Domain::Finite(w[0], w[1]))
        .collect()
}

/// `Var(L(lambda A))` for a disk or square `A` and an isotropic variogram.
pub fn r2(q: &RiskQuery, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    q.region.validate()?;
    q.quad.validate()?;
    if !q.variogram.is_isotropic() {
        return Err(Error::Unsupported(
            "the pair-distance reduction needs an isotropic variogram".into(),
        ));
    }
    q.power.check_second_moment()?;
    let kernel = CovKernel::new(&q.power, &q.power)?;
    let inner = inner_spec(&q.quad);
    let var = kernel.cov_radial(0.0, &inner)?;
    if var == 0.0 {
        return Ok(0.0);
    }
    let region = q.region.scaled(lambda);
    let dmax = region.diameter();
    let mut points = vec![0.0, dmax];
    points.extend(decay_breakpoints(&q.variogram, 0.0, dmax)?);
    if region.shape == Shape::Square {
        points.push(region.scaled_size());
    }
    let pieces = pieces_from(&mut points);
    let outer = QuadSpec {
        abs_floor: q.quad.abs_floor.max(1e-15 * var.abs()),
        ..q.quad.clone()
    };
    let v = &q.variogram;
    integrate_fallible(
        |h| {
            let f = region.distance_density(h)?;
            if f == 0.0 {
                return Ok(0.0);
            }
            let hr = v.eval_radial(h)?.sqrt();
            Ok(f * kernel.cov_radial(hr, &inner)?)
        },
        &pieces,
        &outer,
    )
}

/// `integral over R^2 of Cov(C(0), C(x)) dx`, computed radially.
///
/// The radial integral is truncated where the covariance falls below
/// `1e-12` of the variance; the truncation point is found by doubling.
pub fn asymptotic_cov_integral(p: &PowerSpec, v: &Variogram, spec: &QuadSpec) -> Result<f64> {
    spec.validate()?;
    if !v.is_isotropic() {
        return Err(Error::Unsupported(
            "the radial covariance integral needs an isotropic variogram".into(),
        ));
    }
    let psi = v.psi();
    if !(psi > 0.0 && psi <= 2.0) {
        return domain(format!("variogram exponent {psi} must lie in (0, 2]"));
    }
    p.check_second_moment()?;
    let kernel = CovKernel::new(p, p)?;
    let inner = inner_spec(spec);
    let var = kernel.cov_radial(0.0, &inner)?;
    if var == 0.0 {
        return Ok(0.0);
    }
    let cov_at = |h: f64| -> Result<f64> { kernel.cov_radial(v.eval_radial(h)?.sqrt(), &inner) };
    let mut cutoff = v.radial_inverse(1.0)?;
    let mut steps = 0;
    while cov_at(cutoff)?.abs() >= 1e-12 * var {
        cutoff *= 2.0;
        steps += 1;
        if steps > 200 {
            return Err(Error::NoConvergence {
                what: "covariance truncation search".into(),
                estimate: cutoff,
                error: f64::INFINITY,
            });
        }
    }
    let mut points = vec![0.0, cutoff];
    points.extend(decay_breakpoints(v, 0.0, cutoff)?);
    let pieces = pieces_from(&mut points);
    let outer = QuadSpec {
        abs_floor: spec.abs_floor.max(1e-15 * var * cutoff * cutoff),
        ..spec.clone()
    };
    let radial = integrate_fallible(|h| Ok(h * cov_at(h)?), &pieces, &outer)?;
    Ok(2.0 * std::f64::consts::PI * radial)
}

/// Normal approximation `N(mean, K / (lambda^2 |A|))` of the loss.
pub fn clt_approx(q: &RiskQuery, lambda: f64) -> Result<CltApprox> {
    check_lambda(lambda)?;
    q.region.validate()?;
    let k = asymptotic_cov_integral(&q.power, &q.variogram, &q.quad)?;
    Ok(CltApprox {
        mean: mean_cost(&q.power)?,
        variance: k / (lambda * lambda * q.region.area()),
    })
}

/// Asymptotic value-at-risk `mean + q_alpha sd`.
pub fn var_asymptotic(q: &RiskQuery, lambda: f64) -> Result<Asymptotic> {
    q.check_alpha()?;
    let clt = clt_approx(q, lambda)?;
    let warning =
        (q.alpha == 0.5).then(|| "alpha = 0.5: the order 1/lambda term vanishes".to_string());
    let correction = std_normal_quantile(q.alpha)? * clt.sd();
    Ok(Asymptotic {
        value: clt.mean + correction,
        mean: clt.mean,
        correction,
        warning,
    })
}

/// Asymptotic expected shortfall `mean + phi(q_alpha) / (1 - alpha) sd`.
pub fn es_asymptotic(q: &RiskQuery, lambda: f64) -> Result<Asymptotic> {
    q.check_alpha()?;
    let clt = clt_approx(q, lambda)?;
    let z = std_normal_quantile(q.alpha)?;
    let correction = std_normal_pdf(z) / (1.0 - q.alpha) * clt.sd();
    Ok(Asymptotic {
        value: clt.mean + correction,
        mean: clt.mean,
        correction,
        warning: None,
    })
}

/// Single-site variance, the small-region limit of [`r2`].
pub fn site_variance(p: &PowerSpec) -> Result<f64> {
    var_gev(p)
}
