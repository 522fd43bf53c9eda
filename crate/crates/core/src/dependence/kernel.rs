//! The covariance kernel shared by every dependence quantity.
//!
//! For exponents `(e1, e2)` with `s = e1 + e2`, the product moment of the
//! simple field at Husler-Reiss distance `h` is an integral over `theta` of
//! the `C1, C2, C3` coefficients. With `t = log(theta)` and the identities
//! `phi(b) = theta phi(a)`, the integrand becomes
//!
//! ```text
//! exp(t (1 - e1)) [Phi(a) Phi(b) S^(s-2) G(2-s) + phi(a) S^(s-1) G(1-s) / h]
//! S = e^t Phi(a) + Phi(b),   a = h/2 + t/h,   b = h/2 - t/h
//! ```
//!
//! and the independent limit `Phi = 1, phi = 0` integrates to
//! `G(1-e1) G(1-e2)` exactly. Subtracting that limit pointwise gives the
//! covariance directly, without cancelling two large numbers after
//! integration. All exponentials are regrouped so that every factor is
//! bounded by one.

use crate::error::{domain, Error, Result};
use crate::numerics::{gamma, integrate_pieces, ln_std_normal_cdf, Domain, QuadSpec};

use super::{
    cost_of_frechet, frechet_expectation, frechet_moment, gumbel_power_moment, Extrapolated,
    PowerSpec, H_ZERO_CUTOFF, XI_ZERO_EPS,
};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Extra absolute floor, relative to the magnitude of the expanded terms.
const FLOOR_REL: f64 = 1e-14;

#[derive(Debug, Clone)]
struct Group {
    s: f64,
    g1: f64,
    g2: f64,
}

#[derive(Debug, Clone)]
struct Pair {
    i: usize,
    j: usize,
    group: usize,
    weight: f64,
}

#[derive(Debug, Clone)]
struct Expanded {
    e1: Vec<f64>,
    e2: Vec<f64>,
    groups: Vec<Group>,
    pairs: Vec<Pair>,
    cov0: f64,
    mean1: f64,
    mean2: f64,
    scale: f64,
}

#[derive(Debug, Clone)]
enum Inner {
    Expanded(Expanded),
    XiZero {
        p1: PowerSpec,
        p2: PowerSpec,
        mean1: f64,
        mean2: f64,
    },
}

/// Precomputed covariance kernel for a pair of cost specifications.
///
/// Reusing one kernel across many distances avoids re-expanding the
/// binomial sums and re-evaluating the gamma factors.
#[derive(Debug, Clone)]
pub struct CovKernel {
    inner: Inner,
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn logaddexp(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

fn distinct_index(list: &mut Vec<f64>, v: f64) -> usize {
    match list
        .iter()
        .position(|&u| (u - v).abs() <= 1e-13 * u.abs().max(1.0))
    {
        Some(i) => i,
        None => {
            list.push(v);
            list.len() - 1
        }
    }
}

impl Expanded {
    fn new(p1: &PowerSpec, p2: &PowerSpec) -> Result<Self> {
        let t1 = p1.expansion()?;
        let t2 = p2.expansion()?;
        let mean = |terms: &[(f64, f64)]| -> Result<f64> {
            terms.iter().map(|&(c, e)| Ok(c * frechet_moment(e)?)).sum()
        };
        let (mean1, mean2) = (mean(&t1)?, mean(&t2)?);
        let mut e1 = Vec::new();
        let mut e2 = Vec::new();
        let mut svals = Vec::new();
        let mut groups: Vec<Group> = Vec::new();
        let mut pairs = Vec::new();
        let (mut cov0, mut scale) = (0.0, 0.0);
        for &(c1, x1) in &t1 {
            for &(c2, x2) in &t2 {
                // A zero exponent is a constant and contributes no covariance.
                if x1 == 0.0 || x2 == 0.0 || c1 == 0.0 || c2 == 0.0 {
                    continue;
                }
                let s = x1 + x2;
                let weight = c1 * c2;
                let indep = frechet_moment(x1)? * frechet_moment(x2)?;
                cov0 += weight * (gamma(1.0 - s)? - indep);
                scale += weight.abs() * indep;
                let i = distinct_index(&mut e1, x1);
                let j = distinct_index(&mut e2, x2);
                let group = distinct_index(&mut svals, s);
                if group == groups.len() {
                    groups.push(Group {
                        s,
                        g1: gamma(1.0 - s)?,
                        g2: gamma(2.0 - s)?,
                    });
                }
                pairs.push(Pair {
                    i,
                    j,
                    group,
                    weight,
                });
            }
        }
        Ok(Self {
            e1,
            e2,
            groups,
            pairs,
            cov0,
            mean1,
            mean2,
            scale,
        })
    }

    fn integrand(&self, h: f64, t: f64, u1: &mut [f64], v2: &mut [f64], amp: &mut [f64]) -> f64 {
        let a = 0.5 * h + t / h;
        let b = 0.5 * h - t / h;
        let lpa = ln_std_normal_cdf(a);
        let lpb = ln_std_normal_cdf(b);
        let lda = -0.5 * a * a - LN_SQRT_2PI;
        let sp_pos = softplus(t);
        let sp_neg = softplus(-t);
        let log_s = logaddexp(t + lpa, lpb);
        let d0 = (log_s - sp_pos).min(0.0);
        let p = lpa + lpb;
        let tail = sp_pos + lda - h.ln();
        for (u, &e) in u1.iter_mut().zip(&self.e1) {
            *u = (-(1.0 - e) * sp_neg).exp();
        }
        for (v, &e) in v2.iter_mut().zip(&self.e2) {
            *v = (-(1.0 - e) * sp_pos).exp();
        }
        for (m, g) in amp.iter_mut().zip(&self.groups) {
            let first = g.g2 * (p + (g.s - 2.0) * d0).exp_m1();
            let second = g.g1 * (tail + (g.s - 1.0) * d0).exp();
            *m = first + second;
        }
        self.pairs
            .iter()
            .map(|q| q.weight * u1[q.i] * v2[q.j] * amp[q.group])
            .sum()
    }

    fn cov(&self, h: f64, spec: &QuadSpec) -> Result<f64> {
        if h < H_ZERO_CUTOFF {
            return Ok(self.cov0);
        }
        if self.pairs.is_empty() {
            return Ok(0.0);
        }
        let mut u1 = vec![0.0; self.e1.len()];
        let mut v2 = vec![0.0; self.e2.len()];
        let mut amp = vec![0.0; self.groups.len()];
        // Breakpoints: the normal cdfs switch over a width of order h around
        // t = +-h^2/2, which for small h is a narrow spike around t = 0.
        let c = 0.5 * h * h + 6.0 * h + 1.0;
        let w = 0.5 * h * h + 8.0 * h;
        let mut pieces = vec![Domain::LowerTail(-c), Domain::UpperTail(c)];
        if w < c {
            pieces.extend([
                Domain::Finite(-c, -w),
                Domain::Finite(-w, 0.0),
                Domain::Finite(0.0, w),
                Domain::Finite(w, c),
            ]);
        } else {
            pieces.extend([Domain::Finite(-c, 0.0), Domain::Finite(0.0, c)]);
        }
        let local = QuadSpec {
            abs_floor: spec.abs_floor.max(FLOOR_REL * self.scale),
            ..spec.clone()
        };
        let r = integrate_pieces(
            |t| self.integrand(h, t, &mut u1, &mut v2, &mut amp),
            &pieces,
            &local,
        )
        .map_err(|e| match e {
            Error::NoConvergence {
                estimate, error, ..
            } => Error::NoConvergence {
                what: format!("covariance kernel at h = {h}"),
                estimate,
                error,
            },
            other => other,
        })?;
        Ok(r.value)
    }
}

impl CovKernel {
    /// Builds the kernel; both specifications must have finite second
    /// moments.
    pub fn new(p1: &PowerSpec, p2: &PowerSpec) -> Result<Self> {
        p1.check_second_moment()?;
        p2.check_second_moment()?;
        let inner = if p1.is_gumbel() || p2.is_gumbel() {
            let mean = |p: &PowerSpec| -> Result<f64> {
                if p.beta == 0.0 {
                    Ok(1.0)
                } else if p.is_gumbel() {
                    gumbel_power_moment(p, 1)
                } else {
                    super::moment(p)
                }
            };
            Inner::XiZero {
                p1: *p1,
                p2: *p2,
                mean1: mean(p1)?,
                mean2: mean(p2)?,
            }
        } else {
            Inner::Expanded(Expanded::new(p1, p2)?)
        };
        Ok(Self { inner })
    }

    /// `E[C1] E[C2]`, the large-distance limit of the product moment.
    pub fn means_product(&self) -> f64 {
        match &self.inner {
            Inner::Expanded(e) => e.mean1 * e.mean2,
            Inner::XiZero { mean1, mean2, .. } => mean1 * mean2,
        }
    }

    /// Covariance at Husler-Reiss distance `h = sqrt(gamma)`.
    pub fn cov_radial(&self, h: f64, spec: &QuadSpec) -> Result<f64> {
        if !(h >= 0.0) {
            return domain(format!("h = {h} must be >= 0"));
        }
        match &self.inner {
            Inner::Expanded(e) => e.cov(h, spec),
            Inner::XiZero {
                p1,
                p2,
                mean1,
                mean2,
            } => {
                if h < H_ZERO_CUTOFF {
                    let joint =
                        frechet_expectation(|z| cost_of_frechet(p1, z) * cost_of_frechet(p2, z))?;
                    Ok(joint - mean1 * mean2)
                } else {
                    Ok(xi_zero_cov(p1, p2, h, spec)?.value)
                }
            }
        }
    }
}

/// Symmetric-perturbation Richardson extrapolation to `xi = 0`.
///
/// Tries a short ladder of perturbation sizes: small sizes keep the
/// truncation error negligible, larger ones tame the cancellation in the
/// binomial expansion at high powers.
pub(super) fn xi_zero_cov(
    p1: &PowerSpec,
    p2: &PowerSpec,
    h: f64,
    spec: &QuadSpec,
) -> Result<Extrapolated> {
    let perturbed = |eps: f64| -> Result<f64> {
        let shift = |p: &PowerSpec, x: f64| if p.is_gumbel() { p.with_shape(x) } else { *p };
        let plus = CovKernel::new(&shift(p1, eps), &shift(p2, eps))?.cov_radial(h, spec)?;
        let minus = CovKernel::new(&shift(p1, -eps), &shift(p2, -eps))?.cov_radial(h, spec)?;
        Ok(0.5 * (plus + minus))
    };
    let tol = (30.0 * spec.rel_tol).max(1e-6);
    let mut best: Option<Extrapolated> = None;
    for eps in [XI_ZERO_EPS, 1e-3, 1e-2] {
        let (half, one, two) = (
            perturbed(0.5 * eps)?,
            perturbed(eps)?,
            perturbed(2.0 * eps)?,
        );
        let r1 = (4.0 * half - one) / 3.0;
        let r2 = (4.0 * one - two) / 3.0;
        let cand = Extrapolated {
            value: r1,
            error: (r1 - r2).abs(),
            eps,
        };
        if cand.error <= tol * cand.value.abs() {
            return Ok(cand);
        }
        if best.is_none_or(|b| cand.error < b.error) {
            best = Some(cand);
        }
    }
    let b = best.expect("ladder is non-empty");
    Err(Error::NoConvergence {
        what: "xi = 0 extrapolation".into(),
        estimate: b.value,
        error: b.error,
    })
}
