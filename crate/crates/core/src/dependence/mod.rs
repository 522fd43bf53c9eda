//! Moments, covariances and correlations of powers of Brown-Resnick fields.
//!
//! Every quantity depends on the two sites only through the Husler-Reiss
//! distance `h = sqrt(gamma_W(x2 - x1))`. For GEV margins the power
//! `Z^beta` is expanded binomially into a finite sum of powers of the
//! underlying simple field, so all covariances reduce to one kernel integral
//! over pairs of exponents (see [`CovKernel`]).

mod kernel;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{
    binomial, gamma, integrate, std_normal_cdf, std_normal_pdf, Domain, QuadSpec,
};
use crate::variogram::Variogram;

pub use kernel::CovKernel;

/// Below this Husler-Reiss distance the `h = 0` closed form is used.
pub const H_ZERO_CUTOFF: f64 = 1e-6;

/// Half-width of the symmetric shape perturbation used at `xi = 0`.
pub const XI_ZERO_EPS: f64 = 1e-4;

/// Marginal GEV parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    /// Location (eta).
    pub location: f64,
    /// Scale (tau), strictly positive.
    pub scale: f64,
    /// Shape (xi); zero is the Gumbel case.
    pub shape: f64,
}

impl GevParams {
    pub fn new(location: f64, scale: f64, shape: f64) -> Result<Self> {
        let p = Self {
            location,
            scale,
            shape,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return domain(format!("GEV scale {} must be positive", self.scale));
        }
        if !(self.location.is_finite() && self.shape.is_finite()) {
            return domain("GEV location and shape must be finite");
        }
        Ok(())
    }

    /// Maps a standard Frechet value to this GEV margin.
    pub fn from_frechet(&self, z: f64) -> f64 {
        let GevParams {
            location: eta,
            scale: tau,
            shape: xi,
        } = *self;
        if xi == 0.0 {
            eta + tau * z.ln()
        } else {
            (eta - tau / xi) + tau * z.powf(xi) / xi
        }
    }

    /// Finite upper endpoint `eta - tau / xi` when `xi < 0`.
    pub fn upper_endpoint(&self) -> Option<f64> {
        (self.shape < 0.0).then(|| self.location - self.scale / self.shape)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Margin {
    /// Standard Frechet margins.
    Simple,
    Gev(GevParams),
}

/// The cost `Z(x)^beta` at one site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSpec {
    pub beta: f64,
    pub margin: Margin,
}

impl PowerSpec {
    /// Simple margins; any real exponent is accepted here and the moment
    /// conditions are checked by each operation.
    pub fn simple(beta: f64) -> Result<Self> {
        if !beta.is_finite() {
            return domain("beta must be finite");
        }
        Ok(Self {
            beta,
            margin: Margin::Simple,
        })
    }

    /// GEV margins with a non-negative integer exponent (zero is the
    /// degenerate constant cost).
    pub fn gev(beta: u32, params: GevParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            beta: f64::from(beta),
            margin: Margin::Gev(params),
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self.margin {
            Margin::Simple => {
                if !self.beta.is_finite() {
                    return domain("beta must be finite");
                }
            }
            Margin::Gev(g) => {
                g.validate()?;
                if !(self.beta >= 0.0 && self.beta == self.beta.round() && self.beta <= 64.0) {
                    return domain(format!(
                        "GEV mode needs an integer beta in 0..=64, got {}",
                        self.beta
                    ));
                }
            }
        }
        Ok(())
    }

    /// `beta * xi` (gev) or `beta` (simple): the moment-condition exponent.
    fn tail_exponent(&self) -> f64 {
        match self.margin {
            Margin::Simple => self.beta,
            Margin::Gev(g) => self.beta * g.shape,
        }
    }

    pub fn check_first_moment(&self) -> Result<()> {
        self.validate()?;
        let e = self.tail_exponent();
        if e < 1.0 {
            Ok(())
        } else {
            domain(format!(
                "first moment needs beta*xi < 1 (or beta < 1), got {e}"
            ))
        }
    }

    pub fn check_second_moment(&self) -> Result<()> {
        self.validate()?;
        let e = self.tail_exponent();
        if e < 0.5 {
            Ok(())
        } else {
            domain(format!(
                "second moment needs beta*xi < 1/2 (or beta < 1/2), got {e}"
            ))
        }
    }

    pub(crate) fn gev_params(&self) -> Option<GevParams> {
        match self.margin {
            Margin::Gev(g) => Some(g),
            Margin::Simple => None,
        }
    }

    pub(crate) fn integer_beta(&self) -> u32 {
        self.beta as u32
    }

    /// Binomial expansion of the cost as `sum c_k * Zs^e_k` over powers of
    /// the simple field. Requires `xi != 0` in GEV mode.
    pub(crate) fn expansion(&self) -> Result<Vec<(f64, f64)>> {
        self.validate()?;
        match self.margin {
            Margin::Simple => Ok(vec![(1.0, self.beta)]),
            Margin::Gev(g) => {
                if g.shape == 0.0 {
                    return Err(Error::Unsupported("binomial expansion at xi = 0".into()));
                }
                let beta = self.integer_beta();
                let lead = g.location - g.scale / g.shape;
                let ratio = g.scale / g.shape;
                Ok((0..=beta)
                    .map(|k| {
                        let c =
                            binomial(beta, k) * lead.powi(k as i32) * ratio.powi((beta - k) as i32);
                        (c, f64::from(beta - k) * g.shape)
                    })
                    .collect())
            }
        }
    }

    fn with_shape(&self, shape: f64) -> Self {
        match self.margin {
            Margin::Gev(g) => Self {
                beta: self.beta,
                margin: Margin::Gev(GevParams { shape, ..g }),
            },
            Margin::Simple => *self,
        }
    }

    fn is_gumbel(&self) -> bool {
        matches!(self.margin, Margin::Gev(g) if g.shape == 0.0)
    }
}

/// The kernel coefficients `C1, C2, C3` at `(theta, h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateCoeffs {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

/// Kernel coefficients evaluated from their defining expressions.
pub fn bivariate_coeffs(theta: f64, h: f64) -> Result<BivariateCoeffs> {
    if !(theta > 0.0 && theta.is_finite()) {
        return domain(format!("theta = {theta} must be positive"));
    }
    if !(h > 0.0 && h.is_finite()) {
        return domain(format!("h = {h} must be positive"));
    }
    let l = theta.ln();
    let a = h / 2.0 + l / h;
    let b = h / 2.0 - l / h;
    let (pa, pb) = (std_normal_cdf(a), std_normal_cdf(b));
    let (da, db) = (std_normal_pdf(a), std_normal_pdf(b));
    let c1 = pa + pb / theta;
    let left = pa + da / h - db / (h * theta);
    let right = pb / (theta * theta) + db / (h * theta * theta) - da / (h * theta);
    let c2 = left * right;
    let c3 = b * da / (h * h * theta) + a * db / (h * h * theta * theta);
    Ok(BivariateCoeffs { c1, c2, c3 })
}

/// `E[Zs^p]` for a standard Frechet variable; finite for `p < 1`.
pub fn frechet_moment(p: f64) -> Result<f64> {
    if p >= 1.0 {
        return domain(format!("Frechet moment of order {p} is infinite"));
    }
    gamma(1.0 - p)
}

/// `E[Zs(x1)^beta1 Zs(x2)^beta2]` for the simple field at Husler-Reiss
/// distance `h`.
pub fn g_simple(beta1: f64, beta2: f64, h: f64, spec: &QuadSpec) -> Result<f64> {
    if !(h >= 0.0) {
        return domain(format!("h = {h} must be >= 0"));
    }
    for b in [beta1, beta2] {
        if !(b < 0.5) {
            return domain(format!("simple-margin exponent {b} must be < 1/2"));
        }
    }
    let k = CovKernel::new(&PowerSpec::simple(beta1)?, &PowerSpec::simple(beta2)?)?;
    Ok(k.means_product() + k.cov_radial(h, spec)?)
}

fn hr_distance(v: &Variogram, x1: [f64; 2], x2: [f64; 2]) -> f64 {
    v.eval([x2[0] - x1[0], x2[1] - x1[1]]).max(0.0).sqrt()
}

/// `Cov(Zs(x1)^beta1, Zs(x2)^beta2)` for a simple Brown-Resnick field.
pub fn cov_simple(
    beta1: f64,
    beta2: f64,
    v: &Variogram,
    x1: [f64; 2],
    x2: [f64; 2],
    spec: &QuadSpec,
) -> Result<f64> {
    for b in [beta1, beta2] {
        if !(b < 0.5) {
            return domain(format!("simple-margin exponent {b} must be < 1/2"));
        }
    }
    CovKernel::new(&PowerSpec::simple(beta1)?, &PowerSpec::simple(beta2)?)?
        .cov_radial(hr_distance(v, x1, x2), spec)
}

/// Coefficient of `g_simple((beta-k1) xi, (beta-k2) xi)` in the GEV
/// expansion of `E[Z(x1)^beta Z(x2)^beta]`.
pub fn b_coeff(k1: u32, k2: u32, p: &PowerSpec) -> Result<f64> {
    p.validate()?;
    let Some(g) = p.gev_params() else {
        return domain("b_coeff needs GEV margins");
    };
    let beta = p.integer_beta();
    if k1 > beta || k2 > beta {
        return domain(format!("indices ({k1}, {k2}) exceed beta = {beta}"));
    }
    if g.shape == 0.0 {
        return domain("b_coeff is undefined at xi = 0");
    }
    let lead = g.location - g.scale / g.shape;
    let ratio = g.scale / g.shape;
    let side = |k: u32| binomial(beta, k) * lead.powi(k as i32) * ratio.powi((beta - k) as i32);
    Ok(side(k1) * side(k2))
}

/// `E[Z(x1)^beta Z(x2)^beta]` for GEV margins at Husler-Reiss distance `h`.
pub fn g_gev(p: &PowerSpec, h: f64, spec: &QuadSpec) -> Result<f64> {
    if p.gev_params().is_none() {
        return domain("g_gev needs GEV margins");
    }
    p.check_second_moment()?;
    if !(h >= 0.0) {
        return domain(format!("h = {h} must be >= 0"));
    }
    let k = CovKernel::new(p, p)?;
    Ok(k.means_product() + k.cov_radial(h, spec)?)
}

/// `Cov(Z(x1)^beta1, Z(x2)^beta2)`; the two sites may carry different
/// margins and exponents. A zero shape is handled by extrapolation.
pub fn cov_gev(
    p1: &PowerSpec,
    p2: &PowerSpec,
    v: &Variogram,
    x1: [f64; 2],
    x2: [f64; 2],
    spec: &QuadSpec,
) -> Result<f64> {
    CovKernel::new(p1, p2)?.cov_radial(hr_distance(v, x1, x2), spec)
}

/// `E[Z^beta]` at a single site.
pub fn moment(p: &PowerSpec) -> Result<f64> {
    p.check_first_moment()?;
    if p.beta == 0.0 {
        return Ok(1.0);
    }
    if p.is_gumbel() {
        return gumbel_power_moment(p, 1);
    }
    p.expansion()?
        .iter()
        .map(|&(c, e)| Ok(c * frechet_moment(e)?))
        .sum()
}

/// `Var(Z^beta)` at a single site.
pub fn var_gev(p: &PowerSpec) -> Result<f64> {
    p.check_second_moment()?;
    if p.beta == 0.0 {
        return Ok(0.0);
    }
    if p.is_gumbel() {
        let m1 = gumbel_power_moment(p, 1)?;
        let m2 = gumbel_power_moment(p, 2)?;
        return Ok(m2 - m1 * m1);
    }
    CovKernel::new(p, p)?.cov_radial(0.0, &QuadSpec::default())
}

/// The cost `C = Z^beta` as a function of the underlying standard Frechet
/// value.
pub fn cost_of_frechet(p: &PowerSpec, z: f64) -> f64 {
    let base = match p.margin {
        Margin::Simple => z,
        Margin::Gev(g) => g.from_frechet(z),
    };
    if p.margin == Margin::Simple {
        base.powf(p.beta)
    } else {
        base.powi(p.integer_beta() as i32)
    }
}

/// `E[f(Zs)]` for a standard Frechet `Zs`, integrating over `G = log Zs`.
pub(crate) fn frechet_expectation<F: Fn(f64) -> f64>(f: F) -> Result<f64> {
    let spec = QuadSpec::default().with_rel_tol(1e-12);
    let integrand = |g: f64| {
        let w = (-g - (-g).exp()).exp();
        if w == 0.0 {
            0.0
        } else {
            f(g.exp()) * w
        }
    };
    Ok(integrate(integrand, Domain::WholeLine, &spec)?.value)
}

/// `E[C^order]` for a Gumbel-margin cost.
fn gumbel_power_moment(p: &PowerSpec, order: i32) -> Result<f64> {
    frechet_expectation(|z| cost_of_frechet(p, z).powi(order))
}

/// Correlation of `Z(x1)^beta` and `Z(x2)^beta`.
pub fn dep_measure(
    p: &PowerSpec,
    v: &Variogram,
    x1: [f64; 2],
    x2: [f64; 2],
    spec: &QuadSpec,
) -> Result<f64> {
    let gamma_value = v.eval([x2[0] - x1[0], x2[1] - x1[1]]);
    dep_measure_radial(p, gamma_value, spec)
}

/// [`dep_measure`] keyed by the variogram value `gamma_W(x2 - x1)`.
pub fn dep_measure_radial(p: &PowerSpec, gamma_value: f64, spec: &QuadSpec) -> Result<f64> {
    if !(gamma_value >= 0.0) {
        return domain(format!("variogram value {gamma_value} must be >= 0"));
    }
    let k = CovKernel::new(p, p)?;
    let var = k.cov_radial(0.0, spec)?;
    if !(var > 0.0) {
        return domain("dependence measure needs a positive variance");
    }
    Ok(k.cov_radial(gamma_value.sqrt(), spec)? / var)
}

/// A value obtained by extrapolation together with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolated {
    pub value: f64,
    pub error: f64,
    /// Perturbation size that produced the accepted estimate.
    pub eps: f64,
}

/// Gumbel-margin covariance of `Z^beta` at two sites, obtained as the
/// common limit of the `xi = +-eps` covariances.
pub fn cov_gev_xi_zero(
    beta: u32,
    eta: f64,
    tau: f64,
    v: &Variogram,
    x1: [f64; 2],
    x2: [f64; 2],
    spec: &QuadSpec,
) -> Result<Extrapolated> {
    let p = PowerSpec::gev(beta, GevParams::new(eta, tau, 0.0)?)?;
    kernel::xi_zero_cov(&p, &p, hr_distance(v, x1, x2), spec)
}

/// Pairwise extremal coefficient `2 Phi(sqrt(gamma) / 2)`.
pub fn extremal_coefficient(v: &Variogram, x1: [f64; 2], x2: [f64; 2]) -> f64 {
    2.0 * std_normal_cdf(hr_distance(v, x1, x2) / 2.0)
}
