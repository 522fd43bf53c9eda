//! Variograms of Gaussian fields with stationary increments.
//!
//! Four families are supported: the power law in its two equivalent
//! parametrizations, the quadratic form behind the Smith model, and an
//! anisotropic power law `m * ||x||_S^psi` with `||x||_S^2 = x' S^-1 x`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Symmetric 2x2 matrix stored as `[[a, b], [b, c]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sym2(pub [[f64; 2]; 2]);

impl Sym2 {
    pub fn identity() -> Self {
        Sym2([[1.0, 0.0], [0.0, 1.0]])
    }

    pub fn scaled_identity(c: f64) -> Self {
        Sym2([[c, 0.0], [0.0, c]])
    }

    pub fn eigenvalues(&self) -> (f64, f64) {
        let [[a, b], [_, c]] = self.0;
        let mid = 0.5 * (a + c);
        let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        (mid - rad, mid + rad)
    }

    pub fn det(&self) -> f64 {
        let [[a, b], [_, c]] = self.0;
        a * c - b * b
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.0;
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return domain("matrix entries must be finite");
        }
        if (m[0][1] - m[1][0]).abs() > 1e-12 * (m[0][1].abs() + m[1][0].abs()).max(1.0) {
            return domain("matrix must be symmetric");
        }
        let (lo, hi) = self.eigenvalues();
        if lo <= 1e-10 * hi.abs().max(1.0) {
            return domain(format!(
                "matrix is not positive definite (eigenvalues {lo}, {hi})"
            ));
        }
        Ok(())
    }

    /// `x' S^-1 x`.
    pub fn inv_quad(&self, x: [f64; 2]) -> f64 {
        let [[a, b], [_, c]] = self.0;
        (c * x[0] * x[0] - 2.0 * b * x[0] * x[1] + a * x[1] * x[1]) / self.det()
    }

    /// `Some(c)` when the matrix equals `c * I`.
    pub fn isotropic_scale(&self) -> Option<f64> {
        let [[a, b], [_, c]] = self.0;
        (b == 0.0 && a == c).then_some(a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawVariogram {
    Power { kappa: f64, psi: f64 },
    PowerM { m: f64, psi: f64 },
    QuadraticForm { sigma: Sym2 },
    AnisotropicPower { m: f64, sigma: Sym2, psi: f64 },
}

/// A validated variogram. Construct through the associated functions or by
/// deserializing, both of which reject invalid parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawVariogram", into = "RawVariogram")]
pub struct Variogram(RawVariogram);

impl TryFrom<RawVariogram> for Variogram {
    type Error = Error;

    fn try_from(raw: RawVariogram) -> Result<Self> {
        let check_psi = |psi: f64| {
            if psi > 0.0 && psi <= 2.0 {
                Ok(())
            } else {
                domain(format!("psi = {psi} outside (0, 2]"))
            }
        };
        let check_pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                domain(format!("{name} = {v} must be positive"))
            }
        };
        match raw {
            RawVariogram::Power { kappa, psi } => {
                check_pos("kappa", kappa)?;
                check_psi(psi)?;
            }
            RawVariogram::PowerM { m, psi } => {
                check_pos("m", m)?;
                check_psi(psi)?;
            }
            RawVariogram::QuadraticForm { sigma } => sigma.validate()?,
            RawVariogram::AnisotropicPower { m, sigma, psi } => {
                check_pos("m", m)?;
                check_psi(psi)?;
                sigma.validate()?;
            }
        }
        Ok(Variogram(raw))
    }
}

impl From<Variogram> for RawVariogram {
    fn from(v: Variogram) -> Self {
        v.0
    }
}

impl Variogram {
    /// `(||x|| / kappa)^psi`.
    pub fn power(kappa: f64, psi: f64) -> Result<Self> {
        RawVariogram::Power { kappa, psi }.try_into()
    }

    /// `m * ||x||^psi`.
    pub fn power_m(m: f64, psi: f64) -> Result<Self> {
        RawVariogram::PowerM { m, psi }.try_into()
    }

    /// `x' S^-1 x`.
    pub fn quadratic_form(sigma: Sym2) -> Result<Self> {
        RawVariogram::QuadraticForm { sigma }.try_into()
    }

    /// `m * (x' S^-1 x)^(psi / 2)`.
    pub fn anisotropic_power(m: f64, sigma: Sym2, psi: f64) -> Result<Self> {
        RawVariogram::AnisotropicPower { m, sigma, psi }.try_into()
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match self.0 {
            RawVariogram::Power { kappa, psi } => (x[0].hypot(x[1]) / kappa).powf(psi),
            RawVariogram::PowerM { m, psi } => m * x[0].hypot(x[1]).powf(psi),
            RawVariogram::QuadraticForm { sigma } => sigma.inv_quad(x),
            RawVariogram::AnisotropicPower { m, sigma, psi } => {
                m * sigma.inv_quad(x).powf(0.5 * psi)
            }
        }
    }

    pub fn is_isotropic(&self) -> bool {
        match self.0 {
            RawVariogram::Power { .. } | RawVariogram::PowerM { .. } => true,
            RawVariogram::QuadraticForm { sigma }
            | RawVariogram::AnisotropicPower { sigma, .. } => sigma.isotropic_scale().is_some(),
        }
    }

    /// The radial profile `gamma_u(h)` of an isotropic variogram.
    pub fn eval_radial(&self, h: f64) -> Result<f64> {
        if !(h >= 0.0) {
            return domain(format!("distance {h} must be >= 0"));
        }
        if !self.is_isotropic() {
            return Err(Error::Unsupported(
                "radial evaluation of an anisotropic variogram".into(),
            ));
        }
        Ok(self.eval([h, 0.0]))
    }

    /// Smoothness exponent (2 for the quadratic form).
    pub fn psi(&self) -> f64 {
        match self.0 {
            RawVariogram::Power { psi, .. }
            | RawVariogram::PowerM { psi, .. }
            | RawVariogram::AnisotropicPower { psi, .. } => psi,
            RawVariogram::QuadraticForm { .. } => 2.0,
        }
    }

    /// Radial distance at which an isotropic variogram reaches `gamma`.
    pub fn radial_inverse(&self, gamma: f64) -> Result<f64> {
        if !(gamma >= 0.0) {
            return domain(format!("variogram value {gamma} must be >= 0"));
        }
        let unit = self.eval_radial(1.0)?;
        Ok((gamma / unit).powf(1.0 / self.psi()))
    }
}
