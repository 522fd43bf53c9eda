//! Disks and squares, their homothetic scaling and the density of the
//! distance between two independent uniform points.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// Disk of radius `r`.
    Disk,
    /// Square of side `r`.
    Square,
}

fn one() -> f64 {
    1.0
}

/// A disk or square of size `r`, dilated by `lambda` about its center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub shape: Shape,
    pub r: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default)]
    pub center: [f64; 2],
}

impl Region {
    pub fn new(shape: Shape, r: f64, lambda: f64) -> Result<Self> {
        let region = Self {
            shape,
            r,
            lambda,
            center: [0.0, 0.0],
        };
        region.validate()?;
        Ok(region)
    }

    pub fn disk(r: f64) -> Result<Self> {
        Self::new(Shape::Disk, r, 1.0)
    }

    pub fn square(r: f64) -> Result<Self> {
        Self::new(Shape::Square, r, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return domain(format!("region size {} must be positive", self.r));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return domain(format!("homothety ratio {} must be positive", self.lambda));
        }
        if !(self.center[0].is_finite() && self.center[1].is_finite()) {
            return domain("region center must be finite");
        }
        Ok(())
    }

    /// The same region dilated by a further factor.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            lambda: self.lambda * factor,
            ..*self
        }
    }

    pub fn translated(&self, v: [f64; 2]) -> Self {
        Self {
            center: [self.center[0] + v[0], self.center[1] + v[1]],
            ..*self
        }
    }

    /// Linear size after dilation.
    pub fn scaled_size(&self) -> f64 {
        self.r * self.lambda
    }

    pub fn area(&self) -> f64 {
        let s = self.scaled_size();
        match self.shape {
            Shape::Disk => PI * s * s,
            Shape::Square => s * s,
        }
    }

    /// Largest distance between two points of the region.
    pub fn diameter(&self) -> f64 {
        let s = self.scaled_size();
        match self.shape {
            Shape::Disk => 2.0 * s,
            Shape::Square => std::f64::consts::SQRT_2 * s,
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let s = self.scaled_size();
        match self.shape {
            Shape::Disk => dx * dx + dy * dy <= s * s,
            Shape::Square => dx.abs() <= 0.5 * s && dy.abs() <= 0.5 * s,
        }
    }

    /// Axis-aligned bounding box `[xmin, ymin, xmax, ymax]`.
    pub fn bounding_box(&self) -> [f64; 4] {
        let half = match self.shape {
            Shape::Disk => self.scaled_size(),
            Shape::Square => 0.5 * self.scaled_size(),
        };
        let [cx, cy] = self.center;
        [cx - half, cy - half, cx + half, cy + half]
    }

    /// Density of the distance between two independent uniform points of
    /// the dilated region.
    pub fn distance_density(&self, h: f64) -> Result<f64> {
        let s = self.scaled_size();
        match self.shape {
            Shape::Disk => disk_distance_density(h, s),
            Shape::Square => square_distance_density(h, s),
        }
    }
}

pub fn area(region: &Region) -> f64 {
    region.area()
}

fn check(h: f64, r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return domain(format!("size {r} must be positive"));
    }
    if !(h >= 0.0) {
        return domain(format!("distance {h} must be >= 0"));
    }
    Ok(())
}

/// Distance density for a disk of radius `r`; zero beyond `2r`.
pub fn disk_distance_density(h: f64, r: f64) -> Result<f64> {
    check(h, r)?;
    if h >= 2.0 * r {
        return Ok(0.0);
    }
    let x = h / (2.0 * r);
    Ok(2.0 * h / (r * r) * (2.0 / PI * x.acos() - h / (PI * r) * (1.0 - x * x).sqrt()))
}

/// Distance density for a square of side `r`; zero beyond `r sqrt(2)`.
pub fn square_distance_density(h: f64, r: f64) -> Result<f64> {
    check(h, r)?;
    if h <= r {
        return Ok(square_inner_branch(h, r));
    }
    if h >= std::f64::consts::SQRT_2 * r {
        return Ok(0.0);
    }
    Ok(square_outer_branch(h, r).max(0.0))
}

/// The polynomial expression of the square density, exact for `h <= r`.
pub fn square_inner_branch(h: f64, r: f64) -> f64 {
    let (r2, r3, r4) = (r * r, r * r * r, r * r * r * r);
    2.0 * PI * h / r2 - 8.0 * h * h / r3 + 2.0 * h * h * h / r4
}

/// The expression of the square density for `r <= h <= r sqrt(2)`.
///
/// The textbook bracket contains `(b+1)/sqrt(b-1)` and
/// `-4 / (b sqrt(1 - (2-b)^2/b^2))` with `b = h^2/r^2`, both singular at
/// `b = 1`. Since `b sqrt(1 - (2-b)^2/b^2) = 2 sqrt(b-1)`, their sum is
/// exactly `sqrt(b-1)`, which is what is evaluated here. Returns NaN for
/// `h < r`.
pub fn square_outer_branch(h: f64, r: f64) -> f64 {
    let b = (h / r) * (h / r);
    let bracket = -2.0 - b + 4.0 * (b - 1.0).sqrt() + 2.0 * ((2.0 - b) / b).min(1.0).asin();
    bracket * 2.0 * h / (r * r)
}
