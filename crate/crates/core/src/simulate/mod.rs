//! Monte-Carlo simulation of max-stable fields and empirical estimators.
//!
//! Every replicate draws from its own ChaCha8 stream: the generator is
//! seeded with the user seed and switched to stream number `replicate`.
//! Replicates can therefore run in any order, on any number of threads,
//! and still produce bit-identical values.

mod dump;
mod estimators;
mod gaussian;
mod generators;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dependence::{GevParams, Margin};
use crate::error::{domain, Result};
use crate::geometry::Region;

pub use dump::{read_samples, write_samples, DUMP_MAGIC, DUMP_VERSION};
pub use estimators::{
    ks_normal, ks_two_sample, ks_uniform, mc_normalized_loss, mc_normalized_loss_with, mc_risk,
    mc_risk_with, Bootstrap, KsResult, LossOptions, McEstimate, RiskMeasure,
};
pub use gaussian::{gaussian_increment_field, IncrementFactor};
pub use generators::{
    simulate_brown_resnick, simulate_schlather, simulate_smith, simulate_tube, BrMethod,
    Correlation,
};

/// A regular rectangular grid of points `origin + (i, j) * spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
}

impl Grid {
    pub fn new(origin: [f64; 2], nx: usize, ny: usize, spacing: f64) -> Result<Self> {
        let g = Self {
            origin,
            nx,
            ny,
            spacing,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return domain("grid needs at least one point in each direction");
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return domain(format!("grid spacing {} must be positive", self.spacing));
        }
        if !(self.origin[0].is_finite() && self.origin[1].is_finite()) {
            return domain("grid origin must be finite");
        }
        if self
            .nx
            .checked_mul(self.ny)
            .is_none_or(|n| n > u32::MAX as usize)
        {
            return domain("grid is too large");
        }
        Ok(())
    }

    /// A grid of cell centers covering the region's bounding box with
    /// `cells_across` cells along its diameter.
    pub fn covering(region: &Region, cells_across: usize) -> Result<Self> {
        region.validate()?;
        if cells_across == 0 {
            return domain("cells_across must be positive");
        }
        let spacing = region.diameter() / cells_across as f64;
        let [x0, y0, x1, y1] = region.bounding_box();
        let nx = ((x1 - x0) / spacing - 1e-9).ceil().max(1.0) as usize;
        let ny = ((y1 - y0) / spacing - 1e-9).ceil().max(1.0) as usize;
        let cx = 0.5 * (x0 + x1) - 0.5 * (nx - 1) as f64 * spacing;
        let cy = 0.5 * (y0 + y1) - 0.5 * (ny - 1) as f64 * spacing;
        Self::new([cx, cy], nx, ny, spacing)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major linear index of `(ix, iy)`.
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.nx, index / self.nx)
    }

    pub fn point(&self, index: usize) -> [f64; 2] {
        let (ix, iy) = self.coords(index);
        [
            self.origin[0] + ix as f64 * self.spacing,
            self.origin[1] + iy as f64 * self.spacing,
        ]
    }
}

/// A subset of grid points on which fields are simulated.
#[derive(Debug, Clone, PartialEq)]
pub struct Sites {
    grid: Grid,
    index: Arc<Vec<u32>>,
}

impl Sites {
    pub fn full(grid: Grid) -> Self {
        Self {
            index: Arc::new((0..grid.len() as u32).collect()),
            grid,
        }
    }

    /// Grid points lying inside the region.
    pub fn within(grid: Grid, region: &Region) -> Result<Self> {
        grid.validate()?;
        let index: Vec<u32> = (0..grid.len())
            .filter(|&i| region.contains(grid.point(i)))
            .map(|i| i as u32)
            .collect();
        if index.is_empty() {
            return domain("no grid point lies inside the region");
        }
        Ok(Self {
            grid,
            index: Arc::new(index),
        })
    }

    /// An explicit list of grid indices, sorted and deduplicated.
    pub fn from_indices(grid: Grid, mut index: Vec<u32>) -> Result<Self> {
        grid.validate()?;
        index.sort_unstable();
        index.dedup();
        if index.is_empty() || index.last().is_some_and(|&i| i as usize >= grid.len()) {
            return domain("site indices must be non-empty and inside the grid");
        }
        Ok(Self {
            grid,
            index: Arc::new(index),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn indices(&self) -> &[u32] {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn point(&self, k: usize) -> [f64; 2] {
        self.grid.point(self.index[k] as usize)
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    fn shares_storage(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.index, &other.index) || self == other
    }
}

impl From<Grid> for Sites {
    fn from(grid: Grid) -> Self {
        Self::full(grid)
    }
}

/// Diagnostics of an approximate generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// Spectral functions used.
    pub functions: usize,
    /// Fraction of sites (or draws) that are not certified exact; see the
    /// generator documentation.
    pub unresolved: f64,
}

/// One simulated replicate on a set of sites.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub sites: Sites,
    /// One value per site, in the order of `sites.indices()`.
    pub values: Vec<f64>,
    pub margin: Margin,
    pub seed: u64,
    pub replicate: u64,
    pub truncation: Option<Truncation>,
}

impl FieldSample {
    pub fn grid(&self) -> &Grid {
        self.sites.grid()
    }

    /// Value at grid point `(ix, iy)` if it is one of the sites.
    pub fn value_at(&self, ix: usize, iy: usize) -> Option<f64> {
        let i = self.grid().index(ix, iy) as u32;
        self.sites
            .indices()
            .binary_search(&i)
            .ok()
            .map(|k| self.values[k])
    }
}

/// The generator for replicate `replicate` of a run seeded with `seed`.
pub fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// Maps a simple-margin sample to GEV margins.
pub fn gev_transform(s: &FieldSample, p: &GevParams) -> Result<FieldSample> {
    p.validate()?;
    if s.margin != Margin::Simple {
        return domain("gev_transform needs a simple-margin sample");
    }
    Ok(FieldSample {
        values: s.values.iter().map(|&z| p.from_frechet(z)).collect(),
        margin: Margin::Gev(*p),
        ..s.clone()
    })
}
