use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dependence::Margin;
use crate::error::{domain, Result};
use crate::variogram::{Sym2, Variogram};

use super::gaussian::IncrementFactor;
use super::{replicate_rng, FieldSample, Grid, Sites, Truncation};

/// Gaussian draws are produced this many at a time with one matrix product.
const BATCH: usize = 32;

/// Gaussian storm shapes are cut off this many standard deviations out.
const SMITH_RADIUS_SD: f64 = 5.0;

/// Schlather spectral functions are assumed to stay below this many
/// standard deviations in the stopping rule.
const SCHLATHER_BOUND_SD: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BrMethod {
    /// Exact simulation with extremal functions.
    ExtremalFunctions,
    /// The first `n_points` points of the spectral representation, each
    /// spectral function anchored at a uniformly chosen site.
    TruncatedSpectral { n_points: usize },
}

/// Stationary isotropic correlation functions for the Schlather model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Correlation {
    /// `exp(-h / range)`
    Exponential { range: f64 },
    /// `exp(-(h / range)^2)`
    Gaussian { range: f64 },
}

impl Correlation {
    pub fn eval(&self, h: f64) -> f64 {
        match *self {
            Correlation::Exponential { range } => (-h / range).exp(),
            Correlation::Gaussian { range } => (-(h / range).powi(2)).exp(),
        }
    }

    fn validate(&self) -> Result<()> {
        let (Correlation::Exponential { range } | Correlation::Gaussian { range }) = *self;
        if range > 0.0 && range.is_finite() {
            Ok(())
        } else {
            domain(format!("correlation range {range} must be positive"))
        }
    }
}

fn check_run(sites: &Sites, n_rep: usize) -> Result<()> {
    sites.grid().validate()?;
    if n_rep == 0 {
        return domain("n_rep must be positive");
    }
    Ok(())
}

fn run<F>(sites: &Sites, n_rep: usize, seed: u64, one: F) -> Result<Vec<FieldSample>>
where
    F: Fn(&mut ChaCha8Rng) -> (Vec<f64>, Option<Truncation>) + Sync,
{
    Ok((0..n_rep as u64)
        .into_par_iter()
        .map(|r| {
            let (values, truncation) = one(&mut replicate_rng(seed, r));
            FieldSample {
                sites: sites.clone(),
                values,
                margin: Margin::Simple,
                seed,
                replicate: r,
                truncation,
            }
        })
        .collect())
}

/// Variogram values at every grid offset between two sites.
struct OffsetTable {
    width: usize,
    ny: usize,
    nx: usize,
    half: Vec<f64>,
    coords: Vec<(usize, usize)>,
}

impl OffsetTable {
    fn new(v: &Variogram, sites: &Sites) -> Self {
        let g = sites.grid();
        let (nx, ny) = (g.nx, g.ny);
        let width = 2 * nx - 1;
        let mut half = vec![0.0; width * (2 * ny - 1)];
        for dy in 0..2 * ny - 1 {
            for dx in 0..width {
                let off = [
                    (dx as f64 - (nx - 1) as f64) * g.spacing,
                    (dy as f64 - (ny - 1) as f64) * g.spacing,
                ];
                half[dy * width + dx] = 0.5 * v.eval(off);
            }
        }
        let coords = sites
            .indices()
            .iter()
            .map(|&i| g.coords(i as usize))
            .collect();
        Self {
            width,
            ny,
            nx,
            half,
            coords,
        }
    }

    /// `gamma(x_i - x_j) / 2`.
    #[inline]
    fn half_gamma(&self, i: usize, j: usize) -> f64 {
        let (xi, yi) = self.coords[i];
        let (xj, yj) = self.coords[j];
        let dx = xi + self.nx - 1 - xj;
        let dy = yi + self.ny - 1 - yj;
        self.half[dy * self.width + dx]
    }
}

/// Site closest to the centroid; anchoring the increment field there keeps
/// its variances small.
fn central_site(sites: &Sites) -> [f64; 2] {
    let pts = sites.points();
    let n = pts.len() as f64;
    let c = pts
        .iter()
        .fold([0.0, 0.0], |a, p| [a[0] + p[0] / n, a[1] + p[1] / n]);
    *pts.iter()
        .min_by(|a, b| {
            let da = (a[0] - c[0]).hypot(a[1] - c[1]);
            let db = (b[0] - c[0]).hypot(b[1] - c[1]);
            da.total_cmp(&db)
        })
        .expect("sites are non-empty")
}

/// Serves Gaussian draws one at a time from batched matrix products.
struct DrawBuffer<'a> {
    factor: &'a IncrementFactor,
    batch: usize,
    buf: Vec<f64>,
    next: usize,
}

impl<'a> DrawBuffer<'a> {
    fn new(factor: &'a IncrementFactor) -> Self {
        let batch = BATCH.min(factor.len().max(4));
        Self {
            factor,
            batch,
            buf: Vec::new(),
            next: batch,
        }
    }

    fn next(&mut self, rng: &mut ChaCha8Rng) -> &[f64] {
        if self.next == self.batch {
            self.factor.draw_batch(rng, self.batch, &mut self.buf);
            self.next = 0;
        }
        let n = self.factor.len();
        let k = self.next;
        self.next += 1;
        &self.buf[k * n..(k + 1) * n]
    }
}

/// Brown-Resnick replicates with standard Frechet margins.
///
/// Spectral functions are `exp(W(x) - W(x_j) - gamma(x - x_j) / 2)`, built
/// from one increment field anchored at a central site. The exact method
/// follows the extremal-functions algorithm and works in log scale
/// throughout. The truncated method reports in [`Truncation::unresolved`]
/// the fraction of sites whose value is below the last point `zeta_N`;
/// only those can still be changed by a spectral function whose value
/// there does not exceed its value at its own anchor.
pub fn simulate_brown_resnick(
    v: &Variogram,
    sites: impl Into<Sites>,
    n_rep: usize,
    seed: u64,
    method: BrMethod,
) -> Result<Vec<FieldSample>> {
    let sites = sites.into();
    check_run(&sites, n_rep)?;
    if let BrMethod::TruncatedSpectral { n_points } = method {
        if n_points == 0 {
            return domain("n_points must be positive");
        }
    }
    let factor = IncrementFactor::new(v, &sites.points(), central_site(&sites))?;
    let table = OffsetTable::new(v, &sites);
    let n = sites.len();
    run(&sites, n_rep, seed, |rng| {
        let mut draws = DrawBuffer::new(&factor);
        let mut lz = vec![f64::NEG_INFINITY; n];
        let truncation = match method {
            BrMethod::ExtremalFunctions => {
                for j in 0..n {
                    let mut e: f64 = rng.sample(Exp1);
                    while -e.ln() > lz[j] {
                        let lzeta = -e.ln();
                        let w = draws.next(rng);
                        let wj = w[j];
                        let log_y = |i: usize| lzeta + w[i] - wj - table.half_gamma(i, j);
                        if (0..j).rev().all(|i| log_y(i) < lz[i]) {
                            for (i, z) in lz.iter_mut().enumerate().skip(j) {
                                *z = z.max(log_y(i));
                            }
                        }
                        e += rng.sample::<f64, _>(Exp1);
                    }
                }
                None
            }
            BrMethod::TruncatedSpectral { n_points } => {
                let mut e = 0.0;
                for _ in 0..n_points {
                    e += rng.sample::<f64, _>(Exp1);
                    let lzeta = -e.ln();
                    let s = rng.random_range(0..n);
                    let w = draws.next(rng);
                    let ws = w[s];
                    for i in 0..n {
                        lz[i] = lz[i].max(lzeta + w[i] - ws - table.half_gamma(i, s));
                    }
                }
                let last = -e.ln();
                let open = lz.iter().filter(|&&l| l < last).count();
                Some(Truncation {
                    functions: n_points,
                    unresolved: open as f64 / n as f64,
                })
            }
        };
        (lz.into_iter().map(f64::exp).collect(), truncation)
    })
}

/// Mixed moving maxima with a storm shape `f` supported in a disk of
/// radius `reach` around the storm center.
fn moving_maxima<F>(
    sites: &Sites,
    n_rep: usize,
    seed: u64,
    reach: f64,
    f_max: f64,
    shape: F,
) -> Result<Vec<FieldSample>>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let g: Grid = *sites.grid();
    let mut position = vec![u32::MAX; g.len()];
    for (k, &i) in sites.indices().iter().enumerate() {
        position[i as usize] = k as u32;
    }
    let pts = sites.points();
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for p in &pts {
        x0 = x0.min(p[0]);
        y0 = y0.min(p[1]);
        x1 = x1.max(p[0]);
        y1 = y1.max(p[1]);
    }
    let (bx0, by0) = (x0 - reach, y0 - reach);
    let (bw, bh) = (x1 - x0 + 2.0 * reach, y1 - y0 + 2.0 * reach);
    let area = bw * bh;
    let n = sites.len();
    let span = |c: f64, o: f64, len: usize| {
        let lo = ((c - reach - o) / g.spacing).ceil().max(0.0);
        let hi = ((c + reach - o) / g.spacing).floor().min(len as f64 - 1.0);
        (lo as usize, hi as i64)
    };
    run(sites, n_rep, seed, |rng| {
        let mut z = vec![0.0; n];
        let mut floor = 0.0;
        let mut e = 0.0;
        let mut storms = 0usize;
        loop {
            e += rng.sample::<f64, _>(Exp1);
            let zeta = area / e;
            if zeta * f_max <= floor {
                floor = z.iter().copied().fold(f64::INFINITY, f64::min);
                if zeta * f_max <= floor {
                    break;
                }
            }
            storms += 1;
            if storms.is_multiple_of(64) {
                floor = z.iter().copied().fold(f64::INFINITY, f64::min);
            }
            let cx = bx0 + bw * rng.random::<f64>();
            let cy = by0 + bh * rng.random::<f64>();
            let (ix0, ix1) = span(cx, g.origin[0], g.nx);
            let (iy0, iy1) = span(cy, g.origin[1], g.ny);
            for iy in iy0 as i64..=iy1 {
                let py = g.origin[1] + iy as f64 * g.spacing;
                for ix in ix0 as i64..=ix1 {
                    let k = position[g.index(ix as usize, iy as usize)];
                    if k == u32::MAX {
                        continue;
                    }
                    let px = g.origin[0] + ix as f64 * g.spacing;
                    let val = zeta * shape(px - cx, py - cy);
                    let slot = &mut z[k as usize];
                    if val > *slot {
                        *slot = val;
                    }
                }
            }
        }
        (z, None)
    })
}

/// Smith replicates: Gaussian storm shapes with covariance `sigma`, so that
/// the field is Brown-Resnick with variogram `x' sigma^-1 x`.
///
/// Storm centers are drawn on the sites' bounding box dilated by five
/// standard deviations of the widest storm axis, and each storm only
/// touches sites within that radius.
pub fn simulate_smith(
    sigma: &Sym2,
    sites: impl Into<Sites>,
    n_rep: usize,
    seed: u64,
) -> Result<Vec<FieldSample>> {
    let sites = sites.into();
    check_run(&sites, n_rep)?;
    sigma.validate()?;
    let det = sigma.det();
    let (_, big) = sigma.eigenvalues();
    let reach = SMITH_RADIUS_SD * big.sqrt();
    let f_max = 1.0 / (2.0 * PI * det.sqrt());
    let s = *sigma;
    moving_maxima(&sites, n_rep, seed, reach, f_max, move |dx, dy| {
        f_max * (-0.5 * s.inv_quad([dx, dy])).exp()
    })
}

/// Tube-model replicates: storms are disks of radius `r_b` with height
/// `1 / (pi r_b^2)`.
pub fn simulate_tube(
    r_b: f64,
    sites: impl Into<Sites>,
    n_rep: usize,
    seed: u64,
) -> Result<Vec<FieldSample>> {
    let sites = sites.into();
    check_run(&sites, n_rep)?;
    if !(r_b > 0.0 && r_b.is_finite()) {
        return domain(format!("storm radius {r_b} must be positive"));
    }
    let height = 1.0 / (PI * r_b * r_b);
    let r2 = r_b * r_b;
    moving_maxima(&sites, n_rep, seed, r_b, height, move |dx, dy| {
        if dx * dx + dy * dy < r2 {
            height
        } else {
            0.0
        }
    })
}

/// Schlather replicates with spectral functions `sqrt(2 pi) max(eps, 0)`.
///
/// The stopping rule assumes `eps <= 4` everywhere. Draws that break this
/// bound may end the simulation early, so their fraction is reported in
/// [`Truncation::unresolved`].
pub fn simulate_schlather(
    corr: &Correlation,
    sites: impl Into<Sites>,
    n_rep: usize,
    seed: u64,
) -> Result<Vec<FieldSample>> {
    let sites = sites.into();
    check_run(&sites, n_rep)?;
    corr.validate()?;
    let pts = sites.points();
    let factor = IncrementFactor::from_covariance(pts.len(), |i, j| {
        corr.eval((pts[i][0] - pts[j][0]).hypot(pts[i][1] - pts[j][1]))
    })?;
    let n = sites.len();
    let scale = (2.0 * PI).sqrt();
    let bound = scale * SCHLATHER_BOUND_SD;
    run(&sites, n_rep, seed, |rng| {
        let mut draws = DrawBuffer::new(&factor);
        let mut z = vec![0.0; n];
        let mut e = 0.0;
        let (mut used, mut exceeded) = (0usize, 0usize);
        loop {
            e += rng.sample::<f64, _>(Exp1);
            let zeta = 1.0 / e;
            if zeta * bound <= z.iter().copied().fold(f64::INFINITY, f64::min) {
                break;
            }
            let eps = draws.next(rng);
            used += 1;
            if eps.iter().any(|&x| x > SCHLATHER_BOUND_SD) {
                exceeded += 1;
            }
            for (zi, &x) in z.iter_mut().zip(eps) {
                *zi = zi.max(zeta * scale * x.max(0.0));
            }
        }
        let t = Truncation {
            functions: used,
            unresolved: exceeded as f64 / used as f64,
        };
        (z, Some(t))
    })
}
