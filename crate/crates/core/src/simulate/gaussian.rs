use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::variogram::Variogram;

use super::{replicate_rng, Grid};

/// Diagonal entries below this fraction of the largest one end the pivoted
/// factorization.
const RANK_TOL: f64 = 1e-12;

/// Low-rank factor `L` with `L L' = Cov(W(x_i), W(x_j))` for a Gaussian
/// field with stationary increments pinned to zero at an anchor point.
///
/// The factorization is a pivoted Cholesky, so a rank-deficient covariance
/// (for instance the quadratic variogram, whose field is linear) yields a
/// thin factor and cheap draws.
#[derive(Debug, Clone)]
pub struct IncrementFactor {
    n: usize,
    rank: usize,
    /// `n x rank`, row-major.
    factor: Vec<f64>,
}

impl IncrementFactor {
    pub fn new(v: &Variogram, points: &[[f64; 2]], anchor: [f64; 2]) -> Result<Self> {
        let diff = |a: [f64; 2], b: [f64; 2]| [a[0] - b[0], a[1] - b[1]];
        let to_anchor: Vec<f64> = points.iter().map(|&p| v.eval(diff(p, anchor))).collect();
        Self::from_covariance(points.len(), |i, j| {
            0.5 * (to_anchor[i] + to_anchor[j] - v.eval(diff(points[i], points[j])))
        })
    }

    pub(crate) fn from_covariance<C: Fn(usize, usize) -> f64>(n: usize, cov: C) -> Result<Self> {
        let mut d: Vec<f64> = (0..n).map(|i| cov(i, i)).collect();
        if d.iter().any(|x| !x.is_finite()) {
            return Err(Error::Factorization("non-finite variance".into()));
        }
        let max_diag = d.iter().copied().fold(0.0, f64::max);
        let tol = RANK_TOL * max_diag;
        // Rows are stored with stride n so that dot products over the
        // columns found so far are contiguous.
        let mut rows = vec![0.0; n * n];
        let mut done = vec![false; n];
        let mut rank = 0;
        while rank < n {
            let (p, &dp) = d
                .iter()
                .enumerate()
                .filter(|(i, _)| !done[*i])
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("rank < n leaves a pending index");
            if !(dp > tol) {
                break;
            }
            let piv = dp.sqrt();
            done[p] = true;
            rows[p * n + rank] = piv;
            let (head, tail) = rows.split_at_mut(p * n);
            let (prow, tail) = tail.split_at_mut(n);
            let pr = &prow[..rank];
            let update = |i: usize, row: &mut [f64], d: &mut f64| {
                let s = cov(i, p) - row[..rank].iter().zip(pr).map(|(a, b)| a * b).sum::<f64>();
                let l = s / piv;
                row[rank] = l;
                *d -= l * l;
            };
            for (i, row) in head.chunks_exact_mut(n).enumerate() {
                if !done[i] {
                    update(i, row, &mut d[i]);
                }
            }
            for (k, row) in tail.chunks_exact_mut(n).enumerate() {
                let i = p + 1 + k;
                if !done[i] {
                    update(i, row, &mut d[i]);
                }
            }
            if d.iter().any(|x| x.is_nan()) {
                return Err(Error::Factorization("NaN during pivoted Cholesky".into()));
            }
            rank += 1;
        }
        let mut factor = vec![0.0; n * rank];
        for i in 0..n {
            factor[i * rank..(i + 1) * rank].copy_from_slice(&rows[i * n..i * n + rank]);
        }
        Ok(Self { n, rank, factor })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Fills `out` with `k` independent draws, each `n` values long.
    pub fn draw_batch<R: Rng + ?Sized>(&self, rng: &mut R, k: usize, out: &mut Vec<f64>) {
        out.clear();
        out.resize(k * self.n, 0.0);
        if self.rank == 0 || k == 0 {
            return;
        }
        let g: Vec<f64> = (0..k * self.rank)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        // out (k x n) = g (k x rank) * factor' (rank x n).
        // SAFETY: the three buffers hold k*rank, n*rank and k*n elements,
        // matching the dimensions and strides passed here.
        unsafe {
            matrixmultiply::dgemm(
                k,
                self.rank,
                self.n,
                1.0,
                g.as_ptr(),
                self.rank as isize,
                1,
                self.factor.as_ptr(),
                1,
                self.rank as isize,
                0.0,
                out.as_mut_ptr(),
                self.n as isize,
                1,
            );
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::new();
        self.draw_batch(rng, 1, &mut out);
        out
    }
}

/// One draw of the increment field on every grid point, with
/// `W(origin) = 0`. Values are row-major.
pub fn gaussian_increment_field(v: &Variogram, grid: &Grid, seed: u64) -> Result<Vec<f64>> {
    grid.validate()?;
    let points: Vec<[f64; 2]> = (0..grid.len()).map(|i| grid.point(i)).collect();
    let factor = IncrementFactor::new(v, &points, grid.origin)?;
    Ok(factor.draw(&mut replicate_rng(seed, 0)))
}
