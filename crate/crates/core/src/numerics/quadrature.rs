//! Globally adaptive Gauss-Kronrod (10/21) quadrature with interval maps for
//! infinite ranges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

const XK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];

const WK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

// Gauss weights for the odd entries of XK.
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

/// Cooperative cancellation flag shared with long-running integrations.
#[derive(Debug, Clone, Default)]
pub struct CancelToken(Arc<AtomicBool>);

impl CancelToken {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn cancel(&self) {
        self.0.store(true, AtomicOrdering::Relaxed);
    }

    pub fn is_cancelled(&self) -> bool {
        self.0.load(AtomicOrdering::Relaxed)
    }
}

/// Change of variables used to bring an infinite range onto `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TailMap {
    /// `x = a + u / (1 - u)`; suits algebraic or slow exponential decay.
    #[default]
    Rational,
    /// `x = a - ln(1 - u)`; suits fast exponential decay.
    Exponential,
}

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadSpec {
    pub rel_tol: f64,
    pub abs_floor: f64,
    pub max_subdivisions: usize,
    pub infinite_map: TailMap,
    #[serde(skip)]
    pub cancel: Option<CancelToken>,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            rel_tol: 3e-7,
            abs_floor: 1e-300,
            max_subdivisions: 2000,
            infinite_map: TailMap::Rational,
            cancel: None,
        }
    }
}

impl PartialEq for QuadSpec {
    fn eq(&self, other: &Self) -> bool {
        self.rel_tol == other.rel_tol
            && self.abs_floor == other.abs_floor
            && self.max_subdivisions == other.max_subdivisions
            && self.infinite_map == other.infinite_map
    }
}

impl QuadSpec {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_floor(mut self, abs_floor: f64) -> Self {
        self.abs_floor = abs_floor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return domain(format!("rel_tol {} outside (0, 1)", self.rel_tol));
        }
        if !(self.abs_floor >= 0.0 && self.abs_floor.is_finite()) {
            return domain(format!(
                "abs_floor {} must be finite and >= 0",
                self.abs_floor
            ));
        }
        if self.max_subdivisions == 0 {
            return domain("max_subdivisions must be positive");
        }
        Ok(())
    }

    pub(crate) fn check_cancel(&self) -> Result<()> {
        match &self.cancel {
            Some(c) if c.is_cancelled() => Err(Error::Cancelled),
            _ => Ok(()),
        }
    }
}

/// Integration range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Finite(f64, f64),
    /// `[a, inf)`
    UpperTail(f64),
    /// `(-inf, b]`
    LowerTail(f64),
    WholeLine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Clone, Copy)]
enum Map {
    Identity,
    Upper(f64, TailMap),
    Lower(f64, TailMap),
    Whole(TailMap),
}

impl Map {
    /// Returns `(x, dx/du)`.
    #[inline]
    fn apply(self, u: f64) -> (f64, f64) {
        match self {
            Map::Identity => (u, 1.0),
            Map::Upper(a, TailMap::Rational) => {
                let v = 1.0 - u;
                (a + u / v, 1.0 / (v * v))
            }
            Map::Upper(a, TailMap::Exponential) => {
                let v = 1.0 - u;
                (a - v.ln(), 1.0 / v)
            }
            Map::Lower(b, TailMap::Rational) => {
                let v = 1.0 - u;
                (b - u / v, 1.0 / (v * v))
            }
            Map::Lower(b, TailMap::Exponential) => {
                let v = 1.0 - u;
                (b + v.ln(), 1.0 / v)
            }
            Map::Whole(TailMap::Rational) => {
                let v = 1.0 - u * u;
                (u / v, (1.0 + u * u) / (v * v))
            }
            Map::Whole(TailMap::Exponential) => {
                let v = 1.0 - u;
                ((u / v).ln(), 1.0 / (u * v))
            }
        }
    }
}

struct Segment {
    map: Map,
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<F: FnMut(f64) -> f64>(f: &mut F, map: Map, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut eval = |u: f64| -> Result<f64> {
        let (x, jac) = map.apply(u);
        let y = f(x);
        if !y.is_finite() {
            return domain(format!("integrand is not finite at x = {x}"));
        }
        let v = y * jac;
        // Underflowed integrand times a huge Jacobian is still zero.
        Ok(if v.is_finite() { v } else { 0.0 })
    };
    let mut fv = [0.0f64; 21];
    fv[10] = eval(center)?;
    for i in 0..10 {
        fv[i] = eval(center - half * XK[i])?;
        fv[20 - i] = eval(center + half * XK[i])?;
    }
    let mut resk = WK[10] * fv[10];
    let mut resg = 0.0;
    let mut resabs = WK[10] * fv[10].abs();
    for i in 0..10 {
        let pair = fv[i] + fv[20 - i];
        resk += WK[i] * pair;
        resabs += WK[i] * (fv[i].abs() + fv[20 - i].abs());
        if i % 2 == 1 {
            resg += WG[i / 2] * pair;
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WK[10] * (fv[10] - mean).abs();
    for i in 0..10 {
        resasc += WK[i] * ((fv[i] - mean).abs() + (fv[20 - i] - mean).abs());
    }
    let hl = half.abs();
    let value = resk * half;
    let resabs = resabs * hl;
    let resasc = resasc * hl;
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    Ok((value, err))
}

fn initial_segment(d: Domain, spec: &QuadSpec) -> Result<Option<(Map, f64, f64)>> {
    Ok(Some(match d {
        Domain::Finite(a, b) => {
            if !(a.is_finite() && b.is_finite()) {
                return domain("finite domain needs finite limits");
            }
            if a == b {
                return Ok(None);
            }
            (Map::Identity, a, b)
        }
        Domain::UpperTail(a) if a.is_finite() => (Map::Upper(a, spec.infinite_map), 0.0, 1.0),
        Domain::LowerTail(b) if b.is_finite() => (Map::Lower(b, spec.infinite_map), 0.0, 1.0),
        Domain::WholeLine => match spec.infinite_map {
            TailMap::Rational => (Map::Whole(TailMap::Rational), -1.0, 1.0),
            TailMap::Exponential => (Map::Whole(TailMap::Exponential), 0.0, 1.0),
        },
        _ => return domain("tail domain needs a finite endpoint"),
    }))
}

/// Integrates `f` over `domain`.
///
/// Converges when the summed error estimate is below
/// `max(abs_floor, rel_tol * |value|)`. On exhausting the subdivision budget the
/// best estimate is returned inside [`Error::NoConvergence`].
pub fn integrate<F: FnMut(f64) -> f64>(f: F, domain: Domain, spec: &QuadSpec) -> Result<Integral> {
    integrate_pieces(f, &[domain], spec)
}

/// Integrates `f` over the union of several domains with one shared error
/// budget, so that cancellation between pieces is judged against the total.
pub fn integrate_pieces<F: FnMut(f64) -> f64>(
    mut f: F,
    domains: &[Domain],
    spec: &QuadSpec,
) -> Result<Integral> {
    spec.validate()?;
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for &d in domains {
        if let Some((map, a, b)) = initial_segment(d, spec)? {
            let (value, error) = gk21(&mut f, map, a, b)?;
            evaluations += 21;
            heap.push(Segment {
                map,
                a,
                b,
                value,
                error,
            });
        }
    }
    let mut frozen: Vec<Segment> = Vec::new();
    let mut total: f64 = heap.iter().map(|s| s.value).sum();
    let mut total_err: f64 = heap.iter().map(|s| s.error).sum();
    let mut subdivisions = heap.len();
    while total_err > spec.abs_floor.max(spec.rel_tol * total.abs()) {
        spec.check_cancel()?;
        let Some(seg) = heap.pop() else { break };
        if subdivisions >= spec.max_subdivisions {
            frozen.push(seg);
            break;
        }
        let mid = 0.5 * (seg.a + seg.b);
        let width = (seg.b - seg.a).abs();
        if width <= 1e3 * f64::EPSILON * seg.a.abs().max(seg.b.abs()).max(1e-300) {
            // Cannot split further without hitting rounding.
            frozen.push(seg);
            continue;
        }
        let (v1, e1) = gk21(&mut f, seg.map, seg.a, mid)?;
        let (v2, e2) = gk21(&mut f, seg.map, mid, seg.b)?;
        evaluations += 42;
        subdivisions += 1;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment {
            map: seg.map,
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            map: seg.map,
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
        });
    }
    let segments = || heap.iter().chain(frozen.iter());
    let value: f64 = segments().map(|s| s.value).sum();
    let error: f64 = segments().map(|s| s.error).sum();
    if error <= spec.abs_floor.max(spec.rel_tol * value.abs()) {
        Ok(Integral {
            value,
            error,
            evaluations,
        })
    } else {
        Err(Error::NoConvergence {
            what: "adaptive quadrature".into(),
            estimate: value,
            error,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_weights_sum_to_two() {
        let s: f64 = 2.0 * WK[..10].iter().sum::<f64>() + WK[10];
        assert!((s - 2.0).abs() < 1e-14);
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((g - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cancellation_is_honoured() {
        let token = CancelToken::new();
        token.cancel();
        let spec = QuadSpec {
            cancel: Some(token),
            ..QuadSpec::default()
        };
        let r = integrate(|x: f64| (1.0 / x).sin(), Domain::Finite(1e-3, 1.0), &spec);
        assert_eq!(r.unwrap_err(), Error::Cancelled);
    }
}
