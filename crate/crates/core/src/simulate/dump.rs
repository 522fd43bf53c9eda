//! Little-endian binary dump of a batch of samples sharing one set of sites.
//!
//! ```text
//! magic        4 bytes  "FSMP"
//! version      u32
//! nx, ny       u32, u32
//! origin       f64, f64
//! spacing      f64
//! margin       u8 (0 simple, 1 gev) then location, scale, shape as f64
//!              (zeros for simple margins)
//! seed         u64
//! n_rep        u64
//! n_sites      u64
//! sites        n_sites x u32, row-major grid indices in increasing order
//! replicates   n_rep x (replicate index u64, n_sites x f64)
//! ```

use std::io::{Read, Write};

use crate::dependence::{GevParams, Margin};
use crate::error::{domain, Error, Result};

use super::{FieldSample, Grid, Sites};

pub const DUMP_MAGIC: [u8; 4] = *b"FSMP";
pub const DUMP_VERSION: u32 = 1;

fn io(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_samples<W: Write>(mut w: W, samples: &[FieldSample]) -> Result<()> {
    let Some(first) = samples.first() else {
        return domain("nothing to write");
    };
    if samples
        .iter()
        .any(|s| !s.sites.shares_storage(&first.sites) || s.margin != first.margin)
    {
        return domain("all samples in a dump must share sites and margin");
    }
    let g = first.grid();
    let mut buf = Vec::with_capacity(64 + samples.len() * (8 + 8 * first.values.len()));
    buf.extend_from_slice(&DUMP_MAGIC);
    buf.extend_from_slice(&DUMP_VERSION.to_le_bytes());
    buf.extend_from_slice(&(g.nx as u32).to_le_bytes());
    buf.extend_from_slice(&(g.ny as u32).to_le_bytes());
    for x in [g.origin[0], g.origin[1], g.spacing] {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    let (tag, params) = match first.margin {
        Margin::Simple => (0u8, [0.0; 3]),
        Margin::Gev(p) => (1u8, [p.location, p.scale, p.shape]),
    };
    buf.push(tag);
    for x in params {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    buf.extend_from_slice(&first.seed.to_le_bytes());
    buf.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    buf.extend_from_slice(&(first.sites.len() as u64).to_le_bytes());
    for &i in first.sites.indices() {
        buf.extend_from_slice(&i.to_le_bytes());
    }
    for s in samples {
        buf.extend_from_slice(&s.replicate.to_le_bytes());
        for v in &s.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    w.write_all(&buf).map_err(io)
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.0.len() < N {
            return Err(Error::Io("truncated sample dump".into()));
        }
        let (head, rest) = self.0.split_at(N);
        self.0 = rest;
        Ok(head.try_into().expect("split at N"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

pub fn read_samples<R: Read>(mut r: R) -> Result<Vec<FieldSample>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(io)?;
    let mut c = Cursor(&bytes);
    if c.take::<4>()? != DUMP_MAGIC {
        return Err(Error::Io("not a sample dump".into()));
    }
    let version = c.u32()?;
    if version != DUMP_VERSION {
        return Err(Error::Io(format!("unsupported dump version {version}")));
    }
    let (nx, ny) = (c.u32()? as usize, c.u32()? as usize);
    let origin = [c.f64()?, c.f64()?];
    let spacing = c.f64()?;
    let grid = Grid::new(origin, nx, ny, spacing)?;
    let tag = c.take::<1>()?[0];
    let params = [c.f64()?, c.f64()?, c.f64()?];
    let margin = match tag {
        0 => Margin::Simple,
        1 => Margin::Gev(GevParams::new(params[0], params[1], params[2])?),
        t => return Err(Error::Io(format!("unknown margin tag {t}"))),
    };
    let seed = c.u64()?;
    let n_rep = c.u64()? as usize;
    let n_sites = c.u64()? as usize;
    let expected = n_sites
        .checked_mul(4)
        .and_then(|s| n_rep.checked_mul(8 + 8 * n_sites).map(|v| s + v));
    if expected != Some(c.0.len()) {
        return Err(Error::Io("dump length does not match its header".into()));
    }
    let index = (0..n_sites).map(|_| c.u32()).collect::<Result<Vec<_>>>()?;
    let sites = Sites::from_indices(grid, index)?;
    if sites.len() != n_sites {
        return Err(Error::Io("duplicate site indices in dump".into()));
    }
    (0..n_rep)
        .map(|_| {
            let replicate = c.u64()?;
            let values = (0..n_sites).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
            Ok(FieldSample {
                sites: sites.clone(),
                values,
                margin,
                seed,
                replicate,
                truncation: None,
            })
        })
        .collect()
}
