//! Binary snapshot container for spectral fields.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! file    := magic "VEFS" | version: u32 (= 1) | count: u32 | record * count
//! record  := dim: u32 | n: u32 | box_length: f64 | rank: u32 | reserved: u32 (= 0)
//!            | time: f64 | payload
//! payload := (re: f64, im: f64) for every coefficient, component-major,
//!            modes in row-major FFT order (see `Grid`)
//! ```
//!
//! Coefficients are the unnormalized forward DFT values of the grid samples.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use super::{Grid, Rank, SpectralField};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"VEFS";
pub const VERSION: u32 = 1;

/// Writes the fields atomically (temporary file, then rename).
pub fn write_fields(path: &Path, time: f64, fields: &[&SpectralField]) -> Result<()> {
    let tmp = temp_path(path);
    {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(fields.len() as u32).to_le_bytes())?;
        for f in fields {
            let g = f.grid();
            w.write_all(&(g.dim() as u32).to_le_bytes())?;
            w.write_all(&(g.n() as u32).to_le_bytes())?;
            w.write_all(&g.box_length().to_le_bytes())?;
            w.write_all(&f.rank().as_u32().to_le_bytes())?;
            w.write_all(&0u32.to_le_bytes())?;
            w.write_all(&time.to_le_bytes())?;
            for c in f.coeffs() {
                w.write_all(&c.re.to_le_bytes())?;
                w.write_all(&c.im.to_le_bytes())?;
            }
        }
        w.flush()?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads every record. Records whose grid matches `grid` reuse it (and its
/// FFT plans); otherwise a fresh grid is built.
pub fn read_fields(path: &Path, grid: Option<&Grid>) -> Result<(f64, Vec<SpectralField>)> {
    let bad = |reason: String| Error::Format { path: path.to_path_buf(), reason };
    let mut r = BufReader::new(fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| bad("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = read_u32(&mut r).map_err(|_| bad("truncated header".into()))?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r).map_err(|_| bad("truncated header".into()))?;
    let mut fields = Vec::with_capacity(count as usize);
    let mut time = 0.0;
    let mut cached: Option<Grid> = grid.cloned();
    for rec in 0..count {
        let trunc = |_| bad(format!("truncated record {rec}"));
        let dim = read_u32(&mut r).map_err(trunc)? as usize;
        let n = read_u32(&mut r).map_err(trunc)? as usize;
        let box_length = read_f64(&mut r).map_err(trunc)?;
        let rank = read_u32(&mut r).map_err(trunc)?;
        let _reserved = read_u32(&mut r).map_err(trunc)?;
        time = read_f64(&mut r).map_err(trunc)?;
        let rank = Rank::from_u32(rank).ok_or_else(|| bad(format!("bad rank {rank}")))?;
        let g = match &cached {
            Some(g) if g.dim() == dim && g.n() == n && g.box_length() == box_length => g.clone(),
            _ => {
                let g = Grid::new(dim, n, box_length).map_err(|e| bad(e.to_string()))?;
                cached = Some(g.clone());
                g
            }
        };
        let len = rank.components(dim) * g.n_modes();
        let mut coeffs = Vec::with_capacity(len);
        for _ in 0..len {
            let re = read_f64(&mut r).map_err(trunc)?;
            let im = read_f64(&mut r).map_err(trunc)?;
            coeffs.push(Complex64::new(re, im));
        }
        fields.push(SpectralField::from_coeffs(&g, rank, coeffs)?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(bad("trailing bytes".into()));
    }
    Ok((time, fields))
}

/// Writes `contents` to `path` atomically.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = temp_path(path);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> std::io::Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}
