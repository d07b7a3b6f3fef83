//! Binary trajectory checkpoints: magic, version, a JSON header, then the
//! spectra of `u, n₊, n₋` per snapshot as little-endian `f64` pairs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{Scheme, ZakharovState};
use crate::spectral::{ComplexField, FourierGrid, RealField, Spectral, C64};

const MAGIC: &[u8; 4] = b"ZKCP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub num_points: usize,
    pub box_length: f64,
    pub scheme: Scheme,
    pub dt: f64,
    /// Free-form run parameters.
    pub params: serde_json::Value,
}

fn write_spectrum(w: &mut impl Write, spec: &[C64]) -> Result<()> {
    for v in spec {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_spectrum(r: &mut impl Read, m: usize) -> Result<Vec<C64>> {
    (0..m).map(|_| Ok(C64::new(read_f64(r)?, read_f64(r)?))).collect()
}

pub fn write_checkpoint(path: &Path, header: &CheckpointHeader, snapshots: &[ZakharovState]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    let json = serde_json::to_vec(header)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    w.write_all(&(snapshots.len() as u64).to_le_bytes())?;
    for s in snapshots {
        let g = s.grid();
        if g.num_points() != header.num_points || g.length() != header.box_length {
            return Err(Error::Format("snapshot grid differs from header".into()));
        }
        w.write_all(&s.time.to_le_bytes())?;
        write_spectrum(&mut w, s.u.spectrum())?;
        write_spectrum(&mut w, s.n_plus.spectrum())?;
        write_spectrum(&mut w, s.n_minus.spectrum())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(CheckpointHeader, Vec<ZakharovState>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a checkpoint file".into()));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let len = read_u64(&mut r)? as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: CheckpointHeader = serde_json::from_slice(&json)?;
    let grid = FourierGrid::new(header.num_points, header.box_length)?;
    let count = read_u64(&mut r)? as usize;
    let m = header.num_points;
    let mut engine = grid.engine();
    let mut snapshots = Vec::with_capacity(count);
    for _ in 0..count {
        let time = read_f64(&mut r)?;
        let u = read_spectrum(&mut r, m)?;
        let p = read_spectrum(&mut r, m)?;
        let q = read_spectrum(&mut r, m)?;
        snapshots.push(ZakharovState {
            u: ComplexField::from_spectrum_with(&mut engine, u),
            n_plus: RealField::from_spectrum_with(&mut engine, &p),
            n_minus: RealField::from_spectrum_with(&mut engine, &q),
            time,
        });
    }
    Ok((header, snapshots))
}
