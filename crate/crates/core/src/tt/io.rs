//! `TTC1` binary files: a small little-endian container for trains.
//!
//! Layout: magic `TTC1`, `u64` kind (0 tensor, 1 operator), `u64` M, mode sizes
//! (operators store M row sizes then M column sizes), the M+1 ranks, then every
//! block's entries as `f64` in storage order.

use std::io::{Read, Write};
use std::path::Path;

use super::operator::{OpCore, TtOperator};
use super::tensor::{Core, TtTensor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TTC1";
const KIND_TENSOR: u64 = 0;
const KIND_OPERATOR: u64 = 1;
// refuse headers that would make us allocate absurd buffers
const MAX_ENTRIES: u64 = 1 << 32;

fn put(w: &mut impl Write, x: u64) -> Result<()> {
    w.write_all(&x.to_le_bytes())?;
    Ok(())
}

fn get(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn put_f64s(w: &mut impl Write, xs: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(xs.len() * 8);
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn get_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn header(r: &mut impl Read, expect: u64) -> Result<usize> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a TTC1 file".into()));
    }
    let kind = get(r)?;
    if kind != expect {
        return Err(Error::Format(format!("expected kind {expect}, found {kind}")));
    }
    let m = get(r)?;
    if m == 0 || m > 1 << 20 {
        return Err(Error::Format(format!("implausible dimension count {m}")));
    }
    Ok(m as usize)
}

fn read_dims(r: &mut impl Read, n: usize) -> Result<Vec<usize>> {
    (0..n)
        .map(|_| {
            let x = get(r)?;
            if x == 0 || x > MAX_ENTRIES {
                return Err(Error::Format(format!("implausible size {x}")));
            }
            Ok(x as usize)
        })
        .collect()
}

fn check_entries(parts: &[usize]) -> Result<usize> {
    let mut total: u64 = 1;
    for &p in parts {
        total = total.saturating_mul(p as u64);
    }
    if total > MAX_ENTRIES {
        return Err(Error::Format(format!("block with {total} entries")));
    }
    Ok(total as usize)
}

impl TtTensor {
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        put(w, KIND_TENSOR)?;
        put(w, self.ndim() as u64)?;
        for n in self.modes() {
            put(w, n as u64)?;
        }
        for r in self.ranks() {
            put(w, r as u64)?;
        }
        for c in self.cores() {
            put_f64s(w, c.data())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let m = header(r, KIND_TENSOR)?;
        let modes = read_dims(r, m)?;
        let ranks = read_dims(r, m + 1)?;
        let mut cores = Vec::with_capacity(m);
        for k in 0..m {
            let len = check_entries(&[ranks[k], modes[k], ranks[k + 1]])?;
            cores.push(Core::new(ranks[k], modes[k], ranks[k + 1], get_f64s(r, len)?)?);
        }
        TtTensor::new(cores)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

impl TtOperator {
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        put(w, KIND_OPERATOR)?;
        put(w, self.ndim() as u64)?;
        for n in self.row_modes().into_iter().chain(self.col_modes()) {
            put(w, n as u64)?;
        }
        for r in self.ranks() {
            put(w, r as u64)?;
        }
        for c in self.cores() {
            put_f64s(w, c.data())?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let m = header(r, KIND_OPERATOR)?;
        let sizes = read_dims(r, 2 * m)?;
        let ranks = read_dims(r, m + 1)?;
        let mut cores = Vec::with_capacity(m);
        for k in 0..m {
            let (rows, cols) = (sizes[k], sizes[m + k]);
            let len = check_entries(&[ranks[k], rows, cols, ranks[k + 1]])?;
            cores.push(OpCore::new(ranks[k], rows, cols, ranks[k + 1], get_f64s(r, len)?)?);
        }
        TtOperator::new(cores)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(&mut std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
