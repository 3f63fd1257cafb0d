//! Compact binary dump of sampled configurations.
//!
//! Layout (little endian): magic `FCPD`, version `u32`, box as five `i64`,
//! `p` as `f64`, seed and stream as `u64`, bond count as `u64`, then the
//! bond bitmap packed into `u64` words.

use std::io::{Read, Write};

use bitvec::prelude::*;

use super::lattice::{LatticeBox, LatticeConfig};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FCPD";
const VERSION: u32 = 1;

pub fn write_config<W: Write>(mut out: W, cfg: &LatticeConfig) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    let b = cfg.bx;
    for v in [b.t_lo, b.t_hi, b.y_lo, b.y_hi, b.margin] {
        out.write_all(&v.to_le_bytes())?;
    }
    out.write_all(&cfg.p.to_le_bytes())?;
    out.write_all(&cfg.seed.to_le_bytes())?;
    out.write_all(&cfg.stream.to_le_bytes())?;
    out.write_all(&(cfg.bits.len() as u64).to_le_bytes())?;
    for w in cfg.bits.as_raw_slice() {
        out.write_all(&w.to_le_bytes())?;
    }
    Ok(())
}

fn read8<R: Read>(r: &mut R) -> Result<[u8; 8]> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(b)
}

/// Reads one configuration; `Ok(None)` at a clean end of stream.
pub fn read_config<R: Read>(mut r: R) -> Result<Option<LatticeConfig>> {
    let mut magic = [0u8; 4];
    match r.read_exact(&mut magic) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    if &magic != MAGIC {
        return Err(Error::ConfigInvalid("not a configuration dump".into()));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    if u32::from_le_bytes(v) != VERSION {
        return Err(Error::ConfigInvalid("unsupported dump version".into()));
    }
    let mut f = [0i64; 5];
    for x in f.iter_mut() {
        *x = i64::from_le_bytes(read8(&mut r)?);
    }
    let bx = LatticeBox::new(f[0], f[1], f[2], f[3], f[4])?;
    let p = f64::from_le_bytes(read8(&mut r)?);
    let seed = u64::from_le_bytes(read8(&mut r)?);
    let stream = u64::from_le_bytes(read8(&mut r)?);
    let n = u64::from_le_bytes(read8(&mut r)?) as usize;
    if n != bx.num_bonds() {
        return Err(Error::ConfigInvalid(format!("bond count {n} does not match box")));
    }
    let mut words = vec![0u64; n.div_ceil(64)];
    for w in words.iter_mut() {
        *w = u64::from_le_bytes(read8(&mut r)?);
    }
    let mut bits = BitVec::<u64, Lsb0>::from_vec(words);
    bits.truncate(n);
    Ok(Some(LatticeConfig { bx, p, seed, stream, bits }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_several() {
        let bx = LatticeBox::for_connection(5, 5).unwrap();
        let cfgs: Vec<_> = (0..3).map(|s| LatticeConfig::sample(0.45, bx, 17, s)).collect();
        let mut buf = Vec::new();
        for c in &cfgs {
            write_config(&mut buf, c).unwrap();
        }
        let mut r = buf.as_slice();
        for c in &cfgs {
            assert_eq!(read_config(&mut r).unwrap().as_ref(), Some(c));
        }
        assert!(read_config(&mut r).unwrap().is_none());
        assert!(read_config(&b"XXXX"[..]).is_err());
    }
}
