//! Binary dataset container.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "RSLB"
//! 4       4           version (u32 LE)
//! 8       1           kind: 1 = karcher, 2 = eig
//! 9       8           dim0 (u64 LE): n (karcher) or d (eig)
//! 17      8           dim1 (u64 LE): count (karcher) or N (eig)
//! 25      8·payload   f64 LE, column-major; karcher: count n×n matrices
//!                     back to back, eig: the d×N data matrix
//! ...     8           seed (u64 LE)
//! ...     8           generator parameter (f64 LE): cond or gap
//! ```

use std::fmt::Write as _;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use super::{EigData, KarcherData};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RSLB";
pub const VERSION: u32 = 1;

const KIND_KARCHER: u8 = 1;
const KIND_EIG: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Karcher(KarcherData),
    Eig(EigData),
}

impl Dataset {
    pub fn kind(&self) -> &'static str {
        match self {
            Dataset::Karcher(_) => "karcher",
            Dataset::Eig(_) => "eig",
        }
    }

    pub fn header(&self) -> DatasetHeader {
        match self {
            Dataset::Karcher(k) => DatasetHeader {
                kind: "karcher",
                dim0: k.n as u64,
                dim1: k.count() as u64,
                seed: k.seed,
                param: k.cond,
            },
            Dataset::Eig(e) => DatasetHeader {
                kind: "eig",
                dim0: e.dim() as u64,
                dim1: e.samples() as u64,
                seed: e.seed,
                param: e.gap,
            },
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        write_dataset(&mut out, self).expect("writing to a Vec cannot fail");
        out
    }
}

/// The fixed-size fields, for the plain-text dump.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetHeader {
    pub kind: &'static str,
    pub dim0: u64,
    pub dim1: u64,
    pub seed: u64,
    pub param: f64,
}

impl DatasetHeader {
    pub fn to_text(&self, fingerprint: &str) -> String {
        let (d0, d1, p) = match self.kind {
            "karcher" => ("n", "count", "cond"),
            _ => ("d", "samples", "gap"),
        };
        let mut s = String::new();
        let _ = writeln!(s, "magic=RSLB");
        let _ = writeln!(s, "version={VERSION}");
        let _ = writeln!(s, "kind={}", self.kind);
        let _ = writeln!(s, "{d0}={}", self.dim0);
        let _ = writeln!(s, "{d1}={}", self.dim1);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "{p}={:.17e}", self.param);
        let _ = writeln!(s, "fingerprint={fingerprint}");
        s
    }
}

fn put_f64s<W: Write>(w: &mut W, m: &DMatrix<f64>) -> std::io::Result<()> {
    for v in m.as_slice() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_dataset<W: Write>(w: &mut W, ds: &Dataset) -> Result<()> {
    let h = ds.header();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[match ds {
        Dataset::Karcher(_) => KIND_KARCHER,
        Dataset::Eig(_) => KIND_EIG,
    }])?;
    w.write_all(&h.dim0.to_le_bytes())?;
    w.write_all(&h.dim1.to_le_bytes())?;
    match ds {
        Dataset::Karcher(k) => {
            for m in &k.matrices {
                put_f64s(w, m)?;
            }
        }
        Dataset::Eig(e) => put_f64s(w, &e.data)?,
    }
    w.write_all(&h.seed.to_le_bytes())?;
    w.write_all(&h.param.to_le_bytes())?;
    Ok(())
}

fn get<const K: usize, R: Read>(r: &mut R) -> Result<[u8; K]> {
    let mut b = [0u8; K];
    r.read_exact(&mut b).map_err(|e| Error::Format(format!("truncated container: {e}")))?;
    Ok(b)
}

fn get_matrix<R: Read>(r: &mut R, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    let mut buf = vec![0u8; rows * cols * 8];
    r.read_exact(&mut buf).map_err(|e| Error::Format(format!("truncated payload: {e}")))?;
    let vals: Vec<f64> = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(DMatrix::from_vec(rows, cols, vals))
}

pub fn read_dataset<R: Read>(r: &mut R) -> Result<Dataset> {
    let magic: [u8; 4] = get(r)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(get(r)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let [kind] = get::<1, _>(r)?;
    let dim0 = usize::try_from(u64::from_le_bytes(get(r)?)).map_err(|_| Error::Format("dim0 overflow".into()))?;
    let dim1 = usize::try_from(u64::from_le_bytes(get(r)?)).map_err(|_| Error::Format("dim1 overflow".into()))?;
    let ds = match kind {
        KIND_KARCHER => {
            let mut matrices = Vec::with_capacity(dim1);
            for _ in 0..dim1 {
                matrices.push(get_matrix(r, dim0, dim0)?);
            }
            let seed = u64::from_le_bytes(get(r)?);
            let cond = f64::from_le_bytes(get(r)?);
            Dataset::Karcher(KarcherData { n: dim0, matrices, cond, seed })
        }
        KIND_EIG => {
            let data = get_matrix(r, dim0, dim1)?;
            let seed = u64::from_le_bytes(get(r)?);
            let gap = f64::from_le_bytes(get(r)?);
            Dataset::Eig(EigData { data, gap, seed })
        }
        k => return Err(Error::Format(format!("unknown dataset kind {k}"))),
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after container".into()));
    }
    Ok(ds)
}

/// SHA-256 of the serialized container, hex encoded.
pub fn fingerprint(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{gen_eig_data, gen_spd_data};
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let ds = Dataset::Karcher(gen_spd_data(2, 1, 4.0, 42).unwrap());
        let b = ds.to_bytes();
        assert_eq!(&b[0..4], b"RSLB");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(b[8], 1);
        assert_eq!(u64::from_le_bytes(b[9..17].try_into().unwrap()), 2);
        assert_eq!(u64::from_le_bytes(b[17..25].try_into().unwrap()), 1);
        assert_eq!(b.len(), 25 + 4 * 8 + 16);
        assert_eq!(u64::from_le_bytes(b[57..65].try_into().unwrap()), 42);
        assert_eq!(f64::from_le_bytes(b[65..73].try_into().unwrap()), 4.0);
    }

    #[test]
    fn rejects_corrupt_input() {
        let ds = Dataset::Eig(gen_eig_data(3, 5, 0.2, 1).unwrap());
        let mut b = ds.to_bytes();
        assert!(read_dataset(&mut &b[..b.len() - 1]).is_err());
        let mut extra = b.clone();
        extra.push(0);
        assert!(read_dataset(&mut &extra[..]).is_err());
        b[0] = b'X';
        assert!(read_dataset(&mut &b[..]).is_err());
    }

    #[test]
    fn text_header() {
        let ds = Dataset::Eig(gen_eig_data(3, 5, 0.25, 9).unwrap());
        let fp = fingerprint(&ds.to_bytes());
        let t = ds.header().to_text(&fp);
        assert!(t.contains("kind=eig\n"));
        assert!(t.contains("d=3\nsamples=5\nseed=9\n"));
        assert!(t.contains(&format!("fingerprint={fp}")));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(n in 1usize..5, count in 1usize..4, cond in 1.0f64..1e3, seed: u64, d in 2usize..6, gap in 0.01f64..0.99) {
            let cond = if n == 1 { 1.0 } else { cond };
            for ds in [
                Dataset::Karcher(gen_spd_data(n, count, cond, seed).unwrap()),
                Dataset::Eig(gen_eig_data(d, d + 3, gap, seed).unwrap()),
            ] {
                let bytes = ds.to_bytes();
                let back = read_dataset(&mut &bytes[..]).unwrap();
                prop_assert_eq!(back.to_bytes(), bytes);
            }
        }
    }
}
