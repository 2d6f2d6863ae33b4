//! HWF1 field files.
//!
//! Layout, all little-endian:
//!
//! | offset            | content                                   |
//! |-------------------|-------------------------------------------|
//! | 0..4              | magic `HWF1`                              |
//! | 4..8              | `u32` dim                                 |
//! | next `4·dim`      | `u32` points per axis                     |
//! | next `8·dim`      | `f64` box length per axis                 |
//! | rest              | `N^d` pairs of `f64` (re, im), row-major  |
//!
//! Grids are cubic, so every axis must carry the same `N` and `L`.

use std::fs;
use std::path::Path;

use num_complex::Complex;

use crate::grid::{Field, Grid, MAX_DIM};
use crate::{Error, Real, Result};

pub const MAGIC: &[u8; 4] = b"HWF1";

pub fn encode<T: Real>(field: &Field<T>) -> Vec<u8> {
    let grid = field.grid();
    let dim = grid.dim();
    let mut out = Vec::with_capacity(8 + 12 * dim + 16 * grid.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for _ in 0..dim {
        out.extend_from_slice(&(grid.n() as u32).to_le_bytes());
    }
    for _ in 0..dim {
        out.extend_from_slice(&grid.length().as_f64().to_le_bytes());
    }
    for v in field.values() {
        out.extend_from_slice(&v.re.as_f64().to_le_bytes());
        out.extend_from_slice(&v.im.as_f64().to_le_bytes());
    }
    out
}

pub fn decode<T: Real>(bytes: &[u8], path: &Path) -> Result<Field<T>> {
    let format = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let truncated = |expected: usize| Error::Truncated {
        path: path.to_path_buf(),
        expected: expected as u64,
        actual: bytes.len() as u64,
    };
    if bytes.len() < 8 {
        return Err(truncated(8));
    }
    if &bytes[..4] != MAGIC {
        return Err(format(format!("bad magic {:?}", &bytes[..4])));
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if !(1..=MAX_DIM).contains(&dim) {
        return Err(format(format!("unsupported dimension {dim}")));
    }
    let header = 8 + 12 * dim;
    if bytes.len() < header {
        return Err(truncated(header));
    }
    let ns: Vec<usize> = (0..dim)
        .map(|a| {
            let off = 8 + 4 * a;
            u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize
        })
        .collect();
    let ls: Vec<f64> = (0..dim)
        .map(|a| {
            let off = 8 + 4 * dim + 8 * a;
            f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap())
        })
        .collect();
    if ns.iter().any(|&n| n != ns[0]) || ls.iter().any(|&l| l.to_bits() != ls[0].to_bits()) {
        return Err(format(format!("non-cubic grid N={ns:?} L={ls:?}")));
    }
    let grid = Grid::new(dim, ns[0], T::lit(ls[0])).map_err(|e| format(e.to_string()))?;
    let expected = header + 16 * grid.len();
    if bytes.len() != expected {
        return Err(truncated(expected));
    }
    let values = bytes[header..]
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().unwrap());
            let im = f64::from_le_bytes(c[8..].try_into().unwrap());
            Complex::new(T::lit(re), T::lit(im))
        })
        .collect();
    Field::new(grid, values).map_err(|e| format(e.to_string()))
}

pub fn write_field<T: Real>(field: &Field<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(field)).map_err(|e| Error::io(path, e))
}

pub fn read_field<T: Real>(path: impl AsRef<Path>) -> Result<Field<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Reads a field and checks it lives on `grid`.
pub fn read_field_on<T: Real>(path: impl AsRef<Path>, grid: &Grid<T>) -> Result<Field<T>> {
    let field = read_field(path)?;
    field.grid().ensure_same(grid)?;
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_exact() {
        let g = Grid::<f64>::new(2, 4, 2.5).unwrap();
        let f = Field::from_fn(g, |x| Complex::new(x[0], x[1])).unwrap();
        let bytes = encode(&f);
        assert_eq!(&bytes[..4], b"HWF1");
        assert_eq!(bytes[4..8], 2u32.to_le_bytes());
        assert_eq!(bytes[8..12], 4u32.to_le_bytes());
        assert_eq!(bytes[12..16], 4u32.to_le_bytes());
        assert_eq!(bytes[16..24], 2.5f64.to_le_bytes());
        assert_eq!(bytes[24..32], 2.5f64.to_le_bytes());
        assert_eq!(bytes.len(), 32 + 16 * 16);
        // first sample: x = (-1.25, -1.25)
        assert_eq!(bytes[32..40], (-1.25f64).to_le_bytes());
        assert_eq!(bytes[40..48], (-1.25f64).to_le_bytes());
    }

    #[test]
    fn truncated_payload_names_sizes() {
        let g = Grid::<f64>::new(1, 8, 1.0).unwrap();
        let bytes = encode(&Field::zeros(g));
        let err = decode::<f64>(&bytes[..bytes.len() - 3], Path::new("x.hwf")).unwrap_err();
        match err {
            Error::Truncated {
                expected, actual, ..
            } => {
                assert_eq!(expected, 8 + 12 + 128);
                assert_eq!(actual, 8 + 12 + 125);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn wrong_magic_is_format_error() {
        let g = Grid::<f64>::new(1, 8, 1.0).unwrap();
        let mut bytes = encode(&Field::zeros(g));
        bytes[3] = b'2';
        assert!(matches!(
            decode::<f64>(&bytes, Path::new("x")),
            Err(Error::Format { .. })
        ));
    }
}
