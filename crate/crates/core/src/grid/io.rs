//! Binary (`GFN1`) and CSV storage for grid functions.
//!
//! Binary layout, little-endian: magic `GFN1`, `u32 dim`, `u32 shape[dim]`,
//! `f64 origin[dim]`, `f64 spacing`, `f64 values[Π shape]` row-major.
//!
//! CSV layout: a header line `dim,shape...,origin...,spacing` followed by one
//! value per line.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{Geometry, GridFunction, DEFAULT_CELL_BUDGET, MAX_DIM};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GFN1";

pub fn to_bytes(f: &GridFunction) -> Vec<u8> {
    let g = f.geometry();
    let mut out = Vec::with_capacity(8 + 12 * g.dim() + 8 + 8 * g.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    for &n in g.shape() {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for &o in g.origin() {
        out.extend_from_slice(&o.to_le_bytes());
    }
    out.extend_from_slice(&g.spacing().to_le_bytes());
    for &v in f.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Truncated(what.to_string()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<GridFunction> {
    from_bytes_with_budget(buf, DEFAULT_CELL_BUDGET)
}

pub fn from_bytes_with_budget(buf: &[u8], cell_budget: usize) -> Result<GridFunction> {
    if buf.len() < 4 || &buf[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    let mut c = Cursor { buf, pos: 4 };
    let dim = c.u32("dimension")? as usize;
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::UnsupportedDimension(dim));
    }
    let shape = (0..dim)
        .map(|_| c.u32("shape").map(|n| n as usize))
        .collect::<Result<Vec<_>>>()?;
    let origin = (0..dim).map(|_| c.f64("origin")).collect::<Result<Vec<_>>>()?;
    let spacing = c.f64("spacing")?;
    let geometry = Geometry::with_budget(shape, origin, spacing, cell_budget)?;
    let n = geometry.len();
    if (buf.len() - c.pos) / 8 < n {
        return Err(Error::Truncated(format!(
            "expected {n} values, found {}",
            (buf.len() - c.pos) / 8
        )));
    }
    let values = (0..n).map(|_| c.f64("values")).collect::<Result<Vec<_>>>()?;
    if c.pos != buf.len() {
        return Err(Error::invalid(format!(
            "{} trailing bytes after values",
            buf.len() - c.pos
        )));
    }
    GridFunction::new(geometry, values)
}

pub fn write_gridfn(f: &GridFunction, path: impl AsRef<Path>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&to_bytes(f))?;
    Ok(())
}

pub fn read_gridfn(path: impl AsRef<Path>) -> Result<GridFunction> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    from_bytes(&buf)
}

/// CSV form. Values are printed with Rust's shortest round-trip formatting,
/// so this path is bit-exact as well.
pub fn to_csv(f: &GridFunction) -> String {
    let g = f.geometry();
    let mut header = vec![g.dim().to_string()];
    header.extend(g.shape().iter().map(|n| n.to_string()));
    header.extend(g.origin().iter().map(|o| format!("{o:?}")));
    header.push(format!("{:?}", g.spacing()));
    let mut out = header.join(",");
    out.push('\n');
    for v in f.values() {
        out.push_str(&format!("{v:?}\n"));
    }
    out
}

pub fn from_csv(reader: impl Read) -> Result<GridFunction> {
    let mut lines = BufReader::new(reader)
        .lines()
        .map(|l| l.map_err(Error::from))
        .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty() || s.trim_start().starts_with('#')));
    let header = lines.next().ok_or(Error::BadMagic)??;
    let fields: Vec<&str> = header.split(',').map(str::trim).collect();
    let num = |s: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::Parse(format!("bad number {s:?} in csv header")))
    };
    let dim: usize = fields[0]
        .parse()
        .map_err(|_| Error::Parse(format!("bad dimension {:?}", fields[0])))?;
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::UnsupportedDimension(dim));
    }
    if fields.len() != 2 + 2 * dim {
        return Err(Error::Parse(format!(
            "csv header has {} fields, expected {}",
            fields.len(),
            2 + 2 * dim
        )));
    }
    let shape = fields[1..=dim]
        .iter()
        .map(|s| s.parse::<usize>().map_err(|_| Error::Parse(format!("bad shape {s:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let origin = fields[1 + dim..1 + 2 * dim]
        .iter()
        .map(|s| num(s))
        .collect::<Result<Vec<_>>>()?;
    let spacing = num(fields[1 + 2 * dim])?;
    let geometry = Geometry::new(shape, origin, spacing)?;
    let mut values = Vec::with_capacity(geometry.len());
    for line in lines {
        let line = line?;
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad value {:?}", line.trim())))?;
        values.push(v);
    }
    GridFunction::new(geometry, values)
}

/// Reads either format: CSV when the extension is `.csv`, binary otherwise.
pub fn load(path: impl AsRef<Path>) -> Result<GridFunction> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        from_csv(fs::File::open(path)?)
    } else {
        read_gridfn(path)
    }
}

/// Writes CSV when the extension is `.csv`, binary otherwise.
pub fn save(f: &GridFunction, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        fs::write(path, to_csv(f))?;
        Ok(())
    } else {
        write_gridfn(f, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GridFunction {
        let g = Geometry::new(vec![4, 2], vec![-0.5, 1.0 / 3.0], 0.125).unwrap();
        GridFunction::from_fn(&g, |x| (7.0 * x[0]).sin() / (1.0 + x[1]) + 1e-300).unwrap()
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let f = sample();
        let back = from_bytes(&to_bytes(&f)).unwrap();
        assert_eq!(back.geometry(), f.geometry());
        for (a, b) in f.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let f = sample();
        let back = from_csv(to_csv(&f).as_bytes()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn empty_input_is_bad_magic() {
        assert!(matches!(from_bytes(&[]), Err(Error::BadMagic)));
        assert_eq!(Error::BadMagic.to_string(), "bad magic");
    }

    #[test]
    fn dim_four_rejected() {
        let mut buf = MAGIC.to_vec();
        buf.extend_from_slice(&4u32.to_le_bytes());
        let err = from_bytes(&buf).unwrap_err();
        assert!(err.to_string().contains("unsupported dimension"));
    }

    #[test]
    fn oversized_shape_rejected_before_reading_values() {
        let mut buf = MAGIC.to_vec();
        buf.extend_from_slice(&2u32.to_le_bytes());
        buf.extend_from_slice(&u32::MAX.to_le_bytes());
        buf.extend_from_slice(&u32::MAX.to_le_bytes());
        buf.extend_from_slice(&0f64.to_le_bytes());
        buf.extend_from_slice(&0f64.to_le_bytes());
        buf.extend_from_slice(&1f64.to_le_bytes());
        assert!(matches!(from_bytes(&buf), Err(Error::ShapeOverflow(_))));
    }

    #[test]
    fn non_finite_values_rejected() {
        let g = Geometry::unit_box(1, 2).unwrap();
        let mut bytes = to_bytes(&GridFunction::zeros(&g));
        let n = bytes.len();
        bytes[n - 8..].copy_from_slice(&f64::INFINITY.to_le_bytes());
        assert!(matches!(from_bytes(&bytes), Err(Error::NonFinite(1))));
    }

    #[test]
    fn truncated_values_rejected() {
        let bytes = to_bytes(&sample());
        assert!(matches!(
            from_bytes(&bytes[..bytes.len() - 3]),
            Err(Error::Truncated(_))
        ));
    }
}
