//! Binary field dumps.
//!
//! Layout (little-endian): magic `RGPE`, format version `u32`, dim `u32`,
//! per-axis size `u32`, per-axis half-width `f64`, time `f64`, frame `u8`
//! (0 rotating, 1 lab), then the complex values as `(re, im)` `f64` pairs in
//! row-major order.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;

use super::field::{Field, Frame};
use super::grid::Grid;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RGPE";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_field(field: &Field, mut out: impl Write) -> Result<()> {
    let grid = field.grid();
    let mut buf = Vec::with_capacity(32 + 16 * grid.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(grid.dim() as u32).to_le_bytes());
    for &n in grid.sizes() {
        buf.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for &l in grid.half_widths() {
        buf.extend_from_slice(&l.to_le_bytes());
    }
    buf.extend_from_slice(&field.time.to_le_bytes());
    buf.push(field.frame.code());
    for z in field.values() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

fn read_array<const N: usize>(input: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    input
        .read_exact(&mut b)
        .map_err(|e| Error::Format(format!("truncated dump: {e}")))?;
    Ok(b)
}

fn read_u32(input: &mut impl Read) -> Result<u32> {
    read_array::<4>(input).map(u32::from_le_bytes)
}

fn read_f64(input: &mut impl Read) -> Result<f64> {
    read_array::<8>(input).map(f64::from_le_bytes)
}

/// Reads a dump, rebuilding its grid.
pub fn read_field(mut input: impl Read) -> Result<Field> {
    let magic = read_array::<4>(&mut input)?;
    if &magic != MAGIC {
        return Err(Error::Format("missing RGPE magic".into()));
    }
    let version = read_u32(&mut input)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let dim = read_u32(&mut input)? as usize;
    if !(dim == 2 || dim == 3) {
        return Err(Error::Format(format!("unsupported dimension {dim}")));
    }
    let sizes = (0..dim)
        .map(|_| read_u32(&mut input).map(|n| n as usize))
        .collect::<Result<Vec<_>>>()?;
    let half_widths = (0..dim)
        .map(|_| read_f64(&mut input))
        .collect::<Result<Vec<_>>>()?;
    let time = read_f64(&mut input)?;
    let frame_code = read_array::<1>(&mut input)?[0];
    let frame = Frame::from_code(frame_code)
        .ok_or_else(|| Error::Format(format!("unknown frame code {frame_code}")))?;
    let grid = Arc::new(Grid::new(dim, &half_widths, &sizes)?);
    let mut values = Vec::with_capacity(grid.len());
    for _ in 0..grid.len() {
        let re = read_f64(&mut input)?;
        let im = read_f64(&mut input)?;
        values.push(Complex64::new(re, im));
    }
    Field::new(grid, values, frame, time)
}

/// Plain-text density matrix for dim-2 fields: one row per first-axis index.
pub fn write_density_text(field: &Field, mut out: impl Write) -> Result<()> {
    let grid = field.grid();
    if grid.dim() != 2 {
        return Err(Error::InvalidArgument(
            "density text output requires a 2-D field".into(),
        ));
    }
    let n1 = grid.sizes()[1];
    for row in field.values().chunks(n1) {
        let line: Vec<String> = row.iter().map(|z| format!("{:.10e}", z.norm_sqr())).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::grid::make_grid;

    #[test]
    fn header_layout() {
        let g = make_grid(2, &[10.0, 5.0], &[4, 6]).unwrap();
        let f = Field::from_fn(g, Frame::Lab, 1.5, |xi| Complex64::new(xi[0], xi[1]));
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        assert_eq!(&buf[0..4], b"RGPE");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(buf[16..20].try_into().unwrap()), 6);
        assert_eq!(f64::from_le_bytes(buf[20..28].try_into().unwrap()), 10.0);
        assert_eq!(f64::from_le_bytes(buf[28..36].try_into().unwrap()), 5.0);
        assert_eq!(f64::from_le_bytes(buf[36..44].try_into().unwrap()), 1.5);
        assert_eq!(buf[44], 1);
        assert_eq!(buf.len(), 45 + 24 * 16);
        // second value: xi = (-10, -5 + 5/3)
        let re = f64::from_le_bytes(buf[61..69].try_into().unwrap());
        let im = f64::from_le_bytes(buf[69..77].try_into().unwrap());
        assert_eq!(re, -10.0);
        assert!((im - (-5.0 + 10.0 / 6.0)).abs() < 1e-15);
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let g = make_grid(3, &[1.0, 2.0, 3.0], &[4, 4, 6]).unwrap();
        let f = Field::from_fn(g, Frame::Rotating, 0.25, |xi| {
            Complex64::new(xi[0].sin() * xi[2], xi[1].exp())
        });
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        let back = read_field(buf.as_slice()).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(back.time, f.time);
        assert_eq!(back.frame, f.frame);
        assert!(back.grid().same_geometry(f.grid()));
    }

    #[test]
    fn rejects_truncated_and_corrupt_input() {
        let g = make_grid(2, &[1.0, 1.0], &[4, 4]).unwrap();
        let f = Field::zeros(g, Frame::Rotating, 0.0);
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        assert!(read_field(&buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_field(bad.as_slice()).is_err());
        let mut bad_frame = buf;
        bad_frame[44] = 7;
        assert!(read_field(bad_frame.as_slice()).is_err());
    }
}
