//! Binary field snapshots and text exports.
//!
//! Layout: a 32-byte little-endian header
//!
//! | bytes  | content                     |
//! |--------|-----------------------------|
//! | 0..4   | magic `QCF1`                |
//! | 4..8   | `u32` dimension             |
//! | 8..12  | `u32` points per axis       |
//! | 12..16 | zero padding                |
//! | 16..24 | `f64` half side `L`         |
//! | 24..32 | `u64` payload length, bytes |
//!
//! followed by `n^d` pairs `(re, im)` of `f64`, row-major (last axis fastest).

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::propagate::Trajectory;

pub const MAGIC: &[u8; 4] = b"QCF1";
pub const HEADER_LEN: usize = 32;

pub fn encode_field(f: &Field) -> Vec<u8> {
    let g = f.grid();
    let payload = (g.len() * 16) as u64;
    let mut out = Vec::with_capacity(HEADER_LEN + payload as usize);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(g.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(g.n() as u32).to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    out.extend_from_slice(&g.half_side().to_le_bytes());
    out.extend_from_slice(&payload.to_le_bytes());
    for v in f.values() {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

fn word<const N: usize>(bytes: &[u8], at: usize) -> [u8; N] {
    bytes[at..at + N].try_into().expect("slice length checked")
}

pub fn decode_field(bytes: &[u8]) -> Result<Field> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Snapshot(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let dim = u32::from_le_bytes(word(bytes, 4)) as usize;
    let n = u32::from_le_bytes(word(bytes, 8)) as usize;
    let half_side = f64::from_le_bytes(word(bytes, 16));
    let payload = u64::from_le_bytes(word(bytes, 24)) as usize;
    let grid = Grid::new(dim, n, half_side).map_err(|e| Error::Snapshot(format!("header: {e}")))?;
    if payload != grid.len() * 16 || bytes.len() != HEADER_LEN + payload {
        return Err(Error::Snapshot(format!(
            "payload of {} bytes does not match a {dim}-d grid of {n} points per axis",
            bytes.len() - HEADER_LEN
        )));
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(16)
        .map(|c| Complex64::new(f64::from_le_bytes(word(c, 0)), f64::from_le_bytes(word(c, 8))))
        .collect();
    Field::from_values(&grid, values)
}

pub fn write_field(path: &std::path::Path, f: &Field) -> Result<()> {
    std::fs::write(path, encode_field(f))?;
    Ok(())
}

pub fn read_field(path: &std::path::Path) -> Result<Field> {
    decode_field(&std::fs::read(path)?)
}

/// Spectrum table with header `k2,re,im`, one row per grid mode in storage
/// order.
pub fn spectrum_csv(f: &Field) -> String {
    let g = f.grid();
    let mut s = String::from("k2,re,im\n");
    for (c, k2) in f.spectrum().iter().zip(g.k_squared()) {
        let _ = writeln!(s, "{k2:.17e},{:.17e},{:.17e}", c.re, c.im);
    }
    s
}

/// The plane `x_3 = 0` of a 3-d field (index `n/2` on the last axis), with
/// header `x1,x2,re,im`. Lower-dimensional fields are written whole with
/// the missing coordinates omitted.
pub fn slice_csv(f: &Field) -> String {
    let g = f.grid();
    let n = g.n();
    let mut s = String::new();
    match g.dim() {
        1 => {
            s.push_str("x1,re,im\n");
            for (i, v) in f.values().iter().enumerate() {
                let _ = writeln!(s, "{:.17e},{:.17e},{:.17e}", g.coordinate(i), v.re, v.im);
            }
        }
        2 => {
            s.push_str("x1,x2,re,im\n");
            for (i, v) in f.values().iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{:.17e},{:.17e},{:.17e},{:.17e}",
                    g.coordinate(i / n),
                    g.coordinate(i % n),
                    v.re,
                    v.im
                );
            }
        }
        _ => {
            s.push_str("x1,x2,re,im\n");
            for a in 0..n {
                for b in 0..n {
                    let v = f.values()[g.flatten(&[a, b, n / 2])];
                    let _ = writeln!(
                        s,
                        "{:.17e},{:.17e},{:.17e},{:.17e}",
                        g.coordinate(a),
                        g.coordinate(b),
                        v.re,
                        v.im
                    );
                }
            }
        }
    }
    s
}

/// Index of a trajectory written as one snapshot per selected frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryIndex {
    pub times: Vec<f64>,
    pub frame_files: Vec<String>,
}

/// Frames `0, stride, 2 stride, ...` plus the last one, as
/// `(time, file name, bytes)`.
pub fn trajectory_frames(traj: &Trajectory, prefix: &str, stride: usize) -> (TrajectoryIndex, Vec<(String, Vec<u8>)>) {
    let nt = traj.times().nt();
    let mut picks: Vec<usize> = (0..=nt).step_by(stride.max(1)).collect();
    if picks.last() != Some(&nt) {
        picks.push(nt);
    }
    let mut index = TrajectoryIndex {
        times: Vec::new(),
        frame_files: Vec::new(),
    };
    let mut files = Vec::new();
    for m in picks {
        let name = format!("{prefix}_{m:06}.qcf");
        index.times.push(traj.times().time(m));
        index.frame_files.push(name.clone());
        files.push((name, encode_field(traj.frame(m))));
    }
    (index, files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_bit_exact() {
        let g = Grid::new(2, 8, 3.5).unwrap();
        let f = Field::from_fn(&g, |x| Complex64::new(x[0].sin(), x[1] * 0.1));
        let bytes = encode_field(&f);
        assert_eq!(bytes.len(), 32 + 64 * 16);
        assert_eq!(&bytes[..4], b"QCF1");
        let back = decode_field(&bytes).unwrap();
        assert_eq!(back.grid(), f.grid());
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn corrupt_inputs_rejected() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let mut bytes = encode_field(&Field::zeros(&g));
        assert!(decode_field(&bytes[..20]).is_err());
        assert!(decode_field(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(matches!(decode_field(&bytes), Err(Error::Snapshot(_))));
    }

    #[test]
    fn spectrum_rows() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let csv = spectrum_csv(&Field::plane_wave(&g, &[1]));
        assert_eq!(csv.lines().count(), 9);
        assert!(csv.starts_with("k2,re,im\n"));
    }

    #[test]
    fn slice_of_3d() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        let f = Field::from_real_fn(&g, |x| x[2]);
        let csv = slice_csv(&f);
        assert_eq!(csv.lines().count(), 65);
        // x_3 = 0 on the slice
        assert!(csv.lines().skip(1).all(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap() == 0.0));
    }
}
