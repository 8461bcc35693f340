//! Periodic box discretization `[-L, L)^d` with its Fourier tables.
//!
//! Samples are stored row-major with the first axis slowest. Spectral
//! coefficients use FFT ordering along each axis and are normalized so that
//! `f(x) = sum_k c_k exp(i k.x)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

struct GridInner {
    dim: usize,
    n: usize,
    half_side: f64,
    wavenumbers: Vec<f64>,
    ksq: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.inner.dim)
            .field("n", &self.inner.n)
            .field("half_side", &self.inner.half_side)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.dim == other.inner.dim
                && self.inner.n == other.inner.n
                && self.inner.half_side == other.inner.half_side)
    }
}

/// Signed mode number of FFT slot `j` on an axis with `n` points.
#[inline]
pub fn signed_mode(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// FFT slot of signed mode `m`.
#[inline]
pub fn slot_of_mode(m: i64, n: usize) -> usize {
    m.rem_euclid(n as i64) as usize
}

impl Grid {
    pub fn new(dim: usize, n: usize, half_side: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidDimension(dim));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidSize(n));
        }
        if !(half_side > 0.0) || !half_side.is_finite() {
            return Err(Error::NonPositiveLength(half_side));
        }
        let wavenumbers: Vec<f64> = (0..n)
            .map(|j| PI * signed_mode(j, n) as f64 / half_side)
            .collect();
        let len = n.pow(dim as u32);
        let mut ksq = vec![0.0; len];
        let mut idx = [0usize; 3];
        for (flat, slot) in ksq.iter_mut().enumerate() {
            unflatten(flat, dim, n, &mut idx);
            *slot = idx[..dim].iter().map(|&j| wavenumbers[j].powi(2)).sum();
        }
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            inner: Arc::new(GridInner {
                dim,
                n,
                half_side,
                wavenumbers,
                ksq,
                forward,
                inverse,
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn half_side(&self) -> f64 {
        self.inner.half_side
    }

    /// Grid spacing `2L/n`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.inner.half_side / self.inner.n as f64
    }

    /// Number of samples `n^d`.
    pub fn len(&self) -> usize {
        self.inner.ksq.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Riemann-sum weight `(2L/n)^d`.
    pub fn cell_measure(&self) -> f64 {
        self.spacing().powi(self.inner.dim as i32)
    }

    /// Box volume `(2L)^d`.
    pub fn volume(&self) -> f64 {
        (2.0 * self.inner.half_side).powi(self.inner.dim as i32)
    }

    /// Per-axis wavenumber table in FFT slot order.
    pub fn wavenumbers(&self) -> &[f64] {
        &self.inner.wavenumbers
    }

    /// `|k|^2` for every spectral slot (flat, FFT order).
    pub fn k_squared(&self) -> &[f64] {
        &self.inner.ksq
    }

    /// Coordinate of index `m` along any axis.
    pub fn coordinate(&self, m: usize) -> f64 {
        -self.inner.half_side + m as f64 * self.spacing()
    }

    /// Axis indices of a flat sample or spectral index.
    pub fn unflatten(&self, flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        unflatten(flat, self.inner.dim, self.inner.n, &mut idx);
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx[..self.inner.dim]
            .iter()
            .fold(0, |acc, &i| acc * self.inner.n + i)
    }

    /// Physical point of a flat index; unused axes are zero.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let mut x = [0.0; 3];
        for a in 0..self.inner.dim {
            x[a] = self.coordinate(idx[a]);
        }
        x
    }

    /// Wavevector of a flat spectral slot; unused axes are zero.
    pub fn wavevector(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let mut k = [0.0; 3];
        for a in 0..self.inner.dim {
            k[a] = self.inner.wavenumbers[idx[a]];
        }
        k
    }

    /// Signed mode numbers of a flat spectral slot.
    pub fn modes(&self, flat: usize) -> [i64; 3] {
        let idx = self.unflatten(flat);
        let mut m = [0i64; 3];
        for a in 0..self.inner.dim {
            m[a] = signed_mode(idx[a], self.inner.n);
        }
        m
    }

    /// Largest retained mode number per axis under the two-thirds rule.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.inner.n / 3) as i64
    }

    /// Whether the slot survives two-thirds truncation.
    pub fn is_resolved(&self, flat: usize) -> bool {
        let c = self.dealias_cutoff();
        self.modes(flat)[..self.inner.dim]
            .iter()
            .all(|m| m.abs() <= c)
    }

    /// Physical samples to normalized spectral coefficients, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, true);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
    }

    /// Normalized spectral coefficients to physical samples, in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    fn transform(&self, data: &mut [Complex64], forward: bool) {
        debug_assert_eq!(data.len(), self.len());
        let n = self.inner.n;
        let dim = self.inner.dim;
        let plan = if forward {
            &self.inner.forward
        } else {
            &self.inner.inverse
        };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        // innermost axis is contiguous
        plan.process_with_scratch(data, &mut scratch);
        if dim == 1 {
            return;
        }
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for axis in 0..dim - 1 {
            let stride = n.pow((dim - 1 - axis) as u32);
            let block = stride * n;
            for base in (0..data.len()).step_by(block) {
                for offset in 0..stride {
                    let start = base + offset;
                    for (i, v) in line.iter_mut().enumerate() {
                        *v = data[start + i * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (i, v) in line.iter().enumerate() {
                        data[start + i * stride] = *v;
                    }
                }
            }
        }
    }
}

fn unflatten(mut flat: usize, dim: usize, n: usize, out: &mut [usize; 3]) {
    for a in (0..dim).rev() {
        out[a] = flat % n;
        flat /= n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_wavenumbers_when_half_side_is_pi() {
        let g = Grid::new(1, 8, PI).unwrap();
        let mut ks: Vec<f64> = g.wavenumbers().to_vec();
        ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected: Vec<f64> = (-4..4).map(|m| m as f64).collect();
        for (a, b) in ks.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn three_d_grid_spacing() {
        let g = Grid::new(3, 16, 8.0).unwrap();
        assert_eq!(g.len(), 4096);
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.coordinate(0), -8.0);
        assert_eq!(g.coordinate(8), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(Grid::new(2, 7, 1.0), Err(Error::InvalidSize(7))));
        assert!(matches!(Grid::new(2, 4, 1.0), Err(Error::InvalidSize(4))));
        assert!(matches!(Grid::new(4, 8, 1.0), Err(Error::InvalidDimension(4))));
        assert!(matches!(Grid::new(0, 8, 1.0), Err(Error::InvalidDimension(0))));
        assert!(matches!(Grid::new(1, 8, 0.0), Err(Error::NonPositiveLength(_))));
        assert!(matches!(Grid::new(1, 8, -2.0), Err(Error::NonPositiveLength(_))));
    }

    #[test]
    fn wavenumber_table_symmetric_except_nyquist() {
        let g = Grid::new(1, 16, 3.0).unwrap();
        let ks = g.wavenumbers();
        assert_eq!(ks.len(), 16);
        for m in 1..8 {
            assert!((ks[m] + ks[16 - m]).abs() < 1e-14);
        }
        assert!((ks[8] + PI * 8.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn flatten_roundtrip() {
        let g = Grid::new(3, 8, 1.0).unwrap();
        for flat in [0, 1, 7, 8, 63, 64, 511] {
            let idx = g.unflatten(flat);
            assert_eq!(g.flatten(&idx), flat);
        }
        // first axis slowest
        assert_eq!(g.unflatten(64), [1, 0, 0]);
    }

    #[test]
    fn forward_inverse_roundtrip_3d() {
        let g = Grid::new(3, 8, 2.0).unwrap();
        let orig: Vec<Complex64> = (0..g.len())
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut data = orig.clone();
        g.forward(&mut data);
        g.inverse(&mut data);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn plane_wave_lands_in_single_slot() {
        let g = Grid::new(2, 8, PI).unwrap();
        let mut data: Vec<Complex64> = (0..g.len())
            .map(|i| {
                let x = g.point(i);
                Complex64::from_polar(1.0, 2.0 * x[0] - 3.0 * x[1])
            })
            .collect();
        g.forward(&mut data);
        let target = g.flatten(&[slot_of_mode(2, 8), slot_of_mode(-3, 8)]);
        for (i, c) in data.iter().enumerate() {
            let expected = if i == target { 1.0 } else { 0.0 };
            assert!((c.norm() - expected).abs() < 1e-13, "slot {i}");
        }
    }
}
