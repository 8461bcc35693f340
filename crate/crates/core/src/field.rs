use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{slot_of_mode, Grid};

/// Complex samples on a [`Grid`].
#[derive(Clone, Debug)]
pub struct Field {
    grid: Grid,
    values: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFiniteField);
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Samples `f` at every grid point; unused coordinates are passed as zero.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                f(&x[..dim])
            })
            .collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_real_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    /// `exp(i k.x)` for the signed mode numbers `modes` (one per axis).
    pub fn plane_wave(grid: &Grid, modes: &[i64]) -> Self {
        let ks: Vec<f64> = modes
            .iter()
            .map(|&m| grid.wavenumbers()[slot_of_mode(m, grid.n())])
            .collect();
        Self::from_fn(grid, |x| {
            let phase: f64 = x.iter().zip(&ks).map(|(xi, ki)| xi * ki).sum();
            Complex64::from_polar(1.0, phase)
        })
    }

    /// Isotropic Gaussian `amplitude * exp(-|x - center|^2 / (2 width^2))`.
    pub fn gaussian(grid: &Grid, center: &[f64], width: f64, amplitude: f64) -> Self {
        Self::from_real_fn(grid, |x| {
            let r2: f64 = x
                .iter()
                .enumerate()
                .map(|(a, xi)| (xi - center.get(a).copied().unwrap_or(0.0)).powi(2))
                .sum();
            amplitude * (-r2 / (2.0 * width * width)).exp()
        })
    }

    /// Builds a field from normalized spectral coefficients.
    pub fn from_spectrum(grid: &Grid, mut coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: coeffs.len(),
            });
        }
        grid.inverse(&mut coeffs);
        Self::from_values(grid, coeffs)
    }

    pub(crate) fn from_spectrum_unchecked(grid: &Grid, mut coeffs: Vec<Complex64>) -> Self {
        grid.inverse(&mut coeffs);
        Self {
            grid: grid.clone(),
            values: coeffs,
        }
    }

    pub(crate) fn from_values_unchecked(grid: &Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values,
        }
    }

    /// Normalized spectral coefficients in FFT order.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut c = self.values.clone();
        self.grid.forward(&mut c);
        c
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn scaled(&self, s: Complex64) -> Field {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn scaled_real(&self, s: f64) -> Field {
        self.scaled(Complex64::new(s, 0.0))
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: Complex64, other: &Field) -> Result<Field> {
        self.same_grid(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
        })
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.add_scaled(Complex64::new(1.0, 0.0), other)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.add_scaled(Complex64::new(-1.0, 0.0), other)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Field) -> Result<Field> {
        self.same_grid(other)?;
        Ok(Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    pub fn conj(&self) -> Field {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v.conj()).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Field {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Riemann-sum L^r norm, r in [1, inf].
    pub fn lp_norm(&self, r: f64) -> f64 {
        lp_norm_of(self.values.iter().map(|v| v.norm()), r, self.grid.cell_measure())
    }

    /// Riemann-sum L^2 norm.
    pub fn l2_norm(&self) -> f64 {
        self.lp_norm(2.0)
    }
}

pub(crate) fn lp_norm_of(magnitudes: impl Iterator<Item = f64>, r: f64, cell: f64) -> f64 {
    if r.is_infinite() {
        magnitudes.fold(0.0, f64::max)
    } else if r == 2.0 {
        (magnitudes.map(|m| m * m).sum::<f64>() * cell).sqrt()
    } else {
        (magnitudes.map(|m| m.powf(r)).sum::<f64>() * cell).powf(1.0 / r)
    }
}

/// Sobolev exponent `s` for the weight `(1 + |k|^2)^s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevIndex(f64);

impl SobolevIndex {
    pub const H1: SobolevIndex = SobolevIndex(1.0);
    pub const L2: SobolevIndex = SobolevIndex(0.0);
    pub const H_MINUS_1: SobolevIndex = SobolevIndex(-1.0);
    pub const H_MINUS_2: SobolevIndex = SobolevIndex(-2.0);

    pub fn new(s: f64) -> Result<Self> {
        if (-4.0..=4.0).contains(&s) {
            Ok(Self(s))
        } else {
            Err(Error::InvalidSobolevIndex(s))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `(1 + |k|^2)^s` given `|k|^2`.
    #[inline]
    pub fn weight(self, ksq: f64) -> f64 {
        let base = 1.0 + ksq;
        if self.0 == 0.0 {
            1.0
        } else if self.0 == 1.0 {
            base
        } else if self.0 == -1.0 {
            1.0 / base
        } else {
            base.powf(self.0)
        }
    }
}
