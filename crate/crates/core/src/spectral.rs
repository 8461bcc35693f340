//! Fourier multiplier calculus, Sobolev norms and the Riesz map `(1 - Δ)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{Field, SobolevIndex};
use crate::grid::Grid;

/// Tail mass fraction above which coordinate multiplication is rejected.
pub const SUPPORT_TAIL_THRESHOLD: f64 = 1e-8;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `F^{-1}[symbol(k) F f]` for an arbitrary symbol of the wavevector.
pub fn apply_multiplier(f: &Field, symbol: impl Fn(&[f64]) -> Complex64) -> Result<Field> {
    let grid = f.grid();
    let dim = grid.dim();
    let mut c = f.spectrum();
    for (flat, ck) in c.iter_mut().enumerate() {
        let k = grid.wavevector(flat);
        let s = symbol(&k[..dim]);
        if !s.re.is_finite() || !s.im.is_finite() {
            return Err(Error::NonFiniteSymbol(k[..dim].to_vec()));
        }
        *ck *= s;
    }
    Field::from_spectrum(grid, c)
}

/// Radial multiplier given as a function of `|k|^2`; the hot path for all
/// propagators.
pub(crate) fn apply_radial(f: &Field, symbol: impl Fn(f64) -> Complex64) -> Field {
    let grid = f.grid();
    let mut c = f.spectrum();
    for (ck, &ksq) in c.iter_mut().zip(grid.k_squared()) {
        *ck *= symbol(ksq);
    }
    Field::from_spectrum_unchecked(grid, c)
}

fn apply_radial_real(f: &Field, symbol: impl Fn(f64) -> f64) -> Field {
    apply_radial(f, |ksq| Complex64::new(symbol(ksq), 0.0))
}

/// Weighted spectral sum `Re sum_k (1+|k|^2)^s a_k conj(b_k) * (2L)^d`.
pub(crate) fn spectral_pairing(grid: &Grid, a: &[Complex64], b: &[Complex64], s: SobolevIndex) -> f64 {
    let sum: f64 = a
        .iter()
        .zip(b)
        .zip(grid.k_squared())
        .map(|((x, y), &ksq)| s.weight(ksq) * (x * y.conj()).re)
        .sum();
    sum * grid.volume()
}

pub(crate) fn spectral_norm_sq(grid: &Grid, a: &[Complex64], s: SobolevIndex) -> f64 {
    let sum: f64 = a
        .iter()
        .zip(grid.k_squared())
        .map(|(x, &ksq)| s.weight(ksq) * x.norm_sqr())
        .sum();
    sum * grid.volume()
}

/// `H^s` norm, normalized so that `s = 0` is the Riemann-sum L^2 norm.
pub fn sobolev_norm(f: &Field, s: SobolevIndex) -> f64 {
    spectral_norm_sq(f.grid(), &f.spectrum(), s).sqrt()
}

/// Real `H^s` inner product; with `s = 0` this is the L^2 pivot pairing
/// `Re int f conj(g)`.
pub fn hs_inner(f: &Field, g: &Field, s: SobolevIndex) -> Result<f64> {
    f.same_grid(g)?;
    Ok(spectral_pairing(f.grid(), &f.spectrum(), &g.spectrum(), s))
}

/// Riesz map `H^1 -> H^{-1}`, symbol `1 + |k|^2`.
pub fn lambda_apply(f: &Field) -> Field {
    apply_radial_real(f, |ksq| 1.0 + ksq)
}

/// Inverse Riesz map `H^{-1} -> H^1`, symbol `1 / (1 + |k|^2)`.
pub fn lambda_inverse(f: &Field) -> Field {
    apply_radial_real(f, |ksq| 1.0 / (1.0 + ksq))
}

pub fn laplacian(f: &Field) -> Field {
    apply_radial_real(f, |ksq| -ksq)
}

/// Spectral `∂_axis`. The unpaired Nyquist mode is dropped so the
/// derivative of a real field stays real.
pub fn derivative(f: &Field, axis: usize) -> Field {
    let grid = f.grid();
    let n = grid.n();
    let mut c = f.spectrum();
    for (flat, ck) in c.iter_mut().enumerate() {
        let j = grid.unflatten(flat)[axis];
        let k = if j == n / 2 { 0.0 } else { grid.wavenumbers()[j] };
        *ck *= I * k;
    }
    Field::from_spectrum_unchecked(grid, c)
}

pub fn gradient(f: &Field) -> Vec<Field> {
    (0..f.grid().dim()).map(|a| derivative(f, a)).collect()
}

/// Pointwise `|∇f|`.
pub fn gradient_magnitude(f: &Field) -> Vec<f64> {
    let grads = gradient(f);
    (0..f.grid().len())
        .map(|i| grads.iter().map(|g| g.values()[i].norm_sqr()).sum::<f64>().sqrt())
        .collect()
}

/// The sawtooth coordinate `x_axis` of the box as a field.
pub fn coordinate_field(grid: &Grid, axis: usize) -> Field {
    Field::from_real_fn(grid, |x| x[axis])
}

/// Fraction of `∫|f|^2` carried by points with `|x_axis| > L/2`.
pub fn tail_mass_fraction(f: &Field, axis: usize) -> f64 {
    let grid = f.grid();
    let half = grid.half_side() / 2.0;
    let (mut tail, mut total) = (0.0, 0.0);
    for (i, v) in f.values().iter().enumerate() {
        let m = v.norm_sqr();
        total += m;
        if grid.point(i)[axis].abs() > half {
            tail += m;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// `P_j f = x_j f + 2 i t ∂_j f`.
///
/// The coordinate is the sawtooth of the periodic box, so the result is only
/// meaningful for fields concentrated in the inner half of the box.
pub fn apply_coordinate_op(f: &Field, axis: usize, t: f64) -> Result<Field> {
    let grid = f.grid();
    if axis >= grid.dim() {
        return Err(Error::InvalidInput(format!(
            "axis {axis} out of range for dimension {}",
            grid.dim()
        )));
    }
    let fraction = tail_mass_fraction(f, axis);
    if fraction > SUPPORT_TAIL_THRESHOLD {
        return Err(Error::SupportViolation {
            axis,
            fraction,
            threshold: SUPPORT_TAIL_THRESHOLD,
        });
    }
    let d = derivative(f, axis);
    let kick = Complex64::new(0.0, 2.0 * t);
    let values = f
        .values()
        .iter()
        .zip(d.values())
        .enumerate()
        .map(|(i, (v, dv))| grid.point(i)[axis] * v + kick * dv)
        .collect();
    Field::from_values(grid, values)
}

/// Two-thirds truncation: zeroes every mode with `|m| > n/3` on some axis.
pub fn dealias(f: &Field) -> Field {
    let grid = f.grid();
    let mut c = f.spectrum();
    dealias_spectrum(grid, &mut c);
    Field::from_spectrum_unchecked(grid, c)
}

pub(crate) fn dealias_spectrum(grid: &Grid, c: &mut [Complex64]) {
    for (flat, ck) in c.iter_mut().enumerate() {
        if !grid.is_resolved(flat) {
            *ck = Complex64::new(0.0, 0.0);
        }
    }
}

/// Largest spectral magnitude beyond the dealiasing cutoff, relative to the
/// largest magnitude overall.
pub fn spectral_tail(f: &Field) -> f64 {
    let grid = f.grid();
    let c = f.spectrum();
    let peak = c.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return 0.0;
    }
    let tail = c
        .iter()
        .enumerate()
        .filter(|(flat, _)| !grid.is_resolved(*flat))
        .map(|(_, v)| v.norm())
        .fold(0.0, f64::max);
    tail / peak
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    fn pseudo_random_field(grid: &Grid, seed: u64) -> Field {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let values = (0..grid.len()).map(|_| Complex64::new(next(), next())).collect();
        Field::from_values(grid, values).unwrap()
    }

    /// Direct O(n^2) DFT applying `symbol(k)` on a 1-D grid.
    fn dense_dft_multiplier(f: &Field, symbol: impl Fn(f64) -> f64) -> Vec<Complex64> {
        let g = f.grid();
        let n = g.n();
        let xs: Vec<f64> = (0..n).map(|m| g.coordinate(m)).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for mode in -(n as i64) / 2..(n as i64) / 2 {
            let k = PI * mode as f64 / g.half_side();
            let coeff: Complex64 = xs
                .iter()
                .zip(f.values())
                .map(|(x, v)| v * Complex64::from_polar(1.0, -k * x))
                .sum::<Complex64>()
                / n as f64;
            for (o, x) in out.iter_mut().zip(&xs) {
                *o += symbol(k) * coeff * Complex64::from_polar(1.0, k * x);
            }
        }
        out
    }

    #[test]
    fn multiplier_on_plane_wave() {
        let g = Grid::new(2, 16, 3.0).unwrap();
        let f = Field::plane_wave(&g, &[2, -3]);
        let kx = PI * 2.0 / 3.0;
        let ky = -PI;
        let sigma = |k: &[f64]| Complex64::new(k[0] * k[0] - 0.5, k[1]);
        let out = apply_multiplier(&f, sigma).unwrap();
        let expected = sigma(&[kx, ky]);
        for (o, v) in out.values().iter().zip(f.values()) {
            assert!((o - expected * v).norm() < 1e-12);
        }
    }

    #[test]
    fn identity_multiplier() {
        let g = Grid::new(1, 32, 2.0).unwrap();
        let f = pseudo_random_field(&g, 3);
        let out = apply_multiplier(&f, |_| Complex64::new(1.0, 0.0)).unwrap();
        for (o, v) in out.values().iter().zip(f.values()) {
            assert!((o - v).norm() < 1e-14);
        }
    }

    #[test]
    fn non_finite_symbol_rejected() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let f = Field::plane_wave(&g, &[1]);
        let r = apply_multiplier(&f, |k| Complex64::new(1.0 / k[0], 0.0));
        assert!(matches!(r, Err(Error::NonFiniteSymbol(_))));
    }

    #[test]
    fn laplacian_of_spike_matches_dense_dft() {
        let g = Grid::new(1, 8, 2.0).unwrap();
        let mut v = vec![Complex64::new(0.0, 0.0); 8];
        v[4] = Complex64::new(1.0, 0.0);
        let f = Field::from_values(&g, v).unwrap();
        let fast = apply_multiplier(&f, |k| Complex64::new(-k[0] * k[0], 0.0)).unwrap();
        let dense = dense_dft_multiplier(&f, |k| -k * k);
        for (a, b) in fast.values().iter().zip(&dense) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn sobolev_norm_examples() {
        let g = Grid::new(1, 16, PI).unwrap();
        let f = Field::plane_wave(&g, &[1]);
        let vol = 2.0 * PI;
        assert!(rel(sobolev_norm(&f, SobolevIndex::H1), 2f64.sqrt() * vol.sqrt()) < 1e-13);
        let c = Field::from_fn(&g, |_| Complex64::new(0.3, -0.4));
        for s in [SobolevIndex::H1, SobolevIndex::H_MINUS_2, SobolevIndex::new(3.5).unwrap()] {
            assert!(rel(sobolev_norm(&c, s), 0.5 * vol.sqrt()) < 1e-13);
        }
        let g3 = Grid::new(3, 8, PI).unwrap();
        let f3 = Field::plane_wave(&g3, &[0, 1, 0]);
        let vol3 = (2.0 * PI).powi(3);
        assert!(rel(sobolev_norm(&f3, SobolevIndex::H1), (2.0 * vol3).sqrt()) < 1e-13);
    }

    #[test]
    fn lambda_pair_and_norm_duality() {
        let g = Grid::new(2, 16, 4.0).unwrap();
        let f = pseudo_random_field(&g, 11);
        let back = lambda_inverse(&lambda_apply(&f));
        assert!(back.sub(&f).unwrap().l2_norm() / f.l2_norm() < 1e-13);
        let lhs = sobolev_norm(&lambda_inverse(&f), SobolevIndex::H1);
        let rhs = sobolev_norm(&f, SobolevIndex::H_MINUS_1);
        assert!(rel(lhs, rhs) < 1e-13);

        let wave = Field::plane_wave(&g, &[1, 2]);
        let ksq = (PI / 4.0).powi(2) * 5.0;
        let out = lambda_apply(&wave);
        for (o, v) in out.values().iter().zip(wave.values()) {
            assert!((o - (1.0 + ksq) * v).norm() < 1e-12);
        }
    }

    #[test]
    fn hs_inner_examples() {
        let g = Grid::new(1, 32, 3.0).unwrap();
        let f = pseudo_random_field(&g, 5);
        for s in [-2.0, -1.0, 0.0, 1.0] {
            let s = SobolevIndex::new(s).unwrap();
            assert!(rel(hs_inner(&f, &f, s).unwrap(), sobolev_norm(&f, s).powi(2)) < 1e-13);
        }
        let a = Field::plane_wave(&g, &[1]);
        let b = Field::plane_wave(&g, &[2]);
        assert!(hs_inner(&a, &b, SobolevIndex::H1).unwrap().abs() < 1e-12);
        // <Λf, f> in the pivot pairing is the H^1 norm squared; the pivot
        // side is a physical-space Riemann sum
        let lf = lambda_apply(&f);
        let pivot: f64 = lf
            .values()
            .iter()
            .zip(f.values())
            .map(|(a, b)| (a * b.conj()).re)
            .sum::<f64>()
            * g.cell_measure();
        assert!(rel(pivot, sobolev_norm(&f, SobolevIndex::H1).powi(2)) < 1e-12);
        let other = Field::zeros(&Grid::new(1, 16, 3.0).unwrap());
        assert!(matches!(hs_inner(&f, &other, SobolevIndex::L2), Err(Error::GridMismatch)));
    }

    #[test]
    fn coordinate_op_at_zero_time_is_coordinate_multiplication() {
        let g = Grid::new(1, 64, 10.0).unwrap();
        let f = Field::gaussian(&g, &[0.0], 1.0, 1.0);
        let out = apply_coordinate_op(&f, 0, 0.0).unwrap();
        for (i, (o, v)) in out.values().iter().zip(f.values()).enumerate() {
            assert!((o - g.coordinate(i) * v).norm() < 1e-15);
        }
        let zero = apply_coordinate_op(&Field::zeros(&g), 0, 0.7).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn coordinate_op_matches_finite_differences() {
        // fourth-order central differences of the closed-form Gaussian with a
        // step far below the grid spacing
        let g = Grid::new(1, 32, 8.0).unwrap();
        let gauss = |x: f64| (-x * x / 2.0).exp();
        let f = Field::from_real_fn(&g, |x| gauss(x[0]));
        let t = 0.1;
        let out = apply_coordinate_op(&f, 0, t).unwrap();
        let h = 1e-3;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..g.n() {
            let x = g.coordinate(i);
            let d = (-gauss(x + 2.0 * h) + 8.0 * gauss(x + h) - 8.0 * gauss(x - h)
                + gauss(x - 2.0 * h))
                / (12.0 * h);
            let oracle = Complex64::new(x * gauss(x), 2.0 * t * d);
            num += (out.values()[i] - oracle).norm_sqr();
            den += oracle.norm_sqr();
        }
        assert!((num / den).sqrt() < 1e-6, "relative diff {}", (num / den).sqrt());
    }

    #[test]
    fn coordinate_op_rejects_spread_fields() {
        let g = Grid::new(1, 32, 4.0).unwrap();
        let f = Field::gaussian(&g, &[0.0], 2.0, 1.0);
        assert!(matches!(
            apply_coordinate_op(&f, 0, 0.1),
            Err(Error::SupportViolation { .. })
        ));
    }

    #[test]
    fn derivative_of_sine() {
        let g = Grid::new(2, 16, PI).unwrap();
        let f = Field::from_real_fn(&g, |x| (3.0 * x[1]).sin());
        let d = derivative(&f, 1);
        for (i, v) in d.values().iter().enumerate() {
            let x = g.point(i);
            assert!((v.re - 3.0 * (3.0 * x[1]).cos()).abs() < 1e-12);
            assert!(v.im.abs() < 1e-12);
        }
        assert!(derivative(&f, 0).max_abs() < 1e-12);
    }

    #[test]
    fn dealias_keeps_low_modes() {
        let g = Grid::new(1, 64, 2.0).unwrap();
        let low = Field::plane_wave(&g, &[21]);
        let high = Field::plane_wave(&g, &[22]);
        assert!(dealias(&low).sub(&low).unwrap().max_abs() < 1e-12);
        assert!(dealias(&high).max_abs() < 1e-12);
    }
}
