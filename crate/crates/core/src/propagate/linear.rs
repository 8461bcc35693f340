use num_complex::Complex64;

use super::time::{Direction, TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::spectral::apply_radial;

/// Exact free Schrödinger flow `e^{itΔ}`, symbol `exp(-i t |k|^2)`.
pub fn free_flow(psi: &Field, t: f64) -> Field {
    if t == 0.0 {
        return psi.clone();
    }
    apply_radial(psi, |ksq| Complex64::from_polar(1.0, -t * ksq))
}

/// Per-slot propagator `exp(-i dt |k|^2)`.
pub(crate) fn propagator(grid: &Grid, dt: f64) -> Vec<Complex64> {
    grid.k_squared()
        .iter()
        .map(|&ksq| Complex64::from_polar(1.0, -dt * ksq))
        .collect()
}

/// One step of the exponential trapezoid rule for `i u_t + Δu = S`:
///
/// `u <- E(dt) (u - i dt/2 S_a) - i dt/2 S_b`
///
/// applied to spectral coefficients.
pub(crate) fn linear_step(
    u: &mut [Complex64],
    prop: &[Complex64],
    dt: f64,
    s_a: Option<&[Complex64]>,
    s_b: Option<&[Complex64]>,
) {
    let kick = Complex64::new(0.0, -0.5 * dt);
    if let Some(s) = s_a {
        for (ui, si) in u.iter_mut().zip(s) {
            *ui += kick * si;
        }
    }
    for (ui, e) in u.iter_mut().zip(prop) {
        *ui *= e;
    }
    if let Some(s) = s_b {
        for (ui, si) in u.iter_mut().zip(s) {
            *ui += kick * si;
        }
    }
}

/// Spectra of source frames, optionally conjugated and reversed in time so a
/// backward solve can reuse the forward kernel.
pub(crate) fn source_spectra(source: &Trajectory, reversed: bool) -> Vec<Vec<Complex64>> {
    let nf = source.frames().len();
    (0..nf)
        .map(|j| {
            let m = if reversed { nf - 1 - j } else { j };
            let f = source.frame(m);
            if reversed {
                f.conj().spectrum()
            } else {
                f.spectrum()
            }
        })
        .collect()
}

/// Solves `i u_t + Δu = S` on the time grid.
///
/// Forward solves take `data` at `t0`; backward solves take it at `t1` and are
/// computed as forward solves of the conjugated, time-reversed equation, which
/// makes a backward solve the exact inverse of the forward one. Frames are
/// always returned in ascending node order. With no source every frame is the
/// free flow of the data.
pub fn forced_linear_solve(
    data: &Field,
    source: Option<&Trajectory>,
    times: &TimeGrid,
    direction: Direction,
) -> Result<Trajectory> {
    let grid = data.grid();
    if let Some(s) = source {
        s.check_matches(grid, times)?;
    }
    let reversed = direction == Direction::Backward;
    let nt = times.nt();
    let dt = times.dt();
    let prop = propagator(grid, dt);
    let spectra = source.map(|s| source_spectra(s, reversed));

    let mut u = if reversed {
        data.conj().spectrum()
    } else {
        data.spectrum()
    };
    let mut frames = Vec::with_capacity(nt + 1);
    frames.push(data.clone());
    for j in 0..nt {
        let (sa, sb) = match &spectra {
            Some(sp) => (Some(sp[j].as_slice()), Some(sp[j + 1].as_slice())),
            None => (None, None),
        };
        linear_step(&mut u, &prop, dt, sa, sb);
        let mut phys = u.clone();
        grid.inverse(&mut phys);
        if reversed {
            phys.iter_mut().for_each(|v| *v = v.conj());
        }
        if phys.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::NonFiniteField);
        }
        frames.push(Field::from_values_unchecked(grid, phys));
    }
    if reversed {
        frames.reverse();
    }
    Trajectory::new(grid, *times, frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SobolevIndex;
    use crate::random::{band_limited_field, stream};
    use crate::spectral::sobolev_norm;
    use std::f64::consts::PI;

    #[test]
    fn plane_wave_phase() {
        let g = Grid::new(2, 8, PI).unwrap();
        let f = Field::plane_wave(&g, &[1, 2]);
        let t = 0.37;
        let out = free_flow(&f, t);
        let phase = Complex64::from_polar(1.0, -5.0 * t);
        for (o, v) in out.values().iter().zip(f.values()) {
            assert!((o - phase * v).norm() < 1e-13);
        }
        let same = free_flow(&f, 0.0);
        assert_eq!(same.values(), f.values());
    }

    #[test]
    fn gaussian_matches_closed_form() {
        // u0 = exp(-x^2/2) evolves to (1+2it)^{-1/2} exp(-x^2 / (2(1+2it)))
        let g = Grid::new(1, 256, 20.0).unwrap();
        let u0 = Field::gaussian(&g, &[0.0], 1.0, 1.0);
        let t = 0.5;
        let out = free_flow(&u0, t);
        let exact = Field::from_fn(&g, |x| {
            let a = Complex64::new(1.0, 2.0 * t);
            (-(x[0] * x[0]) / (2.0 * a)).exp() / a.sqrt()
        });
        let err = out.sub(&exact).unwrap().l2_norm();
        assert!(err < 1e-8, "err {err:e}");
    }

    #[test]
    fn unitary_and_group_law() {
        let g = Grid::new(2, 16, 4.0).unwrap();
        let f = band_limited_field(&g, &mut stream(1, "t"), 4, false);
        for s in [-1.0, 0.0, 1.0] {
            let s = SobolevIndex::new(s).unwrap();
            let a = sobolev_norm(&f, s);
            let b = sobolev_norm(&free_flow(&f, 1.3), s);
            assert!((a - b).abs() / a < 1e-12);
        }
        let two = free_flow(&free_flow(&f, 0.4), 0.9);
        let one = free_flow(&f, 1.3);
        assert!(two.sub(&one).unwrap().l2_norm() < 1e-12);
        let back = free_flow(&one, -1.3);
        assert!(back.sub(&f).unwrap().l2_norm() < 1e-12);
    }

    #[test]
    fn zero_source_reduces_to_free_flow() {
        let g = Grid::new(1, 32, 4.0).unwrap();
        let f = band_limited_field(&g, &mut stream(2, "t"), 5, false);
        let tg = TimeGrid::new(0.0, 1.0, 16).unwrap();
        let zero = Trajectory::zeros(&g, tg);
        let traj = forced_linear_solve(&f, Some(&zero), &tg, Direction::Forward).unwrap();
        for (m, fr) in traj.frames().iter().enumerate() {
            let exact = free_flow(&f, tg.time(m));
            assert!(fr.sub(&exact).unwrap().l2_norm() < 1e-13);
        }
    }

    #[test]
    fn backward_inverts_forward() {
        let g = Grid::new(1, 32, 4.0).unwrap();
        let mut rng = stream(3, "t");
        let tg = TimeGrid::new(0.0, 2.0, 40).unwrap();
        let frames = (0..=40)
            .map(|_| band_limited_field(&g, &mut rng, 5, false))
            .collect();
        let src = Trajectory::new(&g, tg, frames).unwrap();
        let zero = Field::zeros(&g);
        let fwd = forced_linear_solve(&zero, Some(&src), &tg, Direction::Forward).unwrap();
        let back = forced_linear_solve(fwd.last(), Some(&src), &tg, Direction::Backward).unwrap();
        assert!(back.first().l2_norm() < 1e-10);
        for (a, b) in fwd.frames().iter().zip(back.frames()) {
            assert!(a.sub(b).unwrap().l2_norm() < 1e-10);
        }
    }

    /// Exact Duhamel response of one mode to a unit source switched on at 0:
    /// `u(t) = -i (1 - exp(-i k^2 t)) / (i k^2)`.
    fn duhamel_single_mode(ksq: f64, t: f64) -> Complex64 {
        let i = Complex64::new(0.0, 1.0);
        -i * (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -ksq * t)) / (i * ksq)
    }

    #[test]
    fn single_mode_source_second_order() {
        let g = Grid::new(1, 16, PI).unwrap();
        let wave = Field::plane_wave(&g, &[2]);
        let ksq = 4.0;
        let t_end = 1.0;
        let mut errs = vec![];
        for nt in [20usize, 40, 80] {
            let tg = TimeGrid::new(0.0, t_end, nt).unwrap();
            let src = Trajectory::constant(&wave, tg);
            let out =
                forced_linear_solve(&Field::zeros(&g), Some(&src), &tg, Direction::Forward).unwrap();
            let exact = wave.scaled(duhamel_single_mode(ksq, t_end));
            errs.push(out.last().sub(&exact).unwrap().l2_norm());
        }
        let o1 = (errs[0] / errs[1]).log2();
        let o2 = (errs[1] / errs[2]).log2();
        assert!(o1 > 1.9 && o2 > 1.9, "orders {o1} {o2}");
    }

    #[test]
    fn misaligned_source_rejected() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let tg = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let other = TimeGrid::new(0.0, 1.0, 5).unwrap();
        let src = Trajectory::zeros(&g, other);
        let r = forced_linear_solve(&Field::zeros(&g), Some(&src), &tg, Direction::Forward);
        assert!(matches!(r, Err(Error::MisalignedTrajectory(_))));
    }
}
