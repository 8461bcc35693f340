use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::linear::{linear_step, propagator, source_spectra};
use super::time::{Direction, TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::spectral::dealias_spectrum;

/// Any sample above this magnitude aborts a nonlinear solve.
pub const BLOWUP_THRESHOLD: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NlsOptions {
    /// Exponent `p` of the nonlinearity `|u|^p u`; quintic is `p = 4`.
    pub power: f64,
    /// Truncate each nonlinear increment to the two-thirds band.
    pub dealias: bool,
    pub blowup_threshold: f64,
}

impl Default for NlsOptions {
    fn default() -> Self {
        Self {
            power: 4.0,
            dealias: true,
            blowup_threshold: BLOWUP_THRESHOLD,
        }
    }
}

/// Exact flow of `i u_t = |u|^p u` for time `tau`, `u <- u exp(-i tau |u|^p)`,
/// with the increment optionally projected onto the resolved band.
fn nonlinear_phase(grid: &Grid, u: &mut [Complex64], tau: f64, opts: &NlsOptions, inc: &mut [Complex64]) {
    for (d, v) in inc.iter_mut().zip(u.iter()) {
        let mag = v.norm();
        let phase = Complex64::from_polar(1.0, -tau * mag.powf(opts.power));
        *d = v * (phase - 1.0);
    }
    if opts.dealias {
        grid.forward(inc);
        dealias_spectrum(grid, inc);
        grid.inverse(inc);
    }
    for (v, d) in u.iter_mut().zip(inc.iter()) {
        *v += d;
    }
}

/// Strang splitting for `i u_t + Δu - |u|^p u = S`.
///
/// Each step is a half nonlinear phase, a source half-kick, the exact free
/// flow, a second source half-kick and a closing half nonlinear phase. The
/// linear core is the same exponential trapezoid rule used by
/// [`forced_linear_solve`](super::forced_linear_solve). Backward solves run
/// the conjugated, time-reversed equation, which has the same form.
pub fn nls_solve(
    data: &Field,
    source: Option<&Trajectory>,
    times: &TimeGrid,
    direction: Direction,
    opts: &NlsOptions,
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

    let mut u: Vec<Complex64> = if reversed {
        data.conj().into_values()
    } else {
        data.values().to_vec()
    };
    let mut inc = vec![Complex64::new(0.0, 0.0); u.len()];
    let mut frames = Vec::with_capacity(nt + 1);
    frames.push(data.clone());
    for j in 0..nt {
        nonlinear_phase(grid, &mut u, 0.5 * dt, opts, &mut inc);
        grid.forward(&mut u);
        let (sa, sb) = match &spectra {
            Some(sp) => (Some(sp[j].as_slice()), Some(sp[j + 1].as_slice())),
            None => (None, None),
        };
        linear_step(&mut u, &prop, dt, sa, sb);
        grid.inverse(&mut u);
        nonlinear_phase(grid, &mut u, 0.5 * dt, opts, &mut inc);

        let peak = u.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if !(peak <= opts.blowup_threshold) {
            return Err(Error::BlowupDetected {
                step: j + 1,
                magnitude: peak,
            });
        }
        let frame: Vec<Complex64> = if reversed {
            u.iter().map(|v| v.conj()).collect()
        } else {
            u.clone()
        };
        frames.push(Field::from_values_unchecked(grid, frame));
    }
    if reversed {
        frames.reverse();
    }
    Trajectory::new(grid, *times, frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{band_limited_field, stream};

    #[test]
    fn zero_data_stays_zero() {
        let g = Grid::new(1, 32, 4.0).unwrap();
        let tg = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let traj = nls_solve(&Field::zeros(&g), None, &tg, Direction::Forward, &NlsOptions::default())
            .unwrap();
        assert!(traj.frames().iter().all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn constant_data_follows_phase_ode() {
        // i u' = |u|^4 u  =>  u(t) = c exp(-i |c|^4 t)
        let g = Grid::new(2, 16, 4.0).unwrap();
        let c = Complex64::new(0.6, -0.3);
        let data = Field::from_fn(&g, |_| c);
        let tg = TimeGrid::new(0.0, 1.5, 30).unwrap();
        let traj = nls_solve(&data, None, &tg, Direction::Forward, &NlsOptions::default()).unwrap();
        let amp4 = c.norm().powi(4);
        for (m, fr) in traj.frames().iter().enumerate() {
            let exact = c * Complex64::from_polar(1.0, -amp4 * tg.time(m));
            for v in fr.values() {
                assert!((v - exact).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn second_order_self_convergence() {
        let g = Grid::new(1, 64, 8.0).unwrap();
        let data = band_limited_field(&g, &mut stream(5, "nls"), 6, false).scaled_real(3.0);
        let finals: Vec<Field> = [50usize, 100, 200]
            .iter()
            .map(|&nt| {
                let tg = TimeGrid::new(0.0, 1.0, nt).unwrap();
                nls_solve(&data, None, &tg, Direction::Forward, &NlsOptions::default())
                    .unwrap()
                    .last()
                    .clone()
            })
            .collect();
        let e1 = finals[0].sub(&finals[1]).unwrap().l2_norm();
        let e2 = finals[1].sub(&finals[2]).unwrap().l2_norm();
        let order = (e1 / e2).log2();
        assert!(order >= 1.9, "observed order {order}");
    }

    #[test]
    fn mass_drift_small_without_control() {
        let g = Grid::new(1, 64, 8.0).unwrap();
        let data = band_limited_field(&g, &mut stream(6, "nls"), 5, false).scaled_real(0.5);
        let tg = TimeGrid::new(0.0, 2.0, 256).unwrap();
        let traj = nls_solve(&data, None, &tg, Direction::Forward, &NlsOptions::default()).unwrap();
        let m0 = data.l2_norm();
        let drift = (traj.last().l2_norm() - m0).abs() / m0;
        assert!(drift <= 1e-6, "drift {drift:e}");
    }

    #[test]
    fn backward_retraces_forward() {
        let g = Grid::new(1, 32, 4.0).unwrap();
        let data = band_limited_field(&g, &mut stream(8, "nls"), 4, false).scaled_real(0.3);
        let tg = TimeGrid::new(0.0, 1.0, 64).unwrap();
        let opts = NlsOptions {
            dealias: false,
            ..NlsOptions::default()
        };
        let fwd = nls_solve(&data, None, &tg, Direction::Forward, &opts).unwrap();
        let back = nls_solve(fwd.last(), None, &tg, Direction::Backward, &opts).unwrap();
        assert!(back.first().sub(&data).unwrap().l2_norm() < 1e-12);
    }

    #[test]
    fn blowup_reported() {
        let g = Grid::new(1, 16, 2.0).unwrap();
        let data = Field::from_fn(&g, |_| Complex64::new(1.0, 0.0));
        let tg = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let opts = NlsOptions {
            blowup_threshold: 0.5,
            ..NlsOptions::default()
        };
        let r = nls_solve(&data, None, &tg, Direction::Forward, &opts);
        assert!(matches!(r, Err(Error::BlowupDetected { step: 1, .. })));
    }
}
