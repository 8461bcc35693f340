use serde::{Deserialize, Serialize};

use super::linear::forced_linear_solve;
use super::norms::NormBundle;
use super::time::{Direction, TimeGrid, Trajectory};
use crate::error::{Error, Result};
use crate::field::{Field, SobolevIndex};
use crate::spectral::{dealias, sobolev_norm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Largest accepted `||u0||_{H^1}`.
    pub smallness: f64,
    pub power: f64,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 50,
            smallness: 0.1,
            power: 4.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PicardOutcome {
    pub trajectory: Trajectory,
    pub norms: NormBundle,
    /// `|||u^{k+1} - u^k|||` per iteration.
    pub increments: Vec<f64>,
    /// Ratios of successive increments.
    pub ratios: Vec<f64>,
}

impl PicardOutcome {
    pub fn iterations(&self) -> usize {
        self.increments.len()
    }
}

/// `|u|^p u`, truncated to the resolved band.
pub fn power_nonlinearity(u: &Field, power: f64) -> Field {
    dealias(&u.map(|v| v * v.norm().powf(power)))
}

/// Fixed-point iteration of the Duhamel map
/// `u(t) = e^{itΔ} u0 - i ∫_0^t e^{i(t-τ)Δ} (|u|^4 u + g)(τ) dτ`
/// starting from the zero trajectory. The integral uses the trapezoid rule on
/// the time nodes. Convergence is measured in `|||·|||`.
pub fn picard_solve(
    u0: &Field,
    g: Option<&Trajectory>,
    times: &TimeGrid,
    opts: &PicardOptions,
) -> Result<PicardOutcome> {
    let size = sobolev_norm(u0, SobolevIndex::H1);
    if size > opts.smallness {
        return Err(Error::InvalidInput(format!(
            "||u0||_H1 = {size:e} exceeds the smallness threshold {:e}",
            opts.smallness
        )));
    }
    let grid = u0.grid();
    if let Some(g) = g {
        g.check_matches(grid, times)?;
    }
    let mut current = Trajectory::zeros(grid, *times);
    let mut increments = Vec::new();
    let mut ratios = Vec::new();
    for _ in 0..opts.max_iter {
        let nonlinear = current.map(|f| power_nonlinearity(f, opts.power));
        let source = match g {
            Some(g) => nonlinear.add(g)?,
            None => nonlinear,
        };
        let next = forced_linear_solve(u0, Some(&source), times, Direction::Forward)?;
        let inc = NormBundle::of(&next.sub(&current)?).triple;
        if let Some(&prev) = increments.last() {
            let ratio: f64 = if prev > 0.0 { inc / prev } else { 0.0 };
            ratios.push(ratio);
            if !(ratio < 1.0) {
                increments.push(inc);
                return Err(Error::NoConvergence {
                    iterations: increments.len(),
                    last_ratio: ratio,
                    largest_working_delta: None,
                });
            }
        }
        increments.push(inc);
        current = next;
        if inc < opts.tol {
            let norms = NormBundle::of(&current);
            return Ok(PicardOutcome {
                trajectory: current,
                norms,
                increments,
                ratios,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: increments.len(),
        last_ratio: ratios.last().copied().unwrap_or(f64::NAN),
        largest_working_delta: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::propagate::{nls_solve, NlsOptions};

    #[test]
    fn zero_data_converges_immediately() {
        let g = Grid::new(1, 32, 4.0).unwrap();
        let tg = TimeGrid::new(0.0, 1.0, 16).unwrap();
        let out = picard_solve(&Field::zeros(&g), None, &tg, &PicardOptions::default()).unwrap();
        assert_eq!(out.iterations(), 1);
        assert!(out.trajectory.frames().iter().all(|f| f.max_abs() == 0.0));
        assert_eq!(out.norms.triple, 0.0);
    }

    #[test]
    fn agrees_with_splitting_on_tiny_mode() {
        let g = Grid::new(1, 64, 8.0).unwrap();
        let u0 = Field::plane_wave(&g, &[1]).scaled_real(0.01);
        let tg = TimeGrid::new(0.0, 1.0, 128).unwrap();
        let pic = picard_solve(&u0, None, &tg, &PicardOptions::default()).unwrap();
        let split = nls_solve(&u0, None, &tg, Direction::Forward, &NlsOptions::default()).unwrap();
        let diff = pic
            .trajectory
            .frames()
            .iter()
            .zip(split.frames())
            .map(|(a, b)| a.sub(b).unwrap().l2_norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-6, "sup-L2 gap {diff:e}");
        assert!(pic.ratios.iter().all(|&r| r < 1.0));
        for w in pic.increments.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn rejects_large_data() {
        let g = Grid::new(1, 32, 4.0).unwrap();
        let u0 = Field::plane_wave(&g, &[1]);
        let tg = TimeGrid::new(0.0, 1.0, 16).unwrap();
        assert!(picard_solve(&u0, None, &tg, &PicardOptions::default()).is_err());
    }

    #[test]
    fn diverges_when_contraction_fails() {
        let g = Grid::new(1, 32, 4.0).unwrap();
        let u0 = Field::from_real_fn(&g, |_| 1.2);
        let tg = TimeGrid::new(0.0, 2.0, 32).unwrap();
        let opts = PicardOptions {
            smallness: f64::INFINITY,
            ..PicardOptions::default()
        };
        let r = picard_solve(&u0, None, &tg, &opts);
        assert!(matches!(r, Err(Error::NoConvergence { .. })), "{r:?}");
    }
}
