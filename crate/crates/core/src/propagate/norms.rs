use serde::{Deserialize, Serialize};

use super::time::Trajectory;
use crate::error::{Error, Result};
use crate::field::lp_norm_of;
use crate::spectral::gradient_magnitude;

const ADMISSIBLE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Admissibility {
    /// `r in [2, 6]`, `2/q + 3/r = 3/2`.
    L2,
    /// `r in [6, inf)`, `2/q + 3/r = 1/2`.
    H1,
}

/// Whether `(q, r)` is admissible in three space dimensions.
pub fn check_admissible(q: f64, r: f64, kind: Admissibility) -> bool {
    if !(q >= 1.0) || !(r >= 1.0) || r.is_nan() {
        return false;
    }
    let lhs = 2.0 / q + 3.0 / r;
    match kind {
        Admissibility::L2 => (2.0..=6.0).contains(&r) && (lhs - 1.5).abs() <= ADMISSIBLE_TOL,
        Admissibility::H1 => r >= 6.0 && r.is_finite() && (lhs - 0.5).abs() <= ADMISSIBLE_TOL,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissiblePair {
    pub q: f64,
    pub r: f64,
    pub kind: Admissibility,
}

impl AdmissiblePair {
    pub fn new(q: f64, r: f64, kind: Admissibility) -> Result<Self> {
        if check_admissible(q, r, kind) {
            Ok(Self { q, r, kind })
        } else {
            Err(Error::InvalidInput(format!("({q}, {r}) is not {kind:?}-admissible")))
        }
    }

    /// `(10, 30/13)`, the exponent pair of the `Z(I)` norm.
    pub fn z_pair() -> Self {
        Self {
            q: 10.0,
            r: 30.0 / 13.0,
            kind: Admissibility::L2,
        }
    }

    /// `(10, 10)`, the exponent pair of the `S(I)` norm.
    pub fn s_pair() -> Self {
        Self {
            q: 10.0,
            r: 10.0,
            kind: Admissibility::H1,
        }
    }
}

fn check_exponent(p: f64) -> Result<()> {
    if p >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(p))
    }
}

/// Spatial `L^r` norm of every frame (of `|∇u|` when `of_gradient`).
pub(crate) fn frame_norms(traj: &Trajectory, r: f64, of_gradient: bool) -> Vec<f64> {
    let cell = traj.grid().cell_measure();
    traj.frames()
        .iter()
        .map(|f| {
            if of_gradient {
                lp_norm_of(gradient_magnitude(f).into_iter(), r, cell)
            } else {
                f.lp_norm(r)
            }
        })
        .collect()
}

/// Outer `L^q` in time of per-node values by the trapezoid rule.
pub(crate) fn time_norm(traj: &Trajectory, values: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        return values.iter().copied().fold(0.0, f64::max);
    }
    let powered: Vec<f64> = values.iter().map(|v| v.powf(q)).collect();
    traj.times().integrate(&powered).powf(1.0 / q)
}

/// `L^q_t L^r_x` norm of a trajectory, or of its gradient.
pub fn mixed_norm(traj: &Trajectory, q: f64, r: f64, of_gradient: bool) -> Result<f64> {
    check_exponent(q)?;
    check_exponent(r)?;
    let per_frame = frame_norms(traj, r, of_gradient);
    Ok(time_norm(traj, &per_frame, q))
}

/// The five components of the local-existence norm `|||u|||`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormBundle {
    pub sup_l2: f64,
    pub sup_grad: f64,
    /// `L^10_t L^10_x` of `u`.
    pub s_norm: f64,
    /// `L^{10/3}_t L^{10/3}_x` of `∇u`.
    pub w_norm: f64,
    /// `L^10_t L^{30/13}_x` of `∇u`.
    pub z_norm: f64,
    pub triple: f64,
}

impl NormBundle {
    pub fn of(traj: &Trajectory) -> Self {
        let cell = traj.grid().cell_measure();
        let mut l2 = Vec::with_capacity(traj.frames().len());
        let mut l10 = Vec::with_capacity(traj.frames().len());
        let mut g2 = Vec::with_capacity(traj.frames().len());
        let mut g103 = Vec::with_capacity(traj.frames().len());
        let mut g3013 = Vec::with_capacity(traj.frames().len());
        for f in traj.frames() {
            l2.push(f.lp_norm(2.0));
            l10.push(f.lp_norm(10.0));
            let grad = gradient_magnitude(f);
            g2.push(lp_norm_of(grad.iter().copied(), 2.0, cell));
            g103.push(lp_norm_of(grad.iter().copied(), 10.0 / 3.0, cell));
            g3013.push(lp_norm_of(grad.iter().copied(), 30.0 / 13.0, cell));
        }
        let sup_l2 = l2.iter().copied().fold(0.0, f64::max);
        let sup_grad = g2.iter().copied().fold(0.0, f64::max);
        let s_norm = time_norm(traj, &l10, 10.0);
        let w_norm = time_norm(traj, &g103, 10.0 / 3.0);
        let z_norm = time_norm(traj, &g3013, 10.0);
        Self {
            sup_l2,
            sup_grad,
            s_norm,
            w_norm,
            z_norm,
            triple: sup_l2 + sup_grad + s_norm + w_norm + z_norm,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Field;
    use crate::grid::Grid;
    use crate::propagate::TimeGrid;
    use crate::random::{band_limited_field, stream};

    #[test]
    fn admissible_examples() {
        assert!(check_admissible(10.0, 30.0 / 13.0, Admissibility::L2));
        assert!(check_admissible(f64::INFINITY, 2.0, Admissibility::L2));
        assert!(check_admissible(2.0, 6.0, Admissibility::L2));
        assert!(check_admissible(10.0, 10.0, Admissibility::H1));
        assert!(!check_admissible(10.0, 10.0, Admissibility::L2));
        assert!(!check_admissible(10.0, 30.0 / 13.0, Admissibility::H1));
        assert!(!check_admissible(1.0, 1.0, Admissibility::L2));
        // 10/3 pair of W(I) is L2-admissible
        assert!(check_admissible(10.0 / 3.0, 10.0 / 3.0, Admissibility::L2));
    }

    #[test]
    fn sup_of_constant_trajectory() {
        let g = Grid::new(1, 16, 2.0).unwrap();
        let f = band_limited_field(&g, &mut stream(1, "n"), 3, false);
        let tg = TimeGrid::new(0.0, 1.0, 5).unwrap();
        let traj = crate::propagate::Trajectory::constant(&f, tg);
        let v = mixed_norm(&traj, f64::INFINITY, 3.0, false).unwrap();
        assert!((v - f.lp_norm(3.0)).abs() < 1e-14);
        let zero = crate::propagate::Trajectory::zeros(&g, tg);
        assert_eq!(mixed_norm(&zero, 10.0, 10.0, true).unwrap(), 0.0);
        assert!(matches!(mixed_norm(&zero, 0.5, 2.0, false), Err(Error::InvalidExponent(_))));
    }

    #[test]
    fn l2_l2_matches_double_sum() {
        let g = Grid::new(2, 8, 1.5).unwrap();
        let tg = TimeGrid::new(0.0, 0.7, 6).unwrap();
        let mut rng = stream(2, "n");
        let frames: Vec<Field> = (0..=6).map(|_| band_limited_field(&g, &mut rng, 2, false)).collect();
        let traj = crate::propagate::Trajectory::new(&g, tg, frames.clone()).unwrap();
        let h = 0.7 / 6.0;
        let cell = g.cell_measure();
        let mut total = 0.0;
        for (m, f) in frames.iter().enumerate() {
            let w = if m == 0 || m == 6 { 0.5 * h } else { h };
            let s: f64 = f.values().iter().map(|v| v.norm_sqr()).sum();
            total += w * s * cell;
        }
        let v = mixed_norm(&traj, 2.0, 2.0, false).unwrap();
        assert!((v - total.sqrt()).abs() / v < 1e-12);
    }

    #[test]
    fn bundle_sums_components() {
        let g = Grid::new(1, 32, 4.0).unwrap();
        let tg = TimeGrid::new(0.0, 1.0, 8).unwrap();
        let f = band_limited_field(&g, &mut stream(3, "n"), 4, false);
        let traj = crate::propagate::Trajectory::constant(&f, tg);
        let b = NormBundle::of(&traj);
        let sum = b.sup_l2 + b.sup_grad + b.s_norm + b.w_norm + b.z_norm;
        assert_eq!(b.triple, sum);
        assert!((b.sup_l2 - 1.0).abs() < 1e-12);
        assert!((b.z_norm - mixed_norm(&traj, 10.0, 30.0 / 13.0, true).unwrap()).abs() < 1e-14);
    }
}
