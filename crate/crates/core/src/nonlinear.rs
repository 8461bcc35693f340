//! Fixed-point null control for `i u_t + Δu - |u|^4 u = φ h`.
//!
//! For an adjoint datum `Φ0` the state `u` is driven backwards from
//! `u(T) = 0` by `φ Λ⁻¹(φ Φ(t))`, `Φ(t) = e^{itΔ} Φ0`. Splitting `u = v + Ψ`
//! with `Ψ` the linear response gives `Ψ(0) = i Γ Φ0` and
//! `v(0) = 𝓙Φ0`, the response to `|u|^4 u`. Requiring `u(0) = u0` yields
//! `Φ0 = Γ⁻¹(-i u0) - Γ⁻¹(-i 𝓙Φ0)`, which is the map iterated here.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, SobolevIndex};
use crate::hum::{adjoint_flow, control_from_adjoint, gamma_inverse, HumOptions, HumProblem};
use crate::propagate::{
    forced_linear_solve, mixed_norm, nls_solve, power_nonlinearity, Direction, NlsOptions, Trajectory,
};
use crate::random::{band_limited_field, default_band, stream};
use crate::spectral::sobolev_norm;

/// Sign in front of `Γ⁻¹(-i 𝓙Φ0)` in the contraction map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JSign {
    /// `Φ0 = Γ⁻¹(-i u0) - Γ⁻¹(-i 𝓙Φ0)`; consistent with `u(0) = u0`.
    Minus,
    /// The opposite sign, kept to demonstrate the consistency failure.
    Plus,
}

#[derive(Clone, Debug)]
pub struct NonlinearControlProblem {
    pub hum: HumProblem,
    pub smallness_delta: f64,
    pub ball_radius: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub sign: JSign,
    pub nls: NlsOptions,
    /// Largest `||u0||_{H^1}` known to converge, quoted on failure.
    pub working_delta_hint: Option<f64>,
}

impl NonlinearControlProblem {
    pub fn new(hum: HumProblem, smallness_delta: f64, ball_radius: f64) -> Result<Self> {
        let size = sobolev_norm(hum.target(), SobolevIndex::H1);
        if size > smallness_delta {
            return Err(Error::InvalidInput(format!(
                "||u0||_H1 = {size:e} exceeds smallness_delta = {smallness_delta:e}"
            )));
        }
        if !(ball_radius > 0.0) {
            return Err(Error::InvalidInput(format!("ball_radius must be positive, got {ball_radius}")));
        }
        Ok(Self {
            hum,
            smallness_delta,
            ball_radius,
            tol: 1e-8,
            max_iter: 50,
            sign: JSign::Minus,
            nls: NlsOptions::default(),
            working_delta_hint: None,
        })
    }

    fn inner_options(&self) -> HumOptions {
        HumOptions {
            tol: 0.1 * self.tol,
            ..HumOptions::default()
        }
    }
}

/// `u` on the whole time grid and `𝓙Φ0 = v(0)`.
#[derive(Clone, Debug)]
pub struct CoupledPair {
    pub u: Trajectory,
    pub v0: Field,
}

fn driving_source(problem: &NonlinearControlProblem, phi0: &Field) -> Result<(Trajectory, Trajectory)> {
    let hum = &problem.hum;
    let phi_traj = adjoint_flow(phi0, hum.times());
    let h = control_from_adjoint(hum.phi(), &phi_traj)?;
    let frames = h
        .frames()
        .iter()
        .map(|f| hum.phi().apply(f))
        .collect::<Result<Vec<_>>>()?;
    let source = Trajectory::new(hum.grid(), *hum.times(), frames)?;
    Ok((h, source))
}

fn check_ball(problem: &NonlinearControlProblem, phi0: &Field) -> Result<()> {
    let size = sobolev_norm(phi0, SobolevIndex::H_MINUS_1);
    if size > problem.ball_radius {
        return Err(Error::InvalidInput(format!(
            "||Φ0||_H-1 = {size:e} lies outside the ball of radius {:e}",
            problem.ball_radius
        )));
    }
    Ok(())
}

/// Solves the nonlinear state backwards from `u(T) = 0`, then the linear
/// response `v` to `|u|^4 u` backwards from `v(T) = 0`.
pub fn solve_coupled_pair(phi0: &Field, problem: &NonlinearControlProblem) -> Result<CoupledPair> {
    check_ball(problem, phi0)?;
    let hum = &problem.hum;
    let (_, source) = driving_source(problem, phi0)?;
    let zero = Field::zeros(hum.grid());
    let u = nls_solve(&zero, Some(&source), hum.times(), Direction::Backward, &problem.nls)?;
    let nonlinear = u.map(|f| power_nonlinearity(f, problem.nls.power));
    let v = forced_linear_solve(&zero, Some(&nonlinear), hum.times(), Direction::Backward)?;
    Ok(CoupledPair {
        v0: v.first().clone(),
        u,
    })
}

/// `Ψ(0)` for `i Ψ_t + ΔΨ = φ Λ⁻¹(φ Φ)`, `Ψ(T) = 0`.
pub fn linear_response(phi0: &Field, problem: &NonlinearControlProblem) -> Result<Field> {
    let (_, source) = driving_source(problem, phi0)?;
    let zero = Field::zeros(problem.hum.grid());
    let psi = forced_linear_solve(&zero, Some(&source), problem.hum.times(), Direction::Backward)?;
    Ok(psi.first().clone())
}

fn signed(problem: &NonlinearControlProblem, linear: &Field, correction: &Field) -> Result<Field> {
    let s = match problem.sign {
        JSign::Minus => -1.0,
        JSign::Plus => 1.0,
    };
    linear.add_scaled(Complex64::new(s, 0.0), correction)
}

/// `𝓑Φ0`, given the linear HUM answer `Γ⁻¹(-i u0)`. Returns the image and
/// the coupled pair it was built from.
fn apply_b(
    phi0: &Field,
    linear: &Field,
    problem: &NonlinearControlProblem,
) -> Result<(Field, CoupledPair, usize)> {
    let pair = solve_coupled_pair(phi0, problem)?;
    let corr = gamma_inverse(&problem.hum, &pair.v0, &problem.inner_options())?;
    Ok((signed(problem, linear, &corr.solution)?, pair, corr.iterations))
}

pub fn operator_b(phi0: &Field, problem: &NonlinearControlProblem) -> Result<Field> {
    let linear = gamma_inverse(&problem.hum, problem.hum.target(), &problem.inner_options())?;
    Ok(apply_b(phi0, &linear.solution, problem)?.0)
}

#[derive(Clone, Debug)]
pub struct ControlResult {
    pub phi0: Field,
    /// `h(t) = Λ⁻¹(φ Φ(t))`; the equation sees `φ h`.
    pub control: Trajectory,
    /// `||Φ0^{k+1} - Φ0^k||_{H^{-1}}`.
    pub iterates: Vec<f64>,
    pub contraction_factors: Vec<f64>,
    /// `||u(T)||_{H^1}` of the verifying forward solve.
    pub terminal_residual: f64,
    pub relative_terminal_residual: f64,
    pub final_state: Field,
    /// `||v(0)||_{H^1} / ||∇u||^5_{L^10 L^{30/13}}`.
    pub claim1_ratio: f64,
    /// `||∇u||_{L^10 L^{30/13}} / ||Φ0||_{H^{-1}}`.
    pub claim2_ratio: f64,
    /// `||v(0) + Ψ(0) - u0||_{H^1} / ||u0||_{H^1}`.
    pub consistency_residual: f64,
    /// `||u(0) - u0||_{H^1} / ||u0||_{H^1}` for the backward nonlinear state.
    pub backward_mismatch: f64,
    pub cg_iterations: usize,
    pub sign: JSign,
}

fn no_convergence(problem: &NonlinearControlProblem, iterations: usize, last_ratio: f64) -> Error {
    Error::NoConvergence {
        iterations,
        last_ratio,
        largest_working_delta: problem.working_delta_hint,
    }
}

fn ratio_or_nan(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        f64::NAN
    }
}

/// Iterates `Φ0^{k+1} = 𝓑 Φ0^k` from `Φ0^0 = 0`, synthesizes the control and
/// verifies it with a forward nonlinear solve.
pub fn nonlinear_null_control(problem: &NonlinearControlProblem) -> Result<ControlResult> {
    let hum = &problem.hum;
    let u0 = hum.target();
    let u0_size = sobolev_norm(u0, SobolevIndex::H1);
    let inner = problem.inner_options();
    let linear = gamma_inverse(hum, u0, &inner)?;
    let mut cg_iterations = linear.iterations;
    let linear = linear.solution;

    let mut phi = Field::zeros(hum.grid());
    let mut increments: Vec<f64> = Vec::new();
    let mut factors: Vec<f64> = Vec::new();
    let mut converged = false;
    for _ in 0..problem.max_iter {
        let (next, _, its) = match apply_b(&phi, &linear, problem) {
            Ok(v) => v,
            Err(Error::BlowupDetected { .. }) | Err(Error::InvalidInput(_)) => {
                return Err(no_convergence(problem, increments.len(), f64::INFINITY));
            }
            Err(e) => return Err(e),
        };
        cg_iterations += its;
        let inc = sobolev_norm(&next.sub(&phi)?, SobolevIndex::H_MINUS_1);
        if let Some(&prev) = increments.last() {
            let factor = if prev > 0.0 { inc / prev } else { 0.0 };
            factors.push(factor);
            if !(factor < 1.0) {
                increments.push(inc);
                return Err(no_convergence(problem, increments.len(), factor));
            }
        }
        increments.push(inc);
        if sobolev_norm(&next, SobolevIndex::H_MINUS_1) > problem.ball_radius {
            return Err(no_convergence(problem, increments.len(), factors.last().copied().unwrap_or(f64::NAN)));
        }
        phi = next;
        if inc < problem.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(no_convergence(problem, increments.len(), factors.last().copied().unwrap_or(f64::NAN)));
    }

    let pair = solve_coupled_pair(&phi, problem)?;
    let psi0 = linear_response(&phi, problem)?;
    let gap = pair.v0.add(&psi0)?.sub(u0)?;
    let consistency_residual = ratio_or_nan(sobolev_norm(&gap, SobolevIndex::H1), u0_size);
    let backward_mismatch = ratio_or_nan(sobolev_norm(&pair.u.first().sub(u0)?, SobolevIndex::H1), u0_size);
    if u0_size > 0.0 && !(consistency_residual <= 10.0 * problem.tol) {
        return Err(Error::FixedPointInconsistent {
            residual: consistency_residual,
        });
    }

    let (control, source) = driving_source(problem, &phi)?;
    let forward = nls_solve(u0, Some(&source), hum.times(), Direction::Forward, &problem.nls)?;
    let final_state = forward.last().clone();
    let terminal_residual = sobolev_norm(&final_state, SobolevIndex::H1);
    let z = mixed_norm(&pair.u, 10.0, 30.0 / 13.0, true)?;
    let v0_size = sobolev_norm(&pair.v0, SobolevIndex::H1);
    Ok(ControlResult {
        claim1_ratio: ratio_or_nan(v0_size, z.powi(5)),
        claim2_ratio: ratio_or_nan(z, sobolev_norm(&phi, SobolevIndex::H_MINUS_1)),
        phi0: phi,
        control,
        iterates: increments,
        contraction_factors: factors,
        terminal_residual,
        relative_terminal_residual: if u0_size > 0.0 {
            terminal_residual / u0_size
        } else {
            terminal_residual
        },
        final_state,
        consistency_residual,
        backward_mismatch,
        cg_iterations,
        sign: problem.sign,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzProbe {
    pub radius: f64,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// Measures `||𝓑a - 𝓑b||_{H^{-1}} / ||a - b||_{H^{-1}}` on random pairs with
/// `||a||, ||b|| = radius`. The difference is formed as
/// `∓Γ⁻¹(-i(𝓙a - 𝓙b))` so the common linear part never cancels numerically.
pub fn lipschitz_probe(
    problem: &NonlinearControlProblem,
    radius: f64,
    pairs: usize,
    seed: u64,
) -> Result<LipschitzProbe> {
    let grid = problem.hum.grid();
    let band = default_band(grid);
    let mut rng = stream(seed, "lipschitz");
    let unit = |f: Field| {
        let s = sobolev_norm(&f, SobolevIndex::H_MINUS_1);
        f.scaled_real(radius / s)
    };
    let data: Vec<(Field, Field)> = (0..pairs)
        .map(|_| {
            let a = unit(band_limited_field(grid, &mut rng, band, false));
            let b = unit(band_limited_field(grid, &mut rng, band, false));
            (a, b)
        })
        .collect();
    let ratios = data
        .par_iter()
        .map(|(a, b)| -> Result<f64> {
            let ja = solve_coupled_pair(a, problem)?.v0;
            let jb = solve_coupled_pair(b, problem)?.v0;
            let diff = gamma_inverse(&problem.hum, &ja.sub(&jb)?, &problem.inner_options())?;
            let num = sobolev_norm(&diff.solution, SobolevIndex::H_MINUS_1);
            Ok(num / sobolev_norm(&a.sub(b)?, SobolevIndex::H_MINUS_1))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(LipschitzProbe {
        radius,
        ratios,
        max_ratio,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SmallnessPoint {
    pub eps: f64,
    pub j_norm: f64,
}

/// `||𝓙(ε w)||_{H^1}` for `ε = eps0, eps0/2, ...` with `||w||_{H^{-1}} = 1`.
pub fn smallness_sweep(
    problem: &NonlinearControlProblem,
    eps0: f64,
    levels: usize,
    seed: u64,
) -> Result<Vec<SmallnessPoint>> {
    let grid = problem.hum.grid();
    let w = band_limited_field(grid, &mut stream(seed, "smallness"), default_band(grid), false);
    let w = w.scaled_real(1.0 / sobolev_norm(&w, SobolevIndex::H_MINUS_1));
    (0..levels)
        .into_par_iter()
        .map(|l| {
            let eps = eps0 / 2f64.powi(l as i32);
            let v0 = solve_coupled_pair(&w.scaled_real(eps), problem)?.v0;
            Ok(SmallnessPoint {
                eps,
                j_norm: sobolev_norm(&v0, SobolevIndex::H1),
            })
        })
        .collect()
}

/// Observed orders `log2(J(ε) / J(ε/2))` between successive sweep points.
pub fn observed_orders(points: &[SmallnessPoint]) -> Vec<f64> {
    points
        .windows(2)
        .map(|w| (w[0].j_norm / w[1].j_norm).ln() / (w[0].eps / w[1].eps).ln())
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaPoint {
    pub delta: f64,
    pub converged: bool,
    pub iterations: usize,
    pub max_contraction: f64,
    pub relative_terminal_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeltaSweep {
    pub points: Vec<DeltaPoint>,
    /// Largest `||u0||_{H^1}` that converged.
    pub delta_star: Option<f64>,
}

/// Doubles `||u0||_{H^1}` from `delta0` until the iteration fails or
/// `max_points` sizes have been tried. The shape of `u0` is kept fixed.
pub fn delta_sweep(problem: &NonlinearControlProblem, delta0: f64, max_points: usize) -> Result<DeltaSweep> {
    let shape = problem.hum.target();
    let size = sobolev_norm(shape, SobolevIndex::H1);
    if size == 0.0 {
        return Err(Error::InvalidInput("delta sweep needs a nonzero initial state".into()));
    }
    let mut points = Vec::new();
    let mut delta_star = None;
    let mut delta = delta0;
    for _ in 0..max_points {
        let hum = problem.hum.with_target(shape.scaled_real(delta / size))?;
        let mut p = problem.clone();
        p.hum = hum;
        p.smallness_delta = f64::INFINITY;
        p.working_delta_hint = delta_star;
        match nonlinear_null_control(&p) {
            Ok(r) => {
                points.push(DeltaPoint {
                    delta,
                    converged: true,
                    iterations: r.iterates.len(),
                    max_contraction: r.contraction_factors.iter().copied().fold(0.0, f64::max),
                    relative_terminal_residual: r.relative_terminal_residual,
                });
                delta_star = Some(delta);
            }
            Err(Error::NoConvergence {
                iterations,
                last_ratio,
                ..
            }) => {
                points.push(DeltaPoint {
                    delta,
                    converged: false,
                    iterations,
                    max_contraction: last_ratio,
                    relative_terminal_residual: f64::NAN,
                });
                break;
            }
            Err(Error::FixedPointInconsistent { .. }) | Err(Error::BlowupDetected { .. }) => {
                points.push(DeltaPoint {
                    delta,
                    converged: false,
                    iterations: 0,
                    max_contraction: f64::NAN,
                    relative_terminal_residual: f64::NAN,
                });
                break;
            }
            Err(e) => return Err(e),
        }
        delta *= 2.0;
    }
    Ok(DeltaSweep { points, delta_star })
}
