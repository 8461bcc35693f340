//! Hilbert uniqueness method for the linear controlled equation
//! `i u_t + Δu = φ h`, `u(0) = u0`, `u(T) = 0`.
//!
//! The adjoint datum `v0 ∈ H^{-1}` generates `v(t) = e^{itΔ} v0`, the control
//! is `h(t) = Λ⁻¹(φ v(t))` and the Gramian is `Γ v0 = -i u(0)` for the state
//! driven by `φ h` backwards from `u(T) = 0`. With the exponential trapezoid
//! rule `Γ = Σ_m w_m e^{-it_mΔ} φ Λ⁻¹ φ e^{it_mΔ}` exactly, so it is Hermitian
//! for the `L²` pairing and `Λ Γ` is self-adjoint in `H^{-1}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Field, SobolevIndex};
use crate::geometry::{control_insert, CutoffPhi};
use crate::grid::Grid;
use crate::propagate::{forced_linear_solve, free_flow, Direction, TimeGrid, Trajectory};
use crate::random::{full_spectrum, stream};
use crate::spectral::{hs_inner, lambda_apply, sobolev_norm};

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Debug)]
pub struct HumProblem {
    phi: CutoffPhi,
    times: TimeGrid,
    target: Field,
}

impl HumProblem {
    pub fn new(phi: CutoffPhi, horizon: f64, nt: usize, target: Field) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidTimeGrid(format!("horizon must be positive, got {horizon}")));
        }
        if nt < 8 {
            return Err(Error::InvalidTimeGrid(format!("need at least 8 steps, got {nt}")));
        }
        if target.grid() != phi.grid() {
            return Err(Error::GridMismatch);
        }
        if !target.is_finite() {
            return Err(Error::NonFiniteField);
        }
        Ok(Self {
            times: TimeGrid::new(0.0, horizon, nt)?,
            phi,
            target,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.phi.grid()
    }

    pub fn phi(&self) -> &CutoffPhi {
        &self.phi
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.times.t1()
    }

    pub fn target(&self) -> &Field {
        &self.target
    }

    /// Same geometry and horizon, different initial state.
    pub fn with_target(&self, target: Field) -> Result<Self> {
        Self::new(self.phi.clone(), self.horizon(), self.times.nt(), target)
    }
}

/// `v(t_m) = e^{it_mΔ} v0` at every node.
pub fn adjoint_flow(v0: &Field, times: &TimeGrid) -> Trajectory {
    let frames = times.times().into_iter().map(|t| free_flow(v0, t)).collect();
    Trajectory::new(v0.grid(), *times, frames).expect("frame count matches time grid")
}

/// `h(t_m) = Λ⁻¹(φ v(t_m))`.
pub fn control_from_adjoint(phi: &CutoffPhi, v: &Trajectory) -> Result<Trajectory> {
    let frames = v
        .frames()
        .iter()
        .map(|f| control_insert(phi, f))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(v.grid(), *v.times(), frames)
}

fn localized_source(phi: &CutoffPhi, h: &Trajectory) -> Result<Trajectory> {
    let frames = h
        .frames()
        .iter()
        .map(|f| phi.apply(f))
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(h.grid(), *h.times(), frames)
}

/// `Γ v0 = -i u(0)`.
pub fn gamma_apply(v0: &Field, problem: &HumProblem) -> Result<Field> {
    if v0.grid() != problem.grid() {
        return Err(Error::GridMismatch);
    }
    let v = adjoint_flow(v0, problem.times());
    let h = control_from_adjoint(problem.phi(), &v)?;
    let source = localized_source(problem.phi(), &h)?;
    let zero = Field::zeros(problem.grid());
    let u = forced_linear_solve(&zero, Some(&source), problem.times(), Direction::Backward)?;
    Ok(u.first().scaled(-I))
}

/// `a(v0, w0) = ∫_0^T ⟨φ v(t), φ w(t)⟩_{H^{-1}} dt`, trapezoid in time.
pub fn gramian_form(v0: &Field, w0: &Field, problem: &HumProblem) -> Result<f64> {
    v0.same_grid(w0)?;
    if v0.grid() != problem.grid() {
        return Err(Error::GridMismatch);
    }
    let phi = problem.phi();
    let samples = problem
        .times()
        .times()
        .into_iter()
        .map(|t| {
            let a = phi.apply(&free_flow(v0, t))?;
            let b = phi.apply(&free_flow(w0, t))?;
            hs_inner(&a, &b, SobolevIndex::H_MINUS_1)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(problem.times().integrate(&samples))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HumOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Keep every CG iterate (diagnostics only).
    #[serde(skip)]
    pub record_iterates: bool,
}

impl Default for HumOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 400,
            record_iterates: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct HumSolution {
    pub minimizer: Field,
    pub control: Trajectory,
    pub cg_iterations: usize,
    /// Final `||r||_{H^1} / ||u0||_{H^1}`.
    pub cg_residual: f64,
    pub residual_history: Vec<f64>,
    /// Smallest Ritz value of the preconditioned operator `ΛΓ`.
    pub smallest_ritz: f64,
    /// State at `T` of the verifying forward solve.
    pub final_state: Field,
    /// `||u(T)||_{H^{-1}}`.
    pub terminal_residual: f64,
    pub iterates: Vec<Field>,
}

impl HumSolution {
    pub fn relative_terminal_residual(&self, u0: &Field) -> f64 {
        let scale = sobolev_norm(u0, SobolevIndex::H_MINUS_1);
        if scale == 0.0 {
            self.terminal_residual
        } else {
            self.terminal_residual / scale
        }
    }
}

/// Ritz values of the CG tridiagonal built from step lengths and `β`s.
fn cg_ritz(alphas: &[f64], betas: &[f64]) -> Vec<f64> {
    let k = alphas.len();
    if k == 0 {
        return Vec::new();
    }
    let mut t = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        let mut d = 1.0 / alphas[j];
        if j > 0 {
            d += betas[j - 1] / alphas[j - 1];
        }
        t[(j, j)] = d;
        if j + 1 < k {
            let off = betas[j].sqrt() / alphas[j];
            t[(j, j + 1)] = off;
            t[(j + 1, j)] = off;
        }
    }
    t.symmetric_eigenvalues().iter().copied().collect()
}

/// `Re ⟨a, b⟩_{L²}`, the pairing in which `Γ` is symmetric.
fn pair(a: &Field, b: &Field) -> f64 {
    hs_inner(a, b, SobolevIndex::L2).expect("operands share a grid")
}

/// Verifies a minimizer: synthesizes `h`, runs the forward controlled solve
/// from `u0`, returns `(control, u(T))`.
pub fn synthesize_and_verify(problem: &HumProblem, v0: &Field) -> Result<(Trajectory, Field)> {
    let v = adjoint_flow(v0, problem.times());
    let h = control_from_adjoint(problem.phi(), &v)?;
    let source = localized_source(problem.phi(), &h)?;
    let u = forced_linear_solve(problem.target(), Some(&source), problem.times(), Direction::Forward)?;
    Ok((h, u.last().clone()))
}

/// Solves `Γ v0 = -i u0` by CG in the `H^{-1}` geometry.
pub fn hum_solve(problem: &HumProblem, tol: f64, max_iter: usize) -> Result<HumSolution> {
    hum_solve_with(
        problem,
        &HumOptions {
            tol,
            max_iter,
            ..HumOptions::default()
        },
    )
}

/// CG outcome for `Γ x = -i u`.
#[derive(Clone, Debug)]
pub struct GammaSolve {
    pub solution: Field,
    pub iterations: usize,
    /// Final `||r||_{H^1} / ||u||_{H^1}`.
    pub residual: f64,
    pub history: Vec<f64>,
    pub smallest_ritz: f64,
    pub iterates: Vec<Field>,
}

/// Solves `Γ x = -i u` by CG in the `H^{-1}` geometry: the residual lives in
/// `H^1` and is pulled back by `Λ` before it becomes a search direction.
pub fn gamma_inverse(problem: &HumProblem, u: &Field, opts: &HumOptions) -> Result<GammaSolve> {
    let grid = problem.grid();
    if u.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let scale = sobolev_norm(u, SobolevIndex::H1);
    let mut x = Field::zeros(grid);
    let mut iterates = Vec::new();
    let mut history = Vec::new();
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    if scale == 0.0 {
        return Ok(GammaSolve {
            solution: x,
            iterations: 0,
            residual: 0.0,
            history,
            smallest_ritz: f64::NAN,
            iterates,
        });
    }

    let mut r = u.scaled(-I);
    let mut z = lambda_apply(&r);
    let mut p = z.clone();
    let mut rz = pair(&r, &z);
    let mut ratio = sobolev_norm(&r, SobolevIndex::H1) / scale;
    history.push(ratio);
    let mut iterations = 0;
    let stagnation = |iterations, ratio, alphas: &[f64], betas: &[f64]| Error::CgStagnation {
        iterations,
        residual: ratio,
        smallest_ritz: cg_ritz(alphas, betas).into_iter().fold(f64::INFINITY, f64::min),
    };
    while ratio >= opts.tol {
        if iterations == opts.max_iter {
            return Err(stagnation(iterations, ratio, &alphas, &betas));
        }
        let gp = gamma_apply(&p, problem)?;
        let curvature = pair(&p, &gp);
        if !(curvature > 0.0) {
            return Err(stagnation(iterations, ratio, &alphas, &betas));
        }
        let alpha = rz / curvature;
        x = x.add_scaled(Complex64::new(alpha, 0.0), &p)?;
        r = r.add_scaled(Complex64::new(-alpha, 0.0), &gp)?;
        z = lambda_apply(&r);
        let rz_next = pair(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        p = z.add_scaled(Complex64::new(beta, 0.0), &p)?;
        alphas.push(alpha);
        betas.push(beta);
        iterations += 1;
        ratio = sobolev_norm(&r, SobolevIndex::H1) / scale;
        history.push(ratio);
        if opts.record_iterates {
            iterates.push(x.clone());
        }
    }
    Ok(GammaSolve {
        solution: x,
        iterations,
        residual: ratio,
        history,
        smallest_ritz: cg_ritz(&alphas, &betas).into_iter().fold(f64::INFINITY, f64::min),
        iterates,
    })
}

pub fn hum_solve_with(problem: &HumProblem, opts: &HumOptions) -> Result<HumSolution> {
    let cg = gamma_inverse(problem, problem.target(), opts)?;
    let (control, final_state) = synthesize_and_verify(problem, &cg.solution)?;
    Ok(HumSolution {
        minimizer: cg.solution,
        control,
        cg_iterations: cg.iterations,
        cg_residual: cg.residual,
        residual_history: cg.history,
        smallest_ritz: cg.smallest_ritz,
        terminal_residual: sobolev_norm(&final_state, SobolevIndex::H_MINUS_1),
        final_state,
        iterates: cg.iterates,
    })
}

/// Matrix of `Γ` in normalized Fourier coefficients, assembled column by
/// column from unit modes.
pub fn assemble_gramian(problem: &HumProblem) -> Result<DMatrix<Complex64>> {
    let grid = problem.grid();
    let n = grid.len();
    let columns = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut c = vec![Complex64::new(0.0, 0.0); n];
            c[j] = Complex64::new(1.0, 0.0);
            let e = Field::from_spectrum_unchecked(grid, c);
            gamma_apply(&e, problem).map(|g| g.spectrum())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(n, n, |i, j| columns[j][i]))
}

/// Dense solve of `Γ v0 = -i u0` through the assembled Gramian.
pub fn dense_hum_minimizer(problem: &HumProblem) -> Result<Field> {
    let g = assemble_gramian(problem)?;
    let rhs = DVector::from_vec(problem.target().scaled(-I).spectrum());
    let sol = g
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::DivisionByZero("assembled Gramian is singular".into()))?;
    Field::from_spectrum(problem.grid(), sol.iter().copied().collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservabilityMethod {
    Lanczos,
    Dense,
}

#[derive(Clone, Debug)]
pub struct Observability {
    /// `min a(v0, v0) / ||v0||²_{H^{-1}}`.
    pub c_obs: f64,
    pub worst_mode: Field,
    pub iterations: usize,
    pub method: ObservabilityMethod,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LanczosOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 300,
            seed: 42,
        }
    }
}

/// `⟨a, b⟩_{H^{-1}}` with the complex (sesquilinear) pairing on spectra.
fn hminus_inner(grid: &Grid, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let s = SobolevIndex::H_MINUS_1;
    let sum: Complex64 = a
        .iter()
        .zip(b)
        .zip(grid.k_squared())
        .map(|((x, y), &ksq)| x.conj() * y * s.weight(ksq))
        .sum();
    sum * grid.volume()
}

fn axpy(y: &mut [Complex64], a: Complex64, x: &[Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Smallest eigenvalue of `ΛΓ`, self-adjoint in `H^{-1}`, by Lanczos with
/// full reorthogonalization.
pub fn observability_constant(problem: &HumProblem) -> Result<Observability> {
    observability_constant_with(problem, &LanczosOptions::default())
}

pub fn observability_constant_with(problem: &HumProblem, opts: &LanczosOptions) -> Result<Observability> {
    let grid = problem.grid();
    let dim = grid.len();
    let apply = |q: &[Complex64]| -> Result<Vec<Complex64>> {
        let f = Field::from_spectrum_unchecked(grid, q.to_vec());
        Ok(lambda_apply(&gamma_apply(&f, problem)?).spectrum())
    };
    let start = full_spectrum(grid, &mut stream(opts.seed, "lanczos"));
    let norm0 = hminus_inner(grid, &start, &start).re.sqrt();
    let mut basis: Vec<Vec<Complex64>> = vec![start.iter().map(|v| v / norm0).collect()];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let limit = opts.max_iter.min(dim);

    loop {
        let j = basis.len() - 1;
        let mut w = apply(&basis[j])?;
        let alpha = hminus_inner(grid, &basis[j], &w).re;
        alphas.push(alpha);
        for _ in 0..2 {
            for q in &basis {
                let c = hminus_inner(grid, q, &w);
                axpy(&mut w, -c, q);
            }
        }
        let beta = hminus_inner(grid, &w, &w).re.sqrt();

        let k = alphas.len();
        let mut t = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            t[(i, i)] = alphas[i];
            if i + 1 < k {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = t.symmetric_eigen();
        let (imin, theta) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
        let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let y = eig.eigenvectors.column(imin);
        let residual = beta * y[k - 1].abs();
        let breakdown = beta <= 1e-13 * scale.max(f64::MIN_POSITIVE);
        let converged = breakdown || k == dim || (k >= 2 && residual <= opts.tol * scale);
        if converged {
            let mut mode = vec![Complex64::new(0.0, 0.0); dim];
            for (i, q) in basis.iter().enumerate() {
                axpy(&mut mode, Complex64::new(y[i], 0.0), q);
            }
            return Ok(Observability {
                c_obs: theta,
                worst_mode: Field::from_spectrum(grid, mode)?,
                iterations: k,
                method: ObservabilityMethod::Lanczos,
            });
        }
        if k >= limit {
            return Err(Error::LanczosNonConvergence(k));
        }
        betas.push(beta);
        basis.push(w.iter().map(|v| v / beta).collect());
    }
}

/// Dense oracle: smallest eigenvalue of `W^{-1/2} G W^{-1/2}`, where `G` is the
/// assembled Gramian and `W = diag((1+|k|²)^{-1})`.
pub fn observability_constant_dense(problem: &HumProblem) -> Result<Observability> {
    let grid = problem.grid();
    let g = assemble_gramian(problem)?;
    let n = g.nrows();
    let root: Vec<f64> = grid.k_squared().iter().map(|&ksq| (1.0 + ksq).sqrt()).collect();
    // Γ is exactly Hermitian up to rounding; symmetrize before the eigensolve.
    let m = DMatrix::from_fn(n, n, |i, j| {
        0.5 * (g[(i, j)] + g[(j, i)].conj()) * root[i] * root[j]
    });
    let eig = m.symmetric_eigen();
    let (imin, c_obs) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let y = eig.eigenvectors.column(imin);
    let coeffs: Vec<Complex64> = (0..n).map(|i| y[i] * root[i]).collect();
    Ok(Observability {
        c_obs,
        worst_mode: Field::from_spectrum(grid, coeffs)?,
        iterations: n,
        method: ObservabilityMethod::Dense,
    })
}

/// `||w0||²_{H¹} / ∫_0^T ||φ w(t)||²_{H¹} dt` for the free flow `w`.
pub fn h1_observability_ratio(w0: &Field, problem: &HumProblem) -> Result<f64> {
    if w0.grid() != problem.grid() {
        return Err(Error::GridMismatch);
    }
    let num = sobolev_norm(w0, SobolevIndex::H1).powi(2);
    let samples = problem
        .times()
        .times()
        .into_iter()
        .map(|t| {
            problem
                .phi()
                .apply(&free_flow(w0, t))
                .map(|f| sobolev_norm(&f, SobolevIndex::H1).powi(2))
        })
        .collect::<Result<Vec<_>>>()?;
    let den = problem.times().integrate(&samples);
    let ratio = num / den;
    if !(den > 0.0) || !ratio.is_finite() {
        return Err(Error::DivisionByZero(format!(
            "observed H1 energy {den:e} vanishes for a datum of energy {num:e}"
        )));
    }
    Ok(ratio)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_cutoff;
    use crate::random::band_limited_field;

    fn desk(n: usize, nt: usize) -> HumProblem {
        let g = Grid::new(1, n, 8.0).unwrap();
        let phi = build_cutoff(&g, 2.0).unwrap();
        let u0 = Field::gaussian(&g, &[5.0], 0.7, 1.0);
        HumProblem::new(phi, 2.0, nt, u0).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs())
    }

    #[test]
    fn problem_validation() {
        let g = Grid::new(1, 16, 6.0).unwrap();
        let phi = build_cutoff(&g, 1.0).unwrap();
        assert!(HumProblem::new(phi.clone(), 0.0, 16, Field::zeros(&g)).is_err());
        assert!(HumProblem::new(phi.clone(), 1.0, 4, Field::zeros(&g)).is_err());
        let other = Grid::new(1, 32, 6.0).unwrap();
        assert!(matches!(
            HumProblem::new(phi, 1.0, 16, Field::zeros(&other)),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn adjoint_flow_examples() {
        let g = Grid::new(1, 16, std::f64::consts::PI).unwrap();
        let tg = TimeGrid::new(0.0, 1.0, 8).unwrap();
        let v0 = Field::plane_wave(&g, &[3]);
        let v = adjoint_flow(&v0, &tg);
        for (m, f) in v.frames().iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -9.0 * tg.time(m));
            assert!(f.sub(&v0.scaled(phase)).unwrap().max_abs() < 1e-12);
            let a = sobolev_norm(f, SobolevIndex::H_MINUS_1);
            assert!(rel(a, sobolev_norm(&v0, SobolevIndex::H_MINUS_1)) < 1e-12);
        }
        let zero = adjoint_flow(&Field::zeros(&g), &tg);
        assert!(zero.frames().iter().all(|f| f.max_abs() == 0.0));
    }

    #[test]
    fn gamma_linear_and_zero() {
        let p = desk(32, 32);
        let g = p.grid().clone();
        assert_eq!(gamma_apply(&Field::zeros(&g), &p).unwrap().max_abs(), 0.0);
        let mut rng = stream(1, "hum");
        let a = band_limited_field(&g, &mut rng, 8, false);
        let b = band_limited_field(&g, &mut rng, 8, false);
        let c = Complex64::new(0.4, 1.1);
        let lhs = gamma_apply(&a.add_scaled(c, &b).unwrap(), &p).unwrap();
        let rhs = gamma_apply(&a, &p)
            .unwrap()
            .add_scaled(c, &gamma_apply(&b, &p).unwrap())
            .unwrap();
        assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-12 * lhs.max_abs());
    }

    #[test]
    fn coercivity_and_symmetry() {
        let p = desk(64, 64);
        let g = p.grid().clone();
        let mut rng = stream(2, "hum");
        for _ in 0..4 {
            let v = band_limited_field(&g, &mut rng, 10, false);
            let w = band_limited_field(&g, &mut rng, 10, false);
            let gv = gamma_apply(&v, &p).unwrap();
            let gw = gamma_apply(&w, &p).unwrap();
            let avv = gramian_form(&v, &v, &p).unwrap();
            assert!(avv > 0.0);
            assert!(rel(pair(&v, &gv), avv) < 1e-10);
            let s1 = pair(&w, &gv);
            let s2 = pair(&v, &gw);
            assert!(rel(s1, s2) < 1e-10);
            assert!(rel(s1, gramian_form(&v, &w, &p).unwrap()) < 1e-10);
            assert_eq!(gramian_form(&v, &Field::zeros(&g), &p).unwrap(), 0.0);
        }
    }

    #[test]
    fn zero_target_gives_zero_control() {
        let g = Grid::new(1, 32, 8.0).unwrap();
        let phi = build_cutoff(&g, 2.0).unwrap();
        let p = HumProblem::new(phi, 2.0, 32, Field::zeros(&g)).unwrap();
        let sol = hum_solve(&p, 1e-8, 10).unwrap();
        assert_eq!(sol.cg_iterations, 0);
        assert_eq!(sol.minimizer.max_abs(), 0.0);
        assert!(sol.control.frames().iter().all(|f| f.max_abs() == 0.0));
        assert_eq!(sol.terminal_residual, 0.0);
    }

    #[test]
    fn null_control_small_grid() {
        let p = desk(32, 64);
        let sol = hum_solve(&p, 1e-9, 400).unwrap();
        assert!(sol.cg_residual < 1e-9);
        let ratio = sol.relative_terminal_residual(p.target());
        assert!(ratio < 1e-6, "terminal ratio {ratio:e}");
        assert!(sol.smallest_ritz > 0.0);
    }

    #[test]
    fn cg_matches_dense_and_decreases_energy_error() {
        let p = desk(32, 32);
        let dense = dense_hum_minimizer(&p).unwrap();
        let opts = HumOptions {
            tol: 1e-10,
            max_iter: 400,
            record_iterates: true,
        };
        let sol = hum_solve_with(&p, &opts).unwrap();
        let err = sol.minimizer.sub(&dense).unwrap();
        let r = sobolev_norm(&err, SobolevIndex::H_MINUS_1) / sobolev_norm(&dense, SobolevIndex::H_MINUS_1);
        assert!(r < 1e-6, "relative gap {r:e}");
        // a-norm of the error never increases
        let mut prev = f64::INFINITY;
        for x in &sol.iterates {
            let e = x.sub(&dense).unwrap();
            let a = gramian_form(&e, &e, &p).unwrap();
            assert!(a <= prev * (1.0 + 1e-9) + 1e-24);
            prev = a;
        }
    }

    #[test]
    fn stagnation_reports_ritz() {
        let p = desk(32, 32);
        match hum_solve(&p, 1e-14, 2) {
            Err(Error::CgStagnation {
                iterations,
                smallest_ritz,
                ..
            }) => {
                assert_eq!(iterations, 2);
                assert!(smallest_ritz > 0.0);
            }
            other => panic!("expected stagnation, got {other:?}"),
        }
    }

    #[test]
    fn full_observation_constant_is_horizon() {
        let g = Grid::new(1, 32, 8.0).unwrap();
        let p = HumProblem::new(CutoffPhi::uniform(&g), 2.0, 32, Field::zeros(&g)).unwrap();
        let lz = observability_constant(&p).unwrap();
        assert!((lz.c_obs - 2.0).abs() < 1e-8, "{}", lz.c_obs);
        let dense = observability_constant_dense(&p).unwrap();
        assert!((dense.c_obs - 2.0).abs() < 1e-8, "{}", dense.c_obs);
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let p = desk(32, 32);
        let lz = observability_constant(&p).unwrap();
        let dense = observability_constant_dense(&p).unwrap();
        assert!(dense.c_obs > 0.0);
        assert!(rel(lz.c_obs, dense.c_obs) < 1e-6, "{} vs {}", lz.c_obs, dense.c_obs);
        let w = &dense.worst_mode;
        let q = gramian_form(w, w, &p).unwrap() / sobolev_norm(w, SobolevIndex::H_MINUS_1).powi(2);
        assert!(rel(q, dense.c_obs) < 1e-8);
    }

    #[test]
    fn h1_ratio_behaviour() {
        let p = desk(64, 64);
        let g = p.grid().clone();
        assert!(matches!(
            h1_observability_ratio(&Field::zeros(&g), &p),
            Err(Error::DivisionByZero(_))
        ));
        let mut rng = stream(3, "hum");
        for _ in 0..8 {
            let w = band_limited_field(&g, &mut rng, 10, false);
            assert!(h1_observability_ratio(&w, &p).unwrap().is_finite());
        }
        let short = HumProblem::new(p.phi().clone(), 0.05, 16, p.target().clone()).unwrap();
        let far = Field::gaussian(&g, &[6.0], 0.5, 1.0);
        let r = h1_observability_ratio(&far, &short).unwrap();
        assert!((r * 0.05 - 1.0).abs() < 0.2, "ratio*T = {}", r * 0.05);
    }
}
