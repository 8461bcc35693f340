//! Command-line front end. Each subcommand writes its artifacts through an
//! [`OutputDir`] and finishes with the manifest.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::diagnostics::{run_all, run_named, DiagnosticReport, Verdict, DIAGNOSTIC_NAMES};
use crate::error::{Error, Result};
use crate::field::SobolevIndex;
use crate::geometry::{build_cutoff, build_multiplier};
use crate::hum::{hum_solve_with, observability_constant, observability_constant_dense, HumProblem};
use crate::io::plot::{line_svg, table_csv, Series};
use crate::io::snapshot::{encode_field, slice_csv, spectrum_csv, trajectory_frames};
use crate::io::{load_config, OutputDir, RunConfig, RunManifest};
use crate::nonlinear::nonlinear_null_control;
use crate::propagate::{nls_solve, picard_solve, Direction, NormBundle};
use crate::spectral::sobolev_norm;

const EXIT_CODES: &str = "\
Exit codes:
  0  every verdict passed
  1  ran to completion but a verdict failed
  2  configuration or input error
  3  solver did not converge
  4  blowup detected
  5  I/O error

QCONTROL_THREADS caps the worker threads.";

#[derive(Debug, Parser)]
#[command(name = "qcontrol", version, about = "Null control for the defocusing quintic Schrödinger equation", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,
    #[command(subcommand)]
    pub command: Command,
}

/// Settings that override the config file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// TOML config file; omitted keys take their defaults
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Points per axis
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Half side L of the box [-L, L)^d
    #[arg(long = "box", global = true)]
    pub half_side: Option<f64>,
    /// Control radius R
    #[arg(long, global = true)]
    pub radius: Option<f64>,
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// Time steps nt
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Tolerance of the subcommand's main solver
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// H^1 norm of the initial bump
    #[arg(long, global = true)]
    pub amplitude: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forward nonlinear solve of the configured initial state
    Simulate {
        /// Cross-check the splitting scheme against the Picard iteration
        #[arg(long)]
        picard: bool,
    },
    /// Linear null control by conjugate gradients on the Gramian
    Hum,
    /// Nonlinear null control by the fixed-point iteration
    Nlcontrol,
    /// Observability constant, optionally along a radius sweep
    Observe {
        /// Radii as start:end:step, end inclusive
        #[arg(long)]
        radius_sweep: Option<String>,
        /// Use the assembled Gramian instead of Lanczos
        #[arg(long)]
        dense: bool,
    },
    /// Empirical checks; `all` runs the full battery
    Diag {
        name: String,
        /// Random draws for the observability sweeps
        #[arg(long)]
        sweep: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Hum => "hum",
            Command::Nlcontrol => "nlcontrol",
            Command::Observe { .. } => "observe",
            Command::Diag { .. } => "diag",
        }
    }
}

/// Merges the config file and the command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let o = &cli.overrides;
    let mut cfg = match &o.config {
        Some(path) => load_config(path).map_err(|e| match e {
            Error::Io(io) => Error::ConfigValidation(format!("cannot read {}: {io}", path.display())),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    if let Some(v) = &o.out {
        cfg.output_dir = v.clone();
    }
    if let Some(v) = o.seed {
        cfg.seed = v;
    }
    if let Some(v) = o.dim {
        cfg.grid.dim = v;
    }
    if let Some(v) = o.n {
        cfg.grid.n = v;
    }
    if let Some(v) = o.half_side {
        cfg.grid.half_side = v;
    }
    if let Some(v) = o.radius {
        cfg.geometry.radius = v;
    }
    if let Some(v) = o.horizon {
        cfg.time.horizon = v;
    }
    if let Some(v) = o.steps {
        cfg.time.nt = v;
    }
    if let Some(v) = o.amplitude {
        cfg.data.amplitude = v;
    }
    if let Some(v) = o.tol {
        match cli.command {
            Command::Nlcontrol => cfg.control.tol = v,
            Command::Simulate { .. } => cfg.picard.tol = v,
            _ => cfg.cg.tol = v,
        }
    }
    if let Command::Diag { sweep: Some(s), .. } = cli.command {
        cfg.diag.sweep_samples = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `start:end:step` into an inclusive list.
pub fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::ConfigValidation(format!("radius sweep {spec:?} is not start:end:step"));
    let parts: Vec<f64> = spec
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [a, b, step] = parts[..] else { return Err(bad()) };
    if !(step > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
        return Err(bad());
    }
    let count = ((b - a) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| a + i as f64 * step).collect())
}

pub fn run(cli: &Cli) -> Result<RunManifest> {
    let cfg = resolve_config(cli)?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let verdicts = match &cli.command {
        Command::Simulate { picard } => simulate(&cfg, *picard, &mut out)?,
        Command::Hum => hum(&cfg, &mut out)?,
        Command::Nlcontrol => nlcontrol(&cfg, &mut out)?,
        Command::Observe { radius_sweep, dense } => observe(&cfg, radius_sweep.as_deref(), *dense, &mut out)?,
        Command::Diag { name, .. } => diag(&cfg, name, &mut out)?,
    };
    out.finish(cli.command.name(), &cfg, verdicts)
}

/// Runs the CLI and returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    if let Some(n) = std::env::var("QCONTROL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // ignore the error when a pool already exists (repeated calls in tests)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(&cli) {
        Ok(m) if m.passed => 0,
        Ok(m) => {
            for (k, v) in &m.verdicts {
                if !v {
                    eprintln!("verdict failed: {k}");
                }
            }
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn norm_rows(traj: &crate::propagate::Trajectory) -> Vec<Vec<f64>> {
    traj.times()
        .times()
        .into_iter()
        .zip(traj.frames())
        .map(|(t, f)| vec![t, f.l2_norm(), sobolev_norm(f, SobolevIndex::H1)])
        .collect()
}

fn write_frames(out: &mut OutputDir, dir: &str, traj: &crate::propagate::Trajectory, stride: usize) -> Result<()> {
    let (index, files) = trajectory_frames(traj, "frame", stride);
    for (name, bytes) in files {
        out.write(&format!("{dir}/{name}"), &bytes)?;
    }
    out.write_json(&format!("{dir}/index.json"), &index)
}

fn simulate(cfg: &RunConfig, picard: bool, out: &mut OutputDir) -> Result<BTreeMap<String, bool>> {
    let u0 = cfg.initial_state()?;
    let times = cfg.times()?;
    let traj = nls_solve(&u0, None, &times, Direction::Forward, &cfg.nls_options())?;
    let norms = NormBundle::of(&traj);
    let mut verdicts = BTreeMap::from([("finite".to_string(), traj.last().is_finite())]);
    out.write("initial.qcf", &encode_field(&u0))?;
    out.write("final.qcf", &encode_field(traj.last()))?;
    out.write_text("final_spectrum.csv", &spectrum_csv(traj.last()))?;
    out.write_text("final_slice.csv", &slice_csv(traj.last()))?;
    out.write_json("norms.json", &norms)?;
    let rows = norm_rows(&traj);
    out.write_text("norm_history.csv", &table_csv(&["t", "l2", "h1"], &rows))?;
    let series = vec![
        Series::new("L2", rows.iter().map(|r| (r[0], r[1])).collect()),
        Series::new("H1", rows.iter().map(|r| (r[0], r[2])).collect()),
    ];
    out.write_text("norm_history.svg", &line_svg("norms of u(t)", "t", "norm", &series, false))?;
    write_frames(out, "frames", &traj, cfg.output.frame_stride)?;
    if picard {
        let p = picard_solve(&u0, None, &times, &cfg.picard_options())?;
        let gap = p
            .trajectory
            .frames()
            .iter()
            .zip(traj.frames())
            .map(|(a, b)| a.sub(b).map(|d| d.l2_norm()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let rows: Vec<Vec<f64>> = p
            .increments
            .iter()
            .enumerate()
            .map(|(k, v)| vec![(k + 1) as f64, *v])
            .collect();
        out.write_text("picard_increments.csv", &table_csv(&["k", "increment"], &rows))?;
        out.write_json(
            "picard.json",
            &serde_json::json!({
                "iterations": p.iterations(),
                "increments": p.increments,
                "ratios": p.ratios,
                "norms": p.norms,
                "sup_l2_gap_to_splitting": gap,
            }),
        )?;
        let scale = u0.l2_norm().max(f64::MIN_POSITIVE);
        verdicts.insert("picard-agrees".into(), gap <= 1e-4 * scale);
    }
    Ok(verdicts)
}

fn write_geometry(cfg: &RunConfig, out: &mut OutputDir) -> Result<()> {
    let g = cfg.grid()?;
    let phi = build_cutoff(&g, cfg.geometry.radius)?;
    out.write("geometry/cutoff.qcf", &encode_field(phi.field()))?;
    let q = build_multiplier(&g, cfg.geometry.radius)?;
    for (j, c) in q.components().iter().enumerate() {
        out.write(&format!("geometry/multiplier_{j}.qcf"), &encode_field(c))?;
    }
    Ok(())
}

/// Relative terminal residual accepted by `hum`.
pub const HUM_TERMINAL_TOL: f64 = 1e-3;
/// Relative terminal residual accepted by `nlcontrol`.
pub const NL_TERMINAL_TOL: f64 = 1e-2;

fn hum(cfg: &RunConfig, out: &mut OutputDir) -> Result<BTreeMap<String, bool>> {
    let problem = cfg.hum_problem()?;
    let sol = hum_solve_with(&problem, &cfg.hum_options())?;
    let rel = sol.relative_terminal_residual(problem.target());
    write_geometry(cfg, out)?;
    out.write("minimizer.qcf", &encode_field(&sol.minimizer))?;
    out.write("final_state.qcf", &encode_field(&sol.final_state))?;
    write_frames(out, "control", &sol.control, cfg.output.frame_stride)?;
    out.write_json(
        "hum.json",
        &serde_json::json!({
            "cg_iterations": sol.cg_iterations,
            "cg_residual": sol.cg_residual,
            "smallest_ritz": sol.smallest_ritz,
            "terminal_residual": sol.terminal_residual,
            "relative_terminal_residual": rel,
            "target_h_minus1": sobolev_norm(problem.target(), SobolevIndex::H_MINUS_1),
            "residual_history": sol.residual_history,
        }),
    )?;
    let rows: Vec<Vec<f64>> = sol
        .residual_history
        .iter()
        .enumerate()
        .map(|(k, r)| vec![k as f64, *r])
        .collect();
    out.write_text("cg_history.csv", &table_csv(&["k", "relative_residual"], &rows))?;
    let series = [Series::new("residual", rows.iter().map(|r| (r[0], r[1])).collect())];
    out.write_text("cg_history.svg", &line_svg("CG residual", "k", "relative residual", &series, true))?;
    Ok(BTreeMap::from([
        ("cg-converged".to_string(), sol.cg_residual <= cfg.cg.tol || sol.terminal_residual == 0.0),
        ("terminal-residual".to_string(), rel <= HUM_TERMINAL_TOL),
    ]))
}

fn nlcontrol(cfg: &RunConfig, out: &mut OutputDir) -> Result<BTreeMap<String, bool>> {
    let problem = cfg.control_problem()?;
    let res = nonlinear_null_control(&problem)?;
    out.write("phi0.qcf", &encode_field(&res.phi0))?;
    out.write("final_state.qcf", &encode_field(&res.final_state))?;
    write_frames(out, "control", &res.control, cfg.output.frame_stride)?;
    out.write_json(
        "control.json",
        &serde_json::json!({
            "iterations": res.iterates.len(),
            "increments": res.iterates,
            "contraction_factors": res.contraction_factors,
            "terminal_residual": res.terminal_residual,
            "relative_terminal_residual": res.relative_terminal_residual,
            "claim1_ratio": res.claim1_ratio,
            "claim2_ratio": res.claim2_ratio,
            "consistency_residual": res.consistency_residual,
            "backward_mismatch": res.backward_mismatch,
            "cg_iterations": res.cg_iterations,
            "sign": res.sign,
        }),
    )?;
    // the claim ratios are measured once, on the verified solution
    let rows: Vec<Vec<f64>> = res
        .iterates
        .iter()
        .enumerate()
        .map(|(k, inc)| {
            let factor = if k == 0 { f64::NAN } else { res.contraction_factors[k - 1] };
            vec![(k + 1) as f64, *inc, factor, res.claim1_ratio, res.claim2_ratio]
        })
        .collect();
    out.write_text(
        "iterate_history.csv",
        &table_csv(
            &["k", "increment", "contraction_factor", "claim1_ratio", "claim2_ratio"],
            &rows,
        ),
    )?;
    let factors: Vec<(f64, f64)> = res
        .contraction_factors
        .iter()
        .enumerate()
        .map(|(k, f)| ((k + 2) as f64, *f))
        .collect();
    out.write_text(
        "contraction.csv",
        &table_csv(&["k", "factor"], &factors.iter().map(|p| vec![p.0, p.1]).collect::<Vec<_>>()),
    )?;
    out.write_text(
        "contraction.svg",
        &line_svg("contraction factors", "k", "factor", &[Series::new("factor", factors)], true),
    )?;
    Ok(BTreeMap::from([
        (
            "contraction".to_string(),
            res.contraction_factors.iter().all(|&f| f < 1.0),
        ),
        (
            "terminal-residual".to_string(),
            res.relative_terminal_residual <= NL_TERMINAL_TOL || res.terminal_residual == 0.0,
        ),
    ]))
}

fn observe(cfg: &RunConfig, sweep: Option<&str>, dense: bool, out: &mut OutputDir) -> Result<BTreeMap<String, bool>> {
    let radii = match sweep {
        Some(s) => parse_sweep(s)?,
        None => vec![cfg.geometry.radius],
    };
    let g = cfg.grid()?;
    let mut rows = Vec::new();
    for &r in &radii {
        let phi = build_cutoff(&g, r).map_err(|e| Error::ConfigValidation(format!("radius {r}: {e}")))?;
        let problem = HumProblem::new(phi, cfg.time.horizon, cfg.time.nt, crate::field::Field::zeros(&g))?;
        let obs = if dense {
            observability_constant_dense(&problem)?
        } else {
            observability_constant(&problem)?
        };
        rows.push(vec![r, cfg.time.horizon, obs.c_obs, obs.iterations as f64]);
    }
    out.write_text("observability.csv", &table_csv(&["R", "T", "c_obs", "lanczos_iters"], &rows))?;
    let series = [Series::new("c_obs", rows.iter().map(|r| (r[0], r[2])).collect())];
    out.write_text("observability.svg", &line_svg("observability constant", "R", "c_obs", &series, true))?;
    let positive = rows.iter().all(|r| r[2] > 0.0);
    // relative slack for eigenvalue round-off
    let monotone = rows.windows(2).all(|w| w[1][2] <= w[0][2] * (1.0 + 1e-8));
    Ok(BTreeMap::from([
        ("positive".to_string(), positive),
        ("non-increasing".to_string(), monotone),
    ]))
}

fn write_report(out: &mut OutputDir, r: &DiagnosticReport) -> Result<()> {
    out.write_json(&format!("{}.json", r.name), r)?;
    let rows: Vec<Vec<f64>> = r
        .refinement_trend
        .iter()
        .map(|p| vec![p.n as f64, p.nt as f64, p.value])
        .collect();
    out.write_text(&format!("{}_trend.csv", r.name), &table_csv(&["n", "nt", "value"], &rows))?;
    let series = [Series::new(
        r.name.clone(),
        rows.iter().enumerate().map(|(i, row)| (i as f64, row[2])).collect(),
    )];
    out.write_text(
        &format!("{}_trend.svg", r.name),
        &line_svg(&r.name, "refinement level", "value", &series, true),
    )
}

fn diag(cfg: &RunConfig, name: &str, out: &mut OutputDir) -> Result<BTreeMap<String, bool>> {
    let desk = cfg.desk();
    let reports = if name == "all" {
        run_all(&desk)?
    } else if DIAGNOSTIC_NAMES.contains(&name) {
        vec![run_named(name, &desk)?]
    } else {
        return Err(Error::ConfigValidation(format!(
            "unknown diagnostic {name:?}; expected all or one of {}",
            DIAGNOSTIC_NAMES.join(", ")
        )));
    };
    let mut summary = String::from("name,verdict,residual_or_ratio,tolerance,lhs,rhs\n");
    let mut verdicts = BTreeMap::new();
    for r in &reports {
        write_report(out, r)?;
        let verdict = match r.verdict {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Skipped => "skipped",
        };
        summary.push_str(&format!(
            "{},{verdict},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            r.name, r.residual_or_ratio, r.tolerance, r.lhs, r.rhs
        ));
        verdicts.insert(r.name.clone(), r.verdict != Verdict::Fail);
    }
    out.write_text("summary.csv", &summary)?;
    Ok(verdicts)
}
