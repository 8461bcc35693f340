//! Run configuration: a flat TOML document with a handful of sections.
//! Every key has a default and unknown keys are rejected.
//!
//! ```toml
//! seed = 42
//! output_dir = "out"
//!
//! [grid]
//! dim = 1
//! n = 64
//! half_side = 8.0
//!
//! [geometry]
//! radius = 2.0
//!
//! [time]
//! horizon = 2.0
//! nt = 256
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::diagnostics::DeskConfig;
use crate::error::{Error, Result};
use crate::field::{Field, SobolevIndex};
use crate::geometry::build_cutoff;
use crate::grid::Grid;
use crate::hum::{HumOptions, HumProblem};
use crate::nonlinear::NonlinearControlProblem;
use crate::propagate::{NlsOptions, PicardOptions, TimeGrid};
use crate::spectral::sobolev_norm;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub n: usize,
    pub half_side: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            dim: 1,
            n: 64,
            half_side: 8.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySection {
    pub radius: f64,
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self { radius: 2.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub horizon: f64,
    pub nt: usize,
}

impl Default for TimeSection {
    fn default() -> Self {
        Self { horizon: 2.0, nt: 256 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CgSection {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgSection {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 400,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardSection {
    pub tol: f64,
    pub max_iter: usize,
    pub smallness: f64,
}

impl Default for PicardSection {
    fn default() -> Self {
        let p = PicardOptions::default();
        Self {
            tol: p.tol,
            max_iter: p.max_iter,
            smallness: p.smallness,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NlsSection {
    /// Largest `|u|` tolerated before a nonlinear solve is aborted.
    pub blowup_threshold: f64,
}

impl Default for NlsSection {
    fn default() -> Self {
        Self {
            blowup_threshold: NlsOptions::default().blowup_threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSection {
    pub tol: f64,
    pub max_iter: usize,
    pub smallness_delta: f64,
    pub ball_radius: f64,
}

impl Default for ControlSection {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 50,
            smallness_delta: 0.05,
            ball_radius: 0.5,
        }
    }
}

/// Initial state: a Gaussian bump scaled to the given `H^1` norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub amplitude: f64,
    pub width: f64,
    /// Offset along the first axis; defaults to inside the control region.
    pub center: Option<f64>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            amplitude: 0.01,
            width: 0.7,
            center: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagSection {
    pub samples: usize,
    pub sweep_samples: usize,
}

impl Default for DiagSection {
    fn default() -> Self {
        let d = DeskConfig::default();
        Self {
            samples: d.samples,
            sweep_samples: d.sweep_samples,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Every `frame_stride`-th time node is written as a snapshot.
    pub frame_stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { frame_stride: 32 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds above `i64::MAX` do not fit a TOML integer and are written as
    /// decimal strings.
    #[serde(with = "seed_repr")]
    pub seed: u64,
    pub output_dir: PathBuf,
    pub grid: GridSection,
    pub geometry: GeometrySection,
    pub time: TimeSection,
    pub cg: CgSection,
    pub picard: PicardSection,
    pub nls: NlsSection,
    pub control: ControlSection,
    pub data: DataSection,
    pub diag: DiagSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            output_dir: PathBuf::from("qcontrol-out"),
            grid: GridSection::default(),
            geometry: GeometrySection::default(),
            time: TimeSection::default(),
            cg: CgSection::default(),
            picard: PicardSection::default(),
            nls: NlsSection::default(),
            control: ControlSection::default(),
            data: DataSection::default(),
            diag: DiagSection::default(),
            output: OutputSection::default(),
        }
    }
}

mod seed_repr {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(seed: &u64, s: S) -> Result<S::Ok, S::Error> {
        match i64::try_from(*seed) {
            Ok(v) => s.serialize_i64(v),
            Err(_) => s.serialize_str(&seed.to_string()),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(u64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Int(v) => Ok(v),
            Repr::Text(t) => t
                .parse()
                .map_err(|_| de::Error::custom(format!("seed {t:?} is not an unsigned 64-bit integer"))),
        }
    }
}

fn line_of(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

/// Parses and validates a config document. The empty document yields the
/// defaults.
pub fn parse_config(source: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(source).map_err(|e| Error::ConfigParse {
        line: e.span().map(|s| line_of(source, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::ConfigValidation(format!("{name} = {v} must lie in (0, 1)")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid()
            .map_err(|e| Error::ConfigValidation(format!("grid: {e}")))?;
        let (r, l) = (self.geometry.radius, self.grid.half_side);
        if !(r >= 1.0) {
            return Err(Error::ConfigValidation(format!("radius = {r} must be at least 1")));
        }
        if r + 4.0 > l {
            return Err(Error::ConfigValidation(format!(
                "radius + 4 <= half_side violated: {r} + 4 > {l}"
            )));
        }
        if !(self.time.horizon > 0.0) || self.time.nt < 8 {
            return Err(Error::ConfigValidation(format!(
                "time: horizon must be positive and nt at least 8 (got {}, {})",
                self.time.horizon, self.time.nt
            )));
        }
        unit_interval("cg.tol", self.cg.tol)?;
        unit_interval("picard.tol", self.picard.tol)?;
        unit_interval("control.tol", self.control.tol)?;
        for (name, v) in [
            ("picard.smallness", self.picard.smallness),
            ("control.smallness_delta", self.control.smallness_delta),
            ("control.ball_radius", self.control.ball_radius),
            ("data.width", self.data.width),
            ("nls.blowup_threshold", self.nls.blowup_threshold),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::ConfigValidation(format!("{name} = {v} must be positive")));
            }
        }
        if !(self.data.amplitude >= 0.0 && self.data.amplitude.is_finite()) {
            return Err(Error::ConfigValidation("data.amplitude must be non-negative".into()));
        }
        if self.cg.max_iter == 0 || self.picard.max_iter == 0 || self.control.max_iter == 0 {
            return Err(Error::ConfigValidation("iteration caps must be positive".into()));
        }
        if self.output.frame_stride == 0 {
            return Err(Error::ConfigValidation("output.frame_stride must be positive".into()));
        }
        if self.diag.samples == 0 || self.diag.sweep_samples == 0 {
            return Err(Error::ConfigValidation("diag sample counts must be positive".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.dim, self.grid.n, self.grid.half_side)
    }

    pub fn times(&self) -> Result<TimeGrid> {
        TimeGrid::new(0.0, self.time.horizon, self.time.nt)
    }

    /// Center of the initial bump: `R + 3` along the first axis unless set.
    pub fn data_center(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.grid.dim];
        c[0] = self.data.center.unwrap_or(self.geometry.radius + 3.0);
        c
    }

    /// The configured initial state, zero when `amplitude = 0`.
    pub fn initial_state(&self) -> Result<Field> {
        let g = self.grid()?;
        if self.data.amplitude == 0.0 {
            return Ok(Field::zeros(&g));
        }
        let shape = Field::gaussian(&g, &self.data_center(), self.data.width, 1.0);
        let size = sobolev_norm(&shape, SobolevIndex::H1);
        if size == 0.0 {
            return Err(Error::ConfigValidation("data bump vanishes on the grid".into()));
        }
        Ok(shape.scaled_real(self.data.amplitude / size))
    }

    pub fn hum_problem(&self) -> Result<HumProblem> {
        let g = self.grid()?;
        let phi = build_cutoff(&g, self.geometry.radius)?;
        HumProblem::new(phi, self.time.horizon, self.time.nt, self.initial_state()?)
    }

    pub fn hum_options(&self) -> HumOptions {
        HumOptions {
            tol: self.cg.tol,
            max_iter: self.cg.max_iter,
            ..HumOptions::default()
        }
    }

    pub fn picard_options(&self) -> PicardOptions {
        PicardOptions {
            tol: self.picard.tol,
            max_iter: self.picard.max_iter,
            smallness: self.picard.smallness,
            ..PicardOptions::default()
        }
    }

    pub fn nls_options(&self) -> NlsOptions {
        NlsOptions {
            blowup_threshold: self.nls.blowup_threshold,
            ..NlsOptions::default()
        }
    }

    pub fn control_problem(&self) -> Result<NonlinearControlProblem> {
        let mut p = NonlinearControlProblem::new(
            self.hum_problem()?,
            self.control.smallness_delta,
            self.control.ball_radius,
        )?;
        p.tol = self.control.tol;
        p.max_iter = self.control.max_iter;
        p.nls = self.nls_options();
        Ok(p)
    }

    pub fn desk(&self) -> DeskConfig {
        DeskConfig {
            dim: self.grid.dim,
            n: self.grid.n,
            half_side: self.grid.half_side,
            radius: self.geometry.radius,
            horizon: self.time.horizon,
            nt: self.time.nt,
            seed: self.seed,
            samples: self.diag.samples,
            sweep_samples: self.diag.sweep_samples,
        }
    }
}
