use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;

/// Uniform time grid `t_m = t0 + m (t1 - t0) / nt`, `m = 0..=nt`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    nt: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, nt: usize) -> Result<Self> {
        if nt == 0 {
            return Err(Error::InvalidTimeGrid("nt must be at least 1".into()));
        }
        if !t0.is_finite() || !t1.is_finite() || t0 == t1 {
            return Err(Error::InvalidTimeGrid(format!(
                "endpoints must be finite and distinct, got [{t0}, {t1}]"
            )));
        }
        Ok(Self { t0, t1, nt })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    /// Signed step.
    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.nt as f64
    }

    pub fn time(&self, m: usize) -> f64 {
        if m == self.nt {
            self.t1
        } else {
            self.t0 + m as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.nt).map(|m| self.time(m)).collect()
    }

    /// Composite trapezoid weights over `|t1 - t0|`.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.dt().abs();
        (0..=self.nt)
            .map(|m| if m == 0 || m == self.nt { 0.5 * h } else { h })
            .collect()
    }

    /// Trapezoid rule for samples at the nodes.
    pub fn integrate(&self, samples: &[f64]) -> f64 {
        debug_assert_eq!(samples.len(), self.nt + 1);
        samples
            .iter()
            .zip(self.trapezoid_weights())
            .map(|(s, w)| s * w)
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Data given at `t0`, march towards `t1`.
    Forward,
    /// Data given at `t1`, march towards `t0`.
    Backward,
}

/// Fields sampled at every node of a [`TimeGrid`].
#[derive(Clone, Debug)]
pub struct Trajectory {
    grid: Grid,
    times: TimeGrid,
    frames: Vec<Field>,
}

impl Trajectory {
    pub fn new(grid: &Grid, times: TimeGrid, frames: Vec<Field>) -> Result<Self> {
        if frames.len() != times.nt() + 1 {
            return Err(Error::MisalignedTrajectory(format!(
                "{} frames for {} time nodes",
                frames.len(),
                times.nt() + 1
            )));
        }
        if frames.iter().any(|f| f.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: grid.clone(),
            times,
            frames,
        })
    }

    pub fn zeros(grid: &Grid, times: TimeGrid) -> Self {
        Self {
            grid: grid.clone(),
            times,
            frames: vec![Field::zeros(grid); times.nt() + 1],
        }
    }

    /// Same field at every node.
    pub fn constant(field: &Field, times: TimeGrid) -> Self {
        Self {
            grid: field.grid().clone(),
            times,
            frames: vec![field.clone(); times.nt() + 1],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    pub fn frames(&self) -> &[Field] {
        &self.frames
    }

    pub fn frame(&self, m: usize) -> &Field {
        &self.frames[m]
    }

    pub fn first(&self) -> &Field {
        &self.frames[0]
    }

    pub fn last(&self) -> &Field {
        &self.frames[self.frames.len() - 1]
    }

    pub fn into_frames(self) -> Vec<Field> {
        self.frames
    }

    /// Applies `f` to every frame.
    pub fn map(&self, f: impl Fn(&Field) -> Field) -> Trajectory {
        Trajectory {
            grid: self.grid.clone(),
            times: self.times,
            frames: self.frames.iter().map(f).collect(),
        }
    }

    pub fn sub(&self, other: &Trajectory) -> Result<Trajectory> {
        self.check_aligned(other)?;
        let frames = self
            .frames
            .iter()
            .zip(&other.frames)
            .map(|(a, b)| a.sub(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            grid: self.grid.clone(),
            times: self.times,
            frames,
        })
    }

    pub fn add(&self, other: &Trajectory) -> Result<Trajectory> {
        self.check_aligned(other)?;
        let frames = self
            .frames
            .iter()
            .zip(&other.frames)
            .map(|(a, b)| a.add(b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Trajectory {
            grid: self.grid.clone(),
            times: self.times,
            frames,
        })
    }

    pub(crate) fn check_aligned(&self, other: &Trajectory) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.times != other.times {
            return Err(Error::MisalignedTrajectory(format!(
                "time grids differ: {:?} vs {:?}",
                self.times, other.times
            )));
        }
        Ok(())
    }

    pub(crate) fn check_matches(&self, grid: &Grid, times: &TimeGrid) -> Result<()> {
        if &self.grid != grid {
            return Err(Error::GridMismatch);
        }
        if &self.times != times {
            return Err(Error::MisalignedTrajectory(format!(
                "source on {:?}, solve on {:?}",
                self.times, times
            )));
        }
        Ok(())
    }
}
