//! Cutoff `φ`, multiplier vector field `q` and the control insertion
//! `A f = Λ⁻¹(φ f)`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;
use crate::spectral::{lambda_inverse, spectral_tail};

fn bump(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// Smooth transition `ρ(s) = f(s) / (f(s) + f(1 - s))`, `f(s) = e^{-1/s}`:
/// exactly 0 for `s <= 0`, exactly 1 for `s >= 1`.
pub fn transition(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = bump(s);
    a / (a + bump(1.0 - s))
}

fn radius_of(p: &[f64; 3], dim: usize) -> f64 {
    p[..dim].iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_radius(grid: &Grid, radius: f64, what: &str) -> Result<()> {
    if !radius.is_finite() || radius < 1.0 {
        return Err(Error::InvalidInput(format!("{what} radius must be >= 1, got {radius}")));
    }
    let l = grid.half_side();
    if radius + 4.0 > l {
        return Err(Error::GeometryOverflow(format!(
            "{what} needs R + 4 <= L, got R = {radius}, L = {l}"
        )));
    }
    Ok(())
}

/// Cutoff vanishing on `|x| <= R` and equal to one on `|x| >= R + 1`.
#[derive(Clone, Debug)]
pub struct CutoffPhi {
    radius: f64,
    weights: Vec<f64>,
    field: Field,
}

impl CutoffPhi {
    fn from_weights(grid: &Grid, radius: f64, weights: Vec<f64>) -> Self {
        let values = weights.iter().map(|&w| Complex64::new(w, 0.0)).collect();
        Self {
            radius,
            field: Field::from_values_unchecked(grid, values),
            weights,
        }
    }

    /// `φ ≡ 1`, full observation. Reported with radius 0.
    pub fn uniform(grid: &Grid) -> Self {
        Self::from_weights(grid, 0.0, vec![1.0; grid.len()])
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Pointwise product `φ f`.
    pub fn apply(&self, f: &Field) -> Result<Field> {
        if f.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        let values = f
            .values()
            .iter()
            .zip(&self.weights)
            .map(|(v, &w)| v * w)
            .collect();
        Ok(Field::from_values_unchecked(self.grid(), values))
    }

    /// `1 - φ(x/2)`, supported in `|x| <= 2R + 2`.
    pub fn dilated_complement(&self) -> Field {
        let grid = self.grid();
        let dim = grid.dim();
        Field::from_real_fn(grid, |x| {
            let r = x.iter().take(dim).map(|v| v * v).sum::<f64>().sqrt();
            if self.radius == 0.0 {
                0.0
            } else {
                1.0 - transition(0.5 * r - self.radius)
            }
        })
    }
}

/// `φ` with inner radius `radius` on `grid`.
pub fn build_cutoff(grid: &Grid, radius: f64) -> Result<CutoffPhi> {
    check_radius(grid, radius, "cutoff")?;
    let dim = grid.dim();
    let weights = (0..grid.len())
        .map(|flat| transition(radius_of(&grid.point(flat), dim) - radius))
        .collect();
    Ok(CutoffPhi::from_weights(grid, radius, weights))
}

/// `q(x) = x` on `|x| <= R + 2`, zero on `|x| >= R + 3`.
#[derive(Clone, Debug)]
pub struct MultiplierQ {
    radius: f64,
    components: Vec<Field>,
}

impl MultiplierQ {
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn components(&self) -> &[Field] {
        &self.components
    }

    /// Worst spectral tail over the components.
    pub fn spectral_tail(&self) -> f64 {
        self.components.iter().map(spectral_tail).fold(0.0, f64::max)
    }
}

pub fn build_multiplier(grid: &Grid, radius: f64) -> Result<MultiplierQ> {
    check_radius(grid, radius, "multiplier")?;
    let dim = grid.dim();
    let profile: Vec<f64> = (0..grid.len())
        .map(|flat| 1.0 - transition(radius_of(&grid.point(flat), dim) - radius - 2.0))
        .collect();
    let components = (0..dim)
        .map(|axis| {
            let values = (0..grid.len())
                .map(|flat| Complex64::new(grid.point(flat)[axis] * profile[flat], 0.0))
                .collect();
            Field::from_values_unchecked(grid, values)
        })
        .collect();
    Ok(MultiplierQ { radius, components })
}

/// `A f = Λ⁻¹(φ f)`.
pub fn control_insert(phi: &CutoffPhi, f: &Field) -> Result<Field> {
    Ok(lambda_inverse(&phi.apply(f)?))
}
