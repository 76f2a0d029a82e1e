//! Named conductivities and boundary data used by tests, benches and the CLI.

use std::path::PathBuf;

use crate::elliptic::Conductivity;
use crate::error::{HipError, Result};
use crate::io::load_field;
use crate::mesh::{Grid, ScalarField};

#[derive(Debug, Clone, PartialEq)]
pub enum SigmaPreset {
    Constant(f64),
    /// `1 + a exp(-((x - x0)^2 + (y - y0)^2) / r)`.
    Bump {
        a: f64,
        x0: f64,
        y0: f64,
        r: f64,
    },
    /// `exp(x)`.
    ExpX,
    File(PathBuf),
}

impl SigmaPreset {
    /// The 0.2-amplitude centered bump used throughout the test suite.
    pub fn standard_bump() -> Self {
        SigmaPreset::Bump { a: 0.2, x0: 0.5, y0: 0.5, r: 0.05 }
    }

    pub fn field(&self, grid: Grid) -> Result<ScalarField> {
        match *self {
            SigmaPreset::Constant(c) => Ok(ScalarField::constant(grid, c)),
            SigmaPreset::Bump { a, x0, y0, r } => {
                if !(r > 0.0) {
                    return Err(HipError::InvalidArgument(format!("bump width must be positive, got {r}")));
                }
                Ok(bump(grid, a, x0, y0, r).map(|v| v + 1.0))
            }
            SigmaPreset::ExpX => Ok(ScalarField::from_fn(grid, |x, _| x.exp())),
            SigmaPreset::File(ref path) => {
                let f = load_field(path)?;
                grid.check_same(&f.grid())?;
                Ok(f)
            }
        }
    }

    pub fn build(&self, grid: Grid) -> Result<Conductivity> {
        Conductivity::new(self.field(grid)?)
    }
}

/// Gaussian `a exp(-((x - x0)^2 + (y - y0)^2) / r)` without the unit offset.
pub fn bump(grid: Grid, a: f64, x0: f64, y0: f64, r: f64) -> ScalarField {
    ScalarField::from_fn(grid, move |x, y| a * (-((x - x0).powi(2) + (y - y0).powi(2)) / r).exp())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryPreset {
    LinearX,
    /// `a x + b y`.
    Affine {
        a: f64,
        b: f64,
    },
}

impl BoundaryPreset {
    pub fn field(&self, grid: Grid) -> ScalarField {
        match *self {
            BoundaryPreset::LinearX => ScalarField::from_fn(grid, |x, _| x),
            BoundaryPreset::Affine { a, b } => ScalarField::from_fn(grid, move |x, y| a * x + b * y),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_peak_and_floor() {
        let g = Grid::new(16).unwrap();
        let s = SigmaPreset::standard_bump().build(g).unwrap();
        assert!((s.field().at(8, 8) - 1.2).abs() < 1e-15);
        assert!(s.sigma_min() > 1.0);
        assert!(SigmaPreset::Constant(-1.0).build(g).is_err());
    }

    #[test]
    fn affine_boundary() {
        let g = Grid::new(8).unwrap();
        let f = BoundaryPreset::Affine { a: 2.0, b: -1.0 }.field(g);
        assert_eq!(f.at(8, 4), 2.0 - 0.5);
    }

    #[test]
    fn file_preset_round_trip() {
        let g = Grid::new(8).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.hip");
        crate::io::save_field(&path, &ScalarField::constant(g, 2.5)).unwrap();
        let s = SigmaPreset::File(path).build(g).unwrap();
        assert_eq!(s.sigma_min(), 2.5);
        assert!(SigmaPreset::File(dir.path().join("missing")).build(g).is_err());
    }
}
