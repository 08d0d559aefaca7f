//! Source and receiver directivity: omnidirectional, first-order analytic
//! and measured patterns interpolated through spherical harmonics.
//!
//! Every pattern's boresight is its local +x axis.

mod grid;
mod sh;
mod sphere;
mod standin;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{Matrix3, Rotation3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{unit_from_angles, Vec3};

pub use grid::{InterpolatedGrid, MeasuredGrid};
pub use sh::{
    n_coefficients, real_sh, resample_to_fibonacci, sh_fit, ShCoefficients, DEFAULT_LAMBDA,
    DEFAULT_SH_ORDER, MAX_CONDITION,
};
pub use sphere::{fibonacci_grid, nearest_brute_force, voronoi_weights, SphereIndex};
pub use standin::{standin_grid, standin_names, STANDIN_MIC, STANDIN_SOURCES};

pub const DEFAULT_FIBONACCI_POINTS: usize = 1000;
/// Bins per fitted spectrum (DFT length twice this) used for stand-ins.
pub const DEFAULT_FIT_BINS: usize = 256;

/// `beta + (1 - beta) cos(theta)`, `theta` being the angle off boresight.
pub fn eval_analytic(beta: f64, theta: f64) -> Result<f64> {
    check_beta(beta)?;
    Ok(beta + (1.0 - beta) * theta.cos())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Domain(format!("analytic pattern beta {beta} outside [0, 1]")));
    }
    Ok(())
}

/// Nearest-neighbour gain of `grid` towards (azimuth, elevation).
pub fn eval_measured(grid: &InterpolatedGrid, theta: f64, phi: f64, bin: usize) -> Complex64 {
    grid.gains[grid.nearest(&unit_from_angles(theta, phi))][bin]
}

#[derive(Debug, Clone)]
pub enum PatternKind {
    Omni,
    Analytic { beta: f64 },
    Measured(Arc<InterpolatedGrid>),
}

/// A pattern together with the rotation that maps its own frame into the
/// frame of the device carrying it.
#[derive(Debug, Clone)]
pub struct DirectivityPattern {
    pub kind: PatternKind,
    pub rotation: Rotation3<f64>,
}

/// Gain of a pattern towards one direction.
#[derive(Debug, Clone, Copy)]
pub enum Gain<'a> {
    Flat(f64),
    /// Per-bin gains and the grid point they belong to.
    Spectrum { point: usize, bins: &'a [Complex64] },
}

impl DirectivityPattern {
    pub fn omni() -> Self {
        DirectivityPattern {
            kind: PatternKind::Omni,
            rotation: Rotation3::identity(),
        }
    }

    pub fn analytic(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(DirectivityPattern {
            kind: PatternKind::Analytic { beta },
            rotation: Rotation3::identity(),
        })
    }

    pub fn measured(grid: Arc<InterpolatedGrid>) -> Self {
        DirectivityPattern {
            kind: PatternKind::Measured(grid),
            rotation: Rotation3::identity(),
        }
    }

    pub fn is_flat(&self) -> bool {
        !matches!(self.kind, PatternKind::Measured(_))
    }

    pub fn label(&self) -> String {
        match &self.kind {
            PatternKind::Omni => "omni".into(),
            PatternKind::Analytic { beta } => format!("analytic({beta})"),
            PatternKind::Measured(g) => format!("measured({})", g.name),
        }
    }

    /// Gain towards `dir`, given in the carrying device's frame.
    pub fn gain(&self, dir: &Vec3) -> Gain<'_> {
        match &self.kind {
            PatternKind::Omni => Gain::Flat(1.0),
            PatternKind::Analytic { beta } => {
                let local = self.rotation.inverse_transform_vector(dir);
                let cos = local.x / local.norm();
                Gain::Flat(beta + (1.0 - beta) * cos)
            }
            PatternKind::Measured(grid) => {
                let local = self.rotation.inverse_transform_vector(dir);
                let point = grid.nearest(&local);
                Gain::Spectrum {
                    point,
                    bins: &grid.gains[point],
                }
            }
        }
    }

    /// Complex gain at (azimuth, elevation) and frequency bin. Flat patterns
    /// ignore the bin.
    pub fn eval(&self, theta: f64, phi: f64, bin: usize) -> Complex64 {
        match self.gain(&unit_from_angles(theta, phi)) {
            Gain::Flat(g) => Complex64::new(g, 0.0),
            Gain::Spectrum { bins, .. } => bins[bin],
        }
    }
}

fn check_rotation(r: &Matrix3<f64>) -> Result<Rotation3<f64>> {
    let det = r.determinant();
    if (det - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("rotation determinant {det}, expected +1")));
    }
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    if ortho > 1e-9 {
        return Err(Error::Domain(format!("rotation matrix is not orthonormal ({ortho:.2e})")));
    }
    Ok(Rotation3::from_matrix_unchecked(*r))
}

/// The pattern turned by `rotation`: probing the result at `d` equals
/// probing the original at `rotation^-1 d`.
pub fn rotate_pattern(pattern: &DirectivityPattern, rotation: &Matrix3<f64>) -> Result<DirectivityPattern> {
    let r = check_rotation(rotation)?;
    Ok(DirectivityPattern {
        kind: pattern.kind.clone(),
        rotation: r * pattern.rotation,
    })
}

/// Fit a measured grid and resample it onto an `n_points` Fibonacci grid.
pub fn interpolate_grid(
    grid: &MeasuredGrid,
    order: usize,
    lambda: f64,
    f_bins: usize,
    n_points: usize,
) -> Result<InterpolatedGrid> {
    let sh = sh_fit(grid, order, lambda, f_bins)?;
    resample_to_fibonacci(&sh, n_points)
}

/// Stand-in patterns are deterministic, so their interpolated grids are
/// built once per process.
pub fn standin_interpolated(name: &str) -> Result<Arc<InterpolatedGrid>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<InterpolatedGrid>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(g) = cache.lock().expect("stand-in cache poisoned").get(name) {
        return Ok(g.clone());
    }
    let grid = standin_grid(name)?;
    let interp = Arc::new(interpolate_grid(
        &grid,
        DEFAULT_SH_ORDER,
        DEFAULT_LAMBDA,
        DEFAULT_FIT_BINS,
        DEFAULT_FIBONACCI_POINTS,
    )?);
    cache
        .lock()
        .expect("stand-in cache poisoned")
        .entry(name.to_string())
        .or_insert(interp.clone());
    Ok(interp)
}
