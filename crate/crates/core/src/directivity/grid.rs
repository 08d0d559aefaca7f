use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

use super::sh::node_direction;
use super::sphere::SphereIndex;

/// Directional impulse responses on a regular azimuth x elevation grid.
///
/// Azimuth is measured counter-clockwise from the local +x axis (the
/// boresight) towards +y; elevation from the horizontal plane towards +z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuredGrid {
    #[serde(default)]
    pub name: String,
    pub fs_hz: f64,
    pub azimuths_deg: Vec<f64>,
    pub elevations_deg: Vec<f64>,
    pub fir_length: usize,
    /// `responses[elevation][azimuth][tap]`.
    pub responses: Vec<Vec<Vec<f64>>>,
}

impl MeasuredGrid {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut grid: MeasuredGrid = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        if grid.name.is_empty() {
            grid.name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        grid.validate()?;
        Ok(grid)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::Internal(e.to_string()))?;
        crate::io::write_atomic(path, text.as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs_hz.is_finite() && self.fs_hz > 0.0) {
            return Err(Error::Config(format!("grid sampling rate must be > 0, got {}", self.fs_hz)));
        }
        if self.azimuths_deg.is_empty() || self.elevations_deg.is_empty() {
            return Err(Error::Config("grid needs at least one azimuth and one elevation".into()));
        }
        if self.fir_length == 0 {
            return Err(Error::Config("fir_length must be positive".into()));
        }
        if self
            .azimuths_deg
            .iter()
            .chain(&self.elevations_deg)
            .any(|a| !a.is_finite())
        {
            return Err(Error::Config("grid angles must be finite".into()));
        }
        if self.elevations_deg.iter().any(|e| e.abs() > 90.0) {
            return Err(Error::Config("elevations must lie in [-90, 90] degrees".into()));
        }
        if self.responses.len() != self.elevations_deg.len() {
            return Err(Error::Shape {
                expected: self.elevations_deg.len(),
                got: self.responses.len(),
            });
        }
        for row in &self.responses {
            if row.len() != self.azimuths_deg.len() {
                return Err(Error::Shape {
                    expected: self.azimuths_deg.len(),
                    got: row.len(),
                });
            }
            for fir in row {
                if fir.len() != self.fir_length {
                    return Err(Error::Shape {
                        expected: self.fir_length,
                        got: fir.len(),
                    });
                }
                if fir.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Config("grid responses must be finite".into()));
                }
            }
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.azimuths_deg.len() * self.elevations_deg.len()
    }

    /// Node directions in `responses` order (elevation-major).
    pub fn nodes(&self) -> Vec<Vec3> {
        self.elevations_deg
            .iter()
            .flat_map(|&el| self.azimuths_deg.iter().map(move |&az| node_direction(az, el)))
            .collect()
    }
}

/// Complex gains on a dense, near-uniform point set.
#[derive(Debug, Clone)]
pub struct InterpolatedGrid {
    pub name: String,
    pub fs: f64,
    /// DFT length; gains cover bins `0..=n_fft / 2`.
    pub n_fft: usize,
    /// `gains[point][bin]`.
    pub gains: Vec<Vec<Complex64>>,
    index: SphereIndex,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InterpolatedGridDoc {
    name: String,
    fs_hz: f64,
    n_fft: usize,
    points: Vec<[f64; 3]>,
    gains_re: Vec<Vec<f64>>,
    gains_im: Vec<Vec<f64>>,
}

impl InterpolatedGrid {
    pub fn new(
        name: String,
        points: Vec<Vec3>,
        gains: Vec<Vec<Complex64>>,
        fs: f64,
        n_fft: usize,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("interpolated grid has no points".into()));
        }
        if gains.len() != points.len() {
            return Err(Error::Shape {
                expected: points.len(),
                got: gains.len(),
            });
        }
        let n_bins = n_fft / 2 + 1;
        if let Some(g) = gains.iter().find(|g| g.len() != n_bins) {
            return Err(Error::Shape {
                expected: n_bins,
                got: g.len(),
            });
        }
        if points.iter().any(|p| (p.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::Config("grid points must be unit vectors".into()));
        }
        Ok(InterpolatedGrid {
            name,
            fs,
            n_fft,
            gains,
            index: SphereIndex::new(points),
        })
    }

    /// A grid whose every gain equals `value`.
    pub fn constant(points: Vec<Vec3>, value: Complex64, fs: f64, n_fft: usize) -> Result<Self> {
        let gains = vec![vec![value; n_fft / 2 + 1]; points.len()];
        InterpolatedGrid::new("constant".into(), points, gains, fs, n_fft)
    }

    pub fn points(&self) -> &[Vec3] {
        self.index.points()
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn nearest(&self, dir: &Vec3) -> usize {
        self.index.nearest(dir)
    }

    /// Gains moved onto another DFT grid by linear interpolation in
    /// frequency; bins above this grid's Nyquist hold the last value.
    pub fn on_grid(&self, n_fft: usize, fs: f64) -> Result<InterpolatedGrid> {
        if n_fft == self.n_fft && fs == self.fs {
            return Ok(self.clone());
        }
        let n_bins = n_fft / 2 + 1;
        let src_nyq = self.fs / 2.0;
        let src_bins = self.n_bins();
        let gains = self
            .gains
            .iter()
            .map(|g| {
                (0..n_bins)
                    .map(|k| {
                        let f = k as f64 * fs / n_fft as f64;
                        if f >= src_nyq {
                            return g[src_bins - 1];
                        }
                        let pos = f * self.n_fft as f64 / self.fs;
                        let i = (pos.floor() as usize).min(src_bins - 2);
                        let t = pos - i as f64;
                        g[i] * (1.0 - t) + g[i + 1] * t
                    })
                    .collect()
            })
            .collect();
        Ok(InterpolatedGrid {
            name: self.name.clone(),
            fs,
            n_fft,
            gains,
            index: self.index.clone(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = InterpolatedGridDoc {
            name: self.name.clone(),
            fs_hz: self.fs,
            n_fft: self.n_fft,
            points: self.points().iter().map(|p| [p.x, p.y, p.z]).collect(),
            gains_re: self.gains.iter().map(|g| g.iter().map(|c| c.re).collect()).collect(),
            gains_im: self.gains.iter().map(|g| g.iter().map(|c| c.im).collect()).collect(),
        };
        serde_json::to_string(&doc).map_err(|e| Error::Internal(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: InterpolatedGridDoc =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("interpolated grid: {e}")))?;
        if doc.gains_re.len() != doc.gains_im.len() {
            return Err(Error::Shape {
                expected: doc.gains_re.len(),
                got: doc.gains_im.len(),
            });
        }
        let gains = doc
            .gains_re
            .iter()
            .zip(&doc.gains_im)
            .map(|(re, im)| {
                if re.len() != im.len() {
                    return Err(Error::Shape {
                        expected: re.len(),
                        got: im.len(),
                    });
                }
                Ok(re.iter().zip(im).map(|(r, i)| Complex64::new(*r, *i)).collect())
            })
            .collect::<Result<_>>()?;
        let points = doc.points.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect();
        InterpolatedGrid::new(doc.name, points, gains, doc.fs_hz, doc.n_fft)
    }
}
