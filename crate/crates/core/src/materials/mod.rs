//! Surface absorption, octave-band interpolation, air attenuation and the
//! random absorption samplers.

mod bank;
mod minphase;
mod sampling;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ImageSource;

pub use bank::{band_filter_bank, band_weights, interpolate_bands, BandFilterBank};
pub use minphase::minimum_phase;
pub use sampling::{sample_naive, sample_reflectivity_biased, MaterialTable, SurfaceType, WallSampling};

/// Octave-band centre frequencies, Hz.
pub const BANDS: [f64; 6] = [125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0];
pub const N_BANDS: usize = BANDS.len();

pub type BandValues = [f64; N_BANDS];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceProfile {
    pub alpha: BandValues,
}

impl SurfaceProfile {
    pub fn new(alpha: BandValues) -> Result<Self> {
        let p = SurfaceProfile { alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn flat(alpha: f64) -> Result<Self> {
        SurfaceProfile::new([alpha; N_BANDS])
    }

    pub fn validate(&self) -> Result<()> {
        for a in self.alpha {
            check_alpha(a)?;
        }
        Ok(())
    }

    pub fn reflection(&self) -> BandValues {
        self.alpha.map(|a| (1.0 - a).sqrt())
    }

    pub fn is_flat(&self) -> bool {
        self.alpha.iter().all(|a| *a == self.alpha[0])
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("absorption coefficient {alpha} outside [0, 1]")));
    }
    Ok(())
}

/// Pressure reflection coefficient `sqrt(1 - alpha)`.
pub fn reflection_coefficient(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok((1.0 - alpha).sqrt())
}

/// Per-band product of the reflection coefficients met by an image source.
pub fn cumulative_damping(image: &ImageSource, surfaces: &[SurfaceProfile; 6]) -> BandValues {
    let rho: Vec<BandValues> = surfaces.iter().map(|s| s.reflection()).collect();
    let mut d = [1.0; N_BANDS];
    for &s in &image.surface_sequence {
        for b in 0..N_BANDS {
            d[b] *= rho[s][b];
        }
    }
    d
}

/// Same product computed from per-surface hit counts and a precomputed
/// reflection table.
#[cfg(test)]
pub(crate) fn damping_from_hits(hits: &[u32; 6], rho: &[BandValues; 6]) -> BandValues {
    let mut d = [1.0; N_BANDS];
    for (s, &n) in hits.iter().enumerate() {
        if n == 0 {
            continue;
        }
        for b in 0..N_BANDS {
            d[b] *= rho[s][b].powi(n as i32);
        }
    }
    d
}

/// Atmospheric attenuation per octave band, nepers per metre of path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AirAbsorption {
    pub gamma: BandValues,
}

impl Default for AirAbsorption {
    /// 20 °C, 50 % relative humidity.
    fn default() -> Self {
        AirAbsorption {
            gamma: [0.0, 0.0003, 0.0006, 0.0011, 0.0024, 0.0071],
        }
    }
}

impl AirAbsorption {
    pub fn none() -> Self {
        AirAbsorption { gamma: [0.0; N_BANDS] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(Error::Config(format!("air attenuation must be >= 0: {:?}", self.gamma)));
        }
        if self.gamma.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config(format!(
                "air attenuation must not decrease with frequency: {:?}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// Pressure gain `exp(-gamma(b) * distance)` per band.
pub fn air_attenuation_gain(distance: f64, air: &AirAbsorption) -> Result<BandValues> {
    if !(distance >= 0.0) {
        return Err(Error::Domain(format!("distance must be >= 0, got {distance}")));
    }
    Ok(air.gamma.map(|g| (-g * distance).exp()))
}

/// Overrides for the material range table and the air attenuation table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsConfig {
    #[serde(default)]
    pub material_ranges: Option<MaterialTable>,
    #[serde(default)]
    pub air: Option<AirAbsorption>,
}

impl MaterialsConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: MaterialsConfig = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = &self.material_ranges {
            t.validate()?;
        }
        if let Some(a) = &self.air {
            a.validate()?;
        }
        Ok(())
    }

    pub fn table(&self) -> MaterialTable {
        self.material_ranges.clone().unwrap_or_default()
    }

    pub fn air(&self) -> AirAbsorption {
        self.air.unwrap_or_default()
    }
}
