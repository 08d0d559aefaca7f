use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{SurfaceProfile, N_BANDS};

/// Per-band `[low, high]` absorption ranges used by the samplers.
///
/// The wall, floor and ceiling ranges are implementer defaults chosen to
/// resemble common material databases; they can be overridden from a
/// configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialTable {
    pub naive: [f64; 2],
    pub reflective: [f64; 2],
    pub wall: [[f64; 2]; N_BANDS],
    pub floor: [[f64; 2]; N_BANDS],
    pub ceiling: [[f64; 2]; N_BANDS],
}

impl Default for MaterialTable {
    fn default() -> Self {
        MaterialTable {
            naive: [0.02, 0.5],
            reflective: [0.01, 0.12],
            wall: [
                [0.01, 0.18],
                [0.01, 0.20],
                [0.02, 0.30],
                [0.02, 0.40],
                [0.02, 0.45],
                [0.02, 0.45],
            ],
            floor: [
                [0.01, 0.15],
                [0.02, 0.25],
                [0.05, 0.45],
                [0.15, 0.70],
                [0.25, 0.75],
                [0.30, 0.80],
            ],
            ceiling: [
                [0.05, 0.50],
                [0.08, 0.58],
                [0.11, 0.66],
                [0.14, 0.74],
                [0.17, 0.82],
                [0.20, 0.90],
            ],
        }
    }
}

impl MaterialTable {
    pub fn validate(&self) -> Result<()> {
        let ok = |r: &[f64; 2]| 0.0 <= r[0] && r[0] <= r[1] && r[1] <= 1.0;
        let all = [self.naive, self.reflective]
            .iter()
            .chain(self.wall.iter())
            .chain(self.floor.iter())
            .chain(self.ceiling.iter())
            .all(ok);
        if !all {
            return Err(Error::Config(
                "material ranges must satisfy 0 <= low <= high <= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn ranges(&self, kind: SurfaceType) -> Option<&[[f64; 2]; N_BANDS]> {
        match kind {
            SurfaceType::Wall => Some(&self.wall),
            SurfaceType::Floor => Some(&self.floor),
            SurfaceType::Ceiling => Some(&self.ceiling),
            SurfaceType::Reflective | SurfaceType::Uniform => None,
        }
    }
}

/// How each surface's absorption was drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceType {
    Uniform,
    Reflective,
    Wall,
    Floor,
    Ceiling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallSampling {
    pub profiles: [SurfaceProfile; 6],
    pub kinds: [SurfaceType; 6],
}

impl WallSampling {
    pub fn reflective_count(&self) -> usize {
        self.kinds.iter().filter(|k| **k == SurfaceType::Reflective).count()
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..=r[1])
    }
}

/// One frequency-independent coefficient, shared by every surface.
pub fn sample_naive<R: Rng + ?Sized>(rng: &mut R, table: &MaterialTable) -> WallSampling {
    let alpha = uniform(rng, table.naive);
    WallSampling {
        profiles: [SurfaceProfile { alpha: [alpha; N_BANDS] }; 6],
        kinds: [SurfaceType::Uniform; 6],
    }
}

/// Reflectivity-biased draw: a uniformly chosen number (0..=6) of randomly
/// picked surfaces become reflective with one flat coefficient each; every
/// other surface is typed wall, floor or ceiling at random and gets per-band
/// coefficients from that type's ranges.
pub fn sample_reflectivity_biased<R: Rng + ?Sized>(
    rng: &mut R,
    table: &MaterialTable,
) -> WallSampling {
    let n_reflective = rng.random_range(0..=6usize);
    let mut order: [usize; 6] = [0, 1, 2, 3, 4, 5];
    order.shuffle(rng);

    let mut profiles = [SurfaceProfile { alpha: [0.0; N_BANDS] }; 6];
    let mut kinds = [SurfaceType::Reflective; 6];
    for (rank, &surface) in order.iter().enumerate() {
        if rank < n_reflective {
            let a = uniform(rng, table.reflective);
            profiles[surface].alpha = [a; N_BANDS];
            kinds[surface] = SurfaceType::Reflective;
        } else {
            let kind = [SurfaceType::Wall, SurfaceType::Ceiling, SurfaceType::Floor]
                [rng.random_range(0..3usize)];
            let ranges = table.ranges(kind).expect("material type has ranges");
            for b in 0..N_BANDS {
                profiles[surface].alpha[b] = uniform(rng, ranges[b]);
            }
            kinds[surface] = kind;
        }
    }
    WallSampling { profiles, kinds }
}
