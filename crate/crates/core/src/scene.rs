//! Serializable scene descriptions and their resolution into synthesis inputs.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::directivity::{
    interpolate_grid, standin_interpolated, standin_names, DirectivityPattern, InterpolatedGrid,
    MeasuredGrid, DEFAULT_FIBONACCI_POINTS, DEFAULT_FIT_BINS, DEFAULT_LAMBDA, DEFAULT_SH_ORDER,
};
use crate::error::{Error, Result};
use crate::geometry::{Pose, Room};
use crate::materials::AirAbsorption;
use crate::synthesis::{synthesize_rir, Rir, SynthesisConfig, Transducer};

/// Directivity as written in configuration files. A measured pattern names
/// either a built-in stand-in or a measured-grid JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PatternSpec {
    Omni,
    Analytic { beta: f64 },
    Measured { grid: String },
}

impl PatternSpec {
    /// Relative grid paths are looked up under `base_dir`.
    pub fn resolve(&self, base_dir: Option<&Path>) -> Result<DirectivityPattern> {
        match self {
            PatternSpec::Omni => Ok(DirectivityPattern::omni()),
            PatternSpec::Analytic { beta } => DirectivityPattern::analytic(*beta),
            PatternSpec::Measured { grid } => Ok(DirectivityPattern::measured(measured_grid(grid, base_dir)?)),
        }
    }
}

fn measured_grid(name: &str, base_dir: Option<&Path>) -> Result<Arc<InterpolatedGrid>> {
    if standin_names().contains(&name) {
        return standin_interpolated(name);
    }
    let mut path = PathBuf::from(name);
    if path.is_relative() {
        if let Some(dir) = base_dir {
            path = dir.join(path);
        }
    }
    static CACHE: OnceLock<Mutex<HashMap<PathBuf, Arc<InterpolatedGrid>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = path.canonicalize().map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    if let Some(g) = cache.lock().expect("grid cache poisoned").get(&key) {
        return Ok(g.clone());
    }
    let grid = MeasuredGrid::load(&key)?;
    let interp = Arc::new(interpolate_grid(
        &grid,
        DEFAULT_SH_ORDER,
        DEFAULT_LAMBDA,
        DEFAULT_FIT_BINS,
        DEFAULT_FIBONACCI_POINTS,
    )?);
    cache
        .lock()
        .expect("grid cache poisoned")
        .entry(key)
        .or_insert(interp.clone());
    Ok(interp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Placement {
    pub pose: Pose,
    #[serde(default = "omni_spec")]
    pub pattern: PatternSpec,
}

fn omni_spec() -> PatternSpec {
    PatternSpec::Omni
}

impl Placement {
    pub fn resolve(&self, base_dir: Option<&Path>) -> Result<Transducer> {
        Ok(Transducer::new(self.pose, self.pattern.resolve(base_dir)?))
    }
}

/// Everything needed to synthesize one multichannel impulse response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDescription {
    pub room: Room,
    pub source: Placement,
    pub mics: Vec<Placement>,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub air: AirAbsorption,
}

impl SceneDescription {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })
    }

    /// Synthesizes the scene; the result's `scene_ref` is the scene hash.
    pub fn synthesize(&self, base_dir: Option<&Path>) -> Result<Rir> {
        let src = self.source.resolve(base_dir)?;
        let mics = self
            .mics
            .iter()
            .map(|m| m.resolve(base_dir))
            .collect::<Result<Vec<_>>>()?;
        let mut rir = synthesize_rir(&self.room, &src, &mics, &self.synthesis, &self.air)?;
        rir.scene_ref = scene_hash(self)?;
        Ok(rir)
    }
}

/// Hex SHA-256 of the value's JSON encoding.
pub fn scene_hash<T: Serialize>(value: &T) -> Result<String> {
    let json = serde_json::to_vec(value).map_err(|e| Error::Internal(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(&json)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Orientation;

    fn scene() -> SceneDescription {
        SceneDescription {
            room: Room::uniform([4.0, 5.0, 3.0], 0.3).unwrap(),
            source: Placement {
                pose: Pose::new([1.0, 1.0, 1.5], Orientation::new(0.3, 0.0, 0.0)),
                pattern: PatternSpec::Analytic { beta: 0.5 },
            },
            mics: vec![
                Placement {
                    pose: Pose::at([3.0, 3.0, 1.2]),
                    pattern: PatternSpec::Omni,
                },
                Placement {
                    pose: Pose::at([3.0, 3.225, 1.2]),
                    pattern: PatternSpec::Measured {
                        grid: "akg_c414_omni".into(),
                    },
                },
            ],
            synthesis: SynthesisConfig {
                duration: Some(0.1),
                ..SynthesisConfig::default()
            },
            air: AirAbsorption::default(),
        }
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let s = scene();
        let text = serde_json::to_string(&s).unwrap();
        let back: SceneDescription = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);

        let minimal = r#"{
            "room": {"dims": [4, 5, 3], "surfaces": [
                {"alpha": [0.1,0.1,0.1,0.1,0.1,0.1]}, {"alpha": [0.1,0.1,0.1,0.1,0.1,0.1]},
                {"alpha": [0.1,0.1,0.1,0.1,0.1,0.1]}, {"alpha": [0.1,0.1,0.1,0.1,0.1,0.1]},
                {"alpha": [0.1,0.1,0.1,0.1,0.1,0.1]}, {"alpha": [0.1,0.1,0.1,0.1,0.1,0.1]}]},
            "source": {"pose": {"position": [1, 1, 1]}},
            "mics": [{"pose": {"position": [2, 2, 1]}}]
        }"#;
        let m: SceneDescription = serde_json::from_str(minimal).unwrap();
        assert_eq!(m.source.pattern, PatternSpec::Omni);
        assert_eq!(m.synthesis, SynthesisConfig::default());
        assert!(serde_json::from_str::<SceneDescription>(&minimal.replace("\"mics\"", "\"mikes\"")).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = scene();
        let mut b = scene();
        assert_eq!(scene_hash(&a).unwrap(), scene_hash(&b).unwrap());
        b.mics[0].pose.position[0] += 1e-9;
        assert_ne!(scene_hash(&a).unwrap(), scene_hash(&b).unwrap());
        assert_eq!(scene_hash(&a).unwrap().len(), 64);
    }

    #[test]
    fn synthesizes_with_hash_and_rejects_unknown_grids() {
        let s = scene();
        let rir = s.synthesize(None).unwrap();
        assert_eq!(rir.channels.len(), 2);
        assert_eq!(rir.n_samples(), 1600);
        assert_eq!(rir.scene_ref, scene_hash(&s).unwrap());

        let mut bad = scene();
        bad.mics[1].pattern = PatternSpec::Measured {
            grid: "no_such_grid.json".into(),
        };
        assert!(matches!(bad.synthesize(None), Err(Error::Io { .. })));
    }
}
