//! Fixtures shared by the benchmarks.

use roomsim::dataset::{scene_for_seed, DatasetId, SamplingOptions, SceneConfig};
use roomsim::{AirAbsorption, MaxOrder, Result, Room, SynthesisConfig, Transducer};

/// A sampled scene and its resolved transducers.
pub struct Fixture {
    pub scene: SceneConfig,
    pub source: Transducer,
    pub mics: Vec<Transducer>,
    pub air: AirAbsorption,
}

pub fn sampled(dataset: DatasetId, seed: u64) -> Result<Fixture> {
    let scene = scene_for_seed(dataset, seed, &SamplingOptions::default())?;
    let source = scene.source.resolve(None)?;
    let mics = scene
        .mic_placements()
        .iter()
        .map(|m| m.resolve(None))
        .collect::<Result<Vec<_>>>()?;
    Ok(Fixture {
        scene,
        source,
        mics,
        air: AirAbsorption::default(),
    })
}

impl Fixture {
    pub fn room(&self) -> &Room {
        &self.scene.room
    }
}

pub fn fixed(order: u32, duration: f64) -> SynthesisConfig {
    SynthesisConfig {
        max_order: MaxOrder::Fixed(order),
        duration: Some(duration),
        ..SynthesisConfig::default()
    }
}
