//! Generalized image-source room impulse response simulation.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod dataset;
pub mod directivity;
pub mod dsp;
pub mod error;
pub mod geometry;
pub mod io;
#[cfg(test)]
mod invariants;
pub mod materials;
pub mod render;
pub mod scene;
pub mod synthesis;

pub use dataset::{generate_dataset, DatasetId, DatasetSpec, Manifest, SceneConfig};
pub use directivity::{DirectivityPattern, InterpolatedGrid, MeasuredGrid};
pub use error::{Error, ErrorKind, Result};
pub use geometry::{ImageSource, Orientation, Pose, Room};
pub use materials::{AirAbsorption, SurfaceProfile};
pub use render::{render, NoiseConfig};
pub use scene::{PatternSpec, Placement, SceneDescription};
pub use synthesis::{synthesize_rir, MaxOrder, Rir, SynthesisConfig, Transducer};
