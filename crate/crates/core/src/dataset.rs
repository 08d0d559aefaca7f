//! Dataset fabrication: per-configuration scene sampling, synthesis,
//! labelling, optional rendering, and a manifest of everything written.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{Quaternion, UnitQuaternion};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{energy_decay_curve, rt60_from_edc, split_bands, DecayFit, RELIABLE_FROM_HZ};
use crate::directivity::{STANDIN_MIC, STANDIN_SOURCES};
use crate::error::{Error, Result};
use crate::geometry::{Orientation, Pose, Room, Vec3};
use crate::materials::{
    sample_naive, sample_reflectivity_biased, AirAbsorption, MaterialTable, SurfaceType, BANDS, N_BANDS,
};
use crate::render::{self, DiffuseSource, NoiseConfig, SpeechShaper};
use crate::scene::{scene_hash, PatternSpec, Placement};
use crate::synthesis::{synthesize_rir, write_rir, Rir, SynthesisConfig, DEFAULT_FS};

pub const DIMS_LOW: [f64; 3] = [3.0, 3.0, 2.0];
pub const DIMS_HIGH: [f64; 3] = [10.0, 10.0, 4.5];
pub const APERTURE: f64 = 0.225;
pub const DEFAULT_RECEIVER_PAIRS: usize = 3;
pub const MAX_ATTEMPTS: usize = 1000;
pub const ANALYTIC_BETAS: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DatasetId {
    D1,
    D2,
    D3,
    D4,
    D5,
    D6,
    D7,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WallModel {
    Naive,
    ReflectivityBiased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Omni,
    Analytic,
    Measured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MicKind {
    Omni,
    Measured,
}

impl DatasetId {
    pub const ALL: [DatasetId; 7] = [
        DatasetId::D1,
        DatasetId::D2,
        DatasetId::D3,
        DatasetId::D4,
        DatasetId::D5,
        DatasetId::D6,
        DatasetId::D7,
    ];

    /// (walls, source, microphone) configuration.
    pub fn triple(self) -> (WallModel, SourceKind, MicKind) {
        use MicKind as M;
        use SourceKind as S;
        use WallModel::*;
        match self {
            DatasetId::D1 => (Naive, S::Omni, M::Omni),
            DatasetId::D2 => (ReflectivityBiased, S::Omni, M::Omni),
            DatasetId::D3 => (ReflectivityBiased, S::Omni, M::Measured),
            DatasetId::D4 => (ReflectivityBiased, S::Analytic, M::Omni),
            DatasetId::D5 => (ReflectivityBiased, S::Measured, M::Omni),
            DatasetId::D6 => (Naive, S::Measured, M::Measured),
            DatasetId::D7 => (ReflectivityBiased, S::Measured, M::Measured),
        }
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for DatasetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DatasetId::ALL
            .into_iter()
            .find(|d| d.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown dataset id {s:?}; expected D1..D7")))
    }
}

/// Knobs of the scene sampler beyond the dataset configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingOptions {
    /// Minimum distance from every source and microphone to every wall.
    pub wall_margin: f64,
    /// Minimum source-to-microphone distance.
    pub min_distance: f64,
    pub receiver_pairs: usize,
    /// Candidate measured source patterns (stand-in names or grid files).
    pub source_patterns: Vec<String>,
    pub mic_pattern: String,
    pub materials: MaterialTable,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions {
            wall_margin: 0.5,
            min_distance: 1.0,
            receiver_pairs: DEFAULT_RECEIVER_PAIRS,
            source_patterns: STANDIN_SOURCES.iter().map(|s| s.to_string()).collect(),
            mic_pattern: STANDIN_MIC.to_string(),
            materials: MaterialTable::default(),
        }
    }
}

impl SamplingOptions {
    pub fn validate(&self) -> Result<()> {
        let half_min = DIMS_LOW.iter().cloned().fold(f64::INFINITY, f64::min) / 2.0;
        if !(self.wall_margin >= crate::geometry::WALL_INSET && self.wall_margin < half_min) {
            return Err(Error::Config(format!(
                "wall_margin must lie in [{}, {half_min}), got {}",
                crate::geometry::WALL_INSET,
                self.wall_margin
            )));
        }
        if !(self.min_distance > 0.0 && self.min_distance.is_finite()) {
            return Err(Error::Config(format!("min_distance must be positive, got {}", self.min_distance)));
        }
        if self.receiver_pairs == 0 {
            return Err(Error::Config("receiver_pairs must be at least 1".into()));
        }
        if self.source_patterns.is_empty() {
            return Err(Error::Config("source_patterns must not be empty".into()));
        }
        self.materials.validate()
    }
}

/// Two microphones on a horizontal axis, `APERTURE` apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverPair {
    pub mics: [Placement; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub dataset: DatasetId,
    pub seed: u64,
    pub room: Room,
    pub wall_kinds: [SurfaceType; 6],
    pub source: Placement,
    pub receivers: Vec<ReceiverPair>,
}

impl SceneConfig {
    pub fn hash(&self) -> Result<String> {
        scene_hash(self)
    }

    /// Checks the sampler's invariants.
    pub fn validate(&self) -> Result<()> {
        let d = self.room.dims;
        if (0..3).any(|a| !(DIMS_LOW[a]..=DIMS_HIGH[a]).contains(&d[a])) {
            return Err(Error::InvalidGeometry(format!("dimensions {d:?} outside the sampling box")));
        }
        self.source.pose.check_inside(&self.room)?;
        if self.receivers.is_empty() {
            return Err(Error::InvalidGeometry("scene has no receivers".into()));
        }
        for pair in &self.receivers {
            let [a, b] = &pair.mics;
            a.pose.check_inside(&self.room)?;
            b.pose.check_inside(&self.room)?;
            let axis = b.pose.pos() - a.pose.pos();
            if (axis.norm() - APERTURE).abs() > 1e-9 || axis.z.abs() > 1e-12 {
                return Err(Error::InvalidGeometry(format!(
                    "receiver pair is not a horizontal {APERTURE} m array: {axis:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn mic_placements(&self) -> Vec<&Placement> {
        self.receivers.iter().flat_map(|p| p.mics.iter()).collect()
    }
}

fn uniform_dims<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    [0, 1, 2].map(|a| rng.random_range(DIMS_LOW[a]..=DIMS_HIGH[a]))
}

fn uniform_point<R: Rng + ?Sized>(rng: &mut R, dims: &[f64; 3], margin: f64) -> [f64; 3] {
    [0, 1, 2].map(|a| rng.random_range(margin..=dims[a] - margin))
}

/// Orientation drawn uniformly over all rotations.
pub fn uniform_orientation<R: Rng + ?Sized>(rng: &mut R) -> Orientation {
    let q: [f64; 4] = [0; 4].map(|_| rng.sample(StandardNormal));
    let u = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
    Orientation::from_rotation(&u.to_rotation_matrix())
}

/// Draws one scene for `dataset`. The returned scene's `seed` is zero; use
/// [`scene_for_seed`] for a reproducible scene record.
pub fn sample_scene<R: Rng + ?Sized>(dataset: DatasetId, rng: &mut R, opts: &SamplingOptions) -> Result<SceneConfig> {
    opts.validate()?;
    let (walls, src_kind, mic_kind) = dataset.triple();
    let dims = uniform_dims(rng);
    let sampled = match walls {
        WallModel::Naive => sample_naive(rng, &opts.materials),
        WallModel::ReflectivityBiased => sample_reflectivity_biased(rng, &opts.materials),
    };
    let room = Room::new(dims, sampled.profiles)?;

    let src_pos = uniform_point(rng, &dims, opts.wall_margin);
    let yaw = rng.random_range(0.0..std::f64::consts::TAU);
    let src_pattern = match src_kind {
        SourceKind::Omni => PatternSpec::Omni,
        SourceKind::Analytic => PatternSpec::Analytic {
            beta: ANALYTIC_BETAS[rng.random_range(0..ANALYTIC_BETAS.len())],
        },
        SourceKind::Measured => PatternSpec::Measured {
            grid: opts.source_patterns[rng.random_range(0..opts.source_patterns.len())].clone(),
        },
    };
    let source = Placement {
        pose: Pose::new(src_pos, Orientation::new(yaw, 0.0, 0.0)),
        pattern: src_pattern,
    };

    let src = Vec3::from(src_pos);
    let mut receivers = Vec::with_capacity(opts.receiver_pairs);
    for _ in 0..opts.receiver_pairs {
        let mut found = None;
        for _ in 0..MAX_ATTEMPTS {
            let centre = Vec3::from(uniform_point(rng, &dims, opts.wall_margin));
            let psi = rng.random_range(0.0..std::f64::consts::TAU);
            let half = Vec3::new(psi.cos(), psi.sin(), 0.0) * (APERTURE / 2.0);
            let ends = [centre - half, centre + half];
            let ok = ends
                .iter()
                .all(|p| room.contains(p, opts.wall_margin) && (p - src).norm() >= opts.min_distance);
            if ok {
                found = Some(ends);
                break;
            }
        }
        let ends = found.ok_or_else(|| Error::Sampling {
            what: format!("receiver pair in room {dims:?}"),
            attempts: MAX_ATTEMPTS,
        })?;
        let mics = ends.map(|p| {
            let (orientation, pattern) = match mic_kind {
                MicKind::Omni => (Orientation::default(), PatternSpec::Omni),
                MicKind::Measured => (
                    uniform_orientation(rng),
                    PatternSpec::Measured {
                        grid: opts.mic_pattern.clone(),
                    },
                ),
            };
            Placement {
                pose: Pose::new([p.x, p.y, p.z], orientation),
                pattern,
            }
        });
        receivers.push(ReceiverPair { mics });
    }
    Ok(SceneConfig {
        dataset,
        seed: 0,
        room,
        wall_kinds: sampled.kinds,
        source,
        receivers,
    })
}

pub fn scene_for_seed(dataset: DatasetId, seed: u64, opts: &SamplingOptions) -> Result<SceneConfig> {
    let mut scene = sample_scene(dataset, &mut ChaCha8Rng::seed_from_u64(seed), opts)?;
    scene.seed = seed;
    Ok(scene)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
}

/// Seed of room `index` in `split`, read at a fixed position of the root
/// key stream so that it does not depend on generation order.
pub fn room_seed(root: u64, split: Split, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(split as u64);
    rng.set_word_pos(2 * index as u128);
    rng.next_u64()
}

/// Ground-truth labels of one room.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labels {
    pub volume: f64,
    pub surface: f64,
    pub bands_hz: [f64; N_BANDS],
    /// Mean over all channels of the per-band estimate; `None` where no
    /// channel gave a usable decay.
    pub rt60: [Option<f64>; N_BANDS],
    pub reliable: [bool; N_BANDS],
}

pub fn compute_labels(room: &Room, channels: &[Vec<f64>], fs: f64) -> Result<Labels> {
    let mut sums = [0.0; N_BANDS];
    let mut counts = [0usize; N_BANDS];
    for ch in channels {
        for (b, x) in split_bands(ch, fs).iter().enumerate() {
            let Ok(edc) = energy_decay_curve(x, fs) else { continue };
            if let Ok(est) = rt60_from_edc(&edc, DecayFit::T30) {
                sums[b] += est.seconds;
                counts[b] += 1;
            }
        }
    }
    let rt60 = [0, 1, 2, 3, 4, 5].map(|b| (counts[b] > 0).then(|| sums[b] / counts[b] as f64));
    Ok(Labels {
        volume: room.volume(),
        surface: room.surface_area(),
        bands_hz: BANDS,
        rt60,
        reliable: BANDS.map(|f| f >= RELIABLE_FROM_HZ),
    })
}

/// Dataset generation request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub dataset: DatasetId,
    pub n_rooms: usize,
    #[serde(default = "default_fs")]
    pub fs: f64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// WAV file or directory of WAV files; enables rendering.
    #[serde(default)]
    pub dry_corpus: Option<PathBuf>,
    /// Validation rooms as a fraction of `n_rooms`, drawn from a disjoint
    /// seed stream.
    #[serde(default)]
    pub validation_fraction: f64,
    #[serde(default)]
    pub sampling: SamplingOptions,
    /// Its `fs` is replaced by the top-level `fs`.
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub air: AirAbsorption,
    #[serde(default)]
    pub noise: NoiseConfig,
    /// Directory that relative paths in the document are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn default_fs() -> f64 {
    DEFAULT_FS
}

impl DatasetSpec {
    pub fn new(dataset: DatasetId, n_rooms: usize, output_dir: impl Into<PathBuf>, seed: u64) -> Self {
        DatasetSpec {
            dataset,
            n_rooms,
            fs: DEFAULT_FS,
            output_dir: output_dir.into(),
            seed,
            dry_corpus: None,
            validation_fraction: 0.0,
            sampling: SamplingOptions::default(),
            synthesis: SynthesisConfig::default(),
            air: AirAbsorption::default(),
            noise: NoiseConfig::default(),
            base_dir: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec: DatasetSpec = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        spec.base_dir = path.parent().map(Path::to_path_buf);
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.synthesis.fs != DEFAULT_FS && self.synthesis.fs != self.fs {
            return Err(Error::Config(format!(
                "synthesis.fs {} conflicts with fs {}",
                self.synthesis.fs, self.fs
            )));
        }
        if !(0.0..=1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "validation_fraction must lie in [0, 1], got {}",
                self.validation_fraction
            )));
        }
        self.synthesis_config().validate()?;
        self.air.validate()?;
        self.noise.validate()?;
        self.sampling.validate()
    }

    pub fn synthesis_config(&self) -> SynthesisConfig {
        SynthesisConfig {
            fs: self.fs,
            ..self.synthesis.clone()
        }
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn n_validation(&self) -> usize {
        (self.n_rooms as f64 * self.validation_fraction).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderRecord {
    pub path: String,
    pub dry_index: usize,
    /// Receiver pair whose late response shaped the diffuse noise.
    pub donor_pair: usize,
    /// `None` when no noise was added.
    pub snr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomRecord {
    pub split: Split,
    pub index: usize,
    pub seed: u64,
    pub scene_hash: Option<String>,
    pub scene: Option<SceneConfig>,
    pub max_order: Option<u32>,
    pub labels: Option<Labels>,
    /// One two-channel WAV per receiver pair, relative to the dataset root.
    pub rirs: Vec<String>,
    pub renders: Vec<RenderRecord>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset: DatasetId,
    pub seed: u64,
    pub fs: f64,
    pub n_rooms: usize,
    pub n_validation: usize,
    pub synthesis: SynthesisConfig,
    pub air: AirAbsorption,
    /// Calibrated noise settings, present when rendering is enabled.
    pub noise: Option<NoiseConfig>,
    pub noise_policy: Option<String>,
    pub rooms: Vec<RoomRecord>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn ok_rooms(&self) -> impl Iterator<Item = &RoomRecord> {
        self.rooms.iter().filter(|r| r.error.is_none())
    }
}

fn round_f32(channels: &mut [Vec<f64>]) {
    channels.iter_mut().flatten().for_each(|v| *v = *v as f32 as f64);
}

struct RenderSetup {
    corpus: Vec<Vec<f64>>,
    shaper: Option<SpeechShaper>,
    noise: NoiseConfig,
}

/// Generates every room of `spec` on `jobs` worker threads (0 picks the
/// machine's parallelism) and writes the manifest last.
pub fn generate_dataset(spec: &DatasetSpec, jobs: usize) -> Result<Manifest> {
    spec.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Internal(e.to_string()))?;
    pool.install(|| generate_in_pool(spec))
}

fn generate_in_pool(spec: &DatasetSpec) -> Result<Manifest> {
    let out = spec.output_path();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let synth = spec.synthesis_config();
    let setup = match &spec.dry_corpus {
        Some(p) => {
            let corpus = render::load_corpus(&spec.resolve(p), spec.fs)?;
            let mut noise = spec.noise.clone();
            let reference: Vec<f64> = corpus.concat();
            noise.calibrate(&reference, &synth, &spec.air)?;
            let shaper = if noise.calibration.diffuse_gain > 0.0 {
                Some(SpeechShaper::fit(&corpus)?)
            } else {
                None
            };
            Some(RenderSetup { corpus, shaper, noise })
        }
        None => None,
    };

    let jobs: Vec<(Split, usize)> = (0..spec.n_rooms)
        .map(|i| (Split::Train, i))
        .chain((0..spec.n_validation()).map(|i| (Split::Validation, i)))
        .collect();
    let rooms = jobs
        .par_iter()
        .map(|&(split, index)| generate_room(spec, &synth, setup.as_ref(), &out, split, index))
        .collect::<Result<Vec<_>>>()?;

    let manifest = Manifest {
        dataset: spec.dataset,
        seed: spec.seed,
        fs: spec.fs,
        n_rooms: spec.n_rooms,
        n_validation: spec.n_validation(),
        synthesis: synth,
        air: spec.air,
        noise: setup.as_ref().map(|s| s.noise.clone()),
        noise_policy: setup.as_ref().map(|_| {
            "gains calibrated once on the reference scene and fixed for the dataset; \
             independent noise realizations per receiver position"
                .to_string()
        }),
        rooms,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Internal(e.to_string()))?;
    crate::io::write_atomic(&out.join(MANIFEST_NAME), json.as_bytes())?;
    Ok(manifest)
}

fn split_name(split: Split) -> &'static str {
    match split {
        Split::Train => "train",
        Split::Validation => "val",
    }
}

/// Builds one room. Room-level failures are returned inside the record;
/// only I/O failures abort.
fn generate_room(
    spec: &DatasetSpec,
    synth: &SynthesisConfig,
    setup: Option<&RenderSetup>,
    out: &Path,
    split: Split,
    index: usize,
) -> Result<RoomRecord> {
    let seed = room_seed(spec.seed, split, index);
    let mut record = RoomRecord {
        split,
        index,
        seed,
        scene_hash: None,
        scene: None,
        max_order: None,
        labels: None,
        rirs: Vec::new(),
        renders: Vec::new(),
        error: None,
    };
    match build_room(spec, synth, setup, out, &mut record) {
        Ok(()) => Ok(record),
        Err(e @ (Error::Io { .. } | Error::Wav { .. })) => Err(e),
        Err(e) => {
            record.labels = None;
            record.rirs.clear();
            record.renders.clear();
            record.error = Some(e.to_string());
            Ok(record)
        }
    }
}

fn build_room(
    spec: &DatasetSpec,
    synth: &SynthesisConfig,
    setup: Option<&RenderSetup>,
    out: &Path,
    record: &mut RoomRecord,
) -> Result<()> {
    let scene = scene_for_seed(spec.dataset, record.seed, &spec.sampling)?;
    let hash = scene.hash()?;
    record.scene_hash = Some(hash.clone());
    record.scene = Some(scene.clone());

    let base = spec.base_dir.as_deref();
    let src = scene.source.resolve(base)?;
    let mics = scene
        .mic_placements()
        .iter()
        .map(|m| m.resolve(base))
        .collect::<Result<Vec<_>>>()?;
    let mut all = synthesize_rir(&scene.room, &src, &mics, synth, &spec.air)?;
    round_f32(&mut all.channels);
    record.max_order = Some(all.max_order);
    let labels = compute_labels(&scene.room, &all.channels, spec.fs)?;

    let stem = format!("{}_{:05}", split_name(record.split), record.index);
    let pairs: Vec<Rir> = all
        .channels
        .chunks(2)
        .map(|c| Rir {
            channels: c.to_vec(),
            fs: all.fs,
            scene_ref: hash.clone(),
            max_order: all.max_order,
        })
        .collect();
    let mut rirs = Vec::with_capacity(pairs.len());
    for (p, rir) in pairs.iter().enumerate() {
        let rel = format!("rirs/{stem}_pos{p}.wav");
        write_rir(&out.join(&rel), rir, synth)?;
        rirs.push(rel);
    }

    let mut renders = Vec::new();
    if let Some(setup) = setup {
        let mut rng = ChaCha8Rng::seed_from_u64(record.seed);
        rng.set_stream(1);
        for p in 0..pairs.len() {
            let dry_index = rng.random_range(0..setup.corpus.len());
            let donor_pair = rng.random_range(0..pairs.len());
            let diffuse = match &setup.shaper {
                Some(shaper) => Some(DiffuseSource::new(
                    &pairs[donor_pair],
                    setup.noise.late_cutoff_ms,
                    shaper.clone(),
                )?),
                None => None,
            };
            let parts = render::render_parts(&pairs[p], &setup.corpus[dry_index], &setup.noise, diffuse.as_ref(), &mut rng)?;
            let snr_db = (!parts.noise.is_empty()).then(|| parts.snr_db());
            let rel = format!("renders/{stem}_pos{p}.wav");
            crate::io::write_wav_f32(&out.join(&rel), &parts.mixture(), spec.fs as u32)?;
            renders.push(RenderRecord {
                path: rel,
                dry_index,
                donor_pair,
                snr_db,
            });
        }
    }
    record.labels = Some(labels);
    record.rirs = rirs;
    record.renders = renders;
    Ok(())
}

/// Labels recomputed from a record's WAV files and scene.
pub fn recompute_labels(root: &Path, record: &RoomRecord) -> Result<Labels> {
    let scene = record
        .scene
        .as_ref()
        .ok_or_else(|| Error::Config(format!("room {} has no scene", record.index)))?;
    let mut channels = Vec::new();
    let mut fs = None;
    for rel in &record.rirs {
        let wav = crate::io::read_wav(&root.join(rel))?;
        fs = Some(wav.fs as f64);
        channels.extend(wav.channels);
    }
    let fs = fs.ok_or_else(|| Error::Config(format!("room {} lists no files", record.index)))?;
    compute_labels(&scene.room, &channels, fs)
}

/// Largest absolute difference between two label sets; a band missing in
/// only one of them counts as infinite.
pub fn label_difference(a: &Labels, b: &Labels) -> f64 {
    let mut d = (a.volume - b.volume).abs().max((a.surface - b.surface).abs());
    for (x, y) in a.rt60.iter().zip(&b.rt60) {
        d = d.max(match (x, y) {
            (Some(x), Some(y)) => (x - y).abs(),
            (None, None) => 0.0,
            _ => f64::INFINITY,
        });
    }
    d
}
