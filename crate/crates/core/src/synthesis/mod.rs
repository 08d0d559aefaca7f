//! Image-source synthesis of multichannel room impulse responses.
//!
//! Frequency-flat contributions (omni and analytic patterns) are summed
//! exactly on the output's DFT grid with a non-uniform FFT: each image adds
//! `a * G * w_b` to the series of band `b`, and the spectrum is
//! `H(f) = sum_b nu_b(f) S_b(f)`. When a measured pattern is involved the
//! product of the two gains is sampled at a set of frequency nodes and taken
//! as piecewise linear in between, giving one series per overlapping
//! (band, node) pair.

mod kernel;
mod nufft;

use std::path::Path;
use std::sync::Arc;

use nalgebra::Matrix3;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::analysis::eyring_rt60;
use crate::directivity::{DirectivityPattern, Gain, PatternKind};
use crate::dsp;
use crate::error::{Error, Result};
use crate::geometry::{for_each_lattice, mirror_coord, wall_hits, Pose, Room, Vec3};
use crate::materials::{band_weights, AirAbsorption, BandValues, BANDS, N_BANDS};

pub use kernel::{image_source_kernel, tukey_window, TUKEY_ALPHA};

pub const DEFAULT_FS: f64 = 16_000.0;
pub const DEFAULT_F_BINS: usize = 256;
pub const DEFAULT_C: f64 = 343.0;
pub const DEFAULT_MAX_DURATION: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxOrder {
    Fixed(u32),
    /// Smallest order whose travel time along the shortest room dimension
    /// covers 1.1 times the Eyring reverberation time.
    Dynamic,
}

impl Serialize for MaxOrder {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MaxOrder::Fixed(n) => s.serialize_u32(*n),
            MaxOrder::Dynamic => s.serialize_str("dynamic"),
        }
    }
}

impl<'de> Deserialize<'de> for MaxOrder {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Fixed(u32),
            Named(String),
        }
        match Raw::deserialize(d)? {
            Raw::Fixed(n) => Ok(MaxOrder::Fixed(n)),
            Raw::Named(s) if s == "dynamic" => Ok(MaxOrder::Dynamic),
            Raw::Named(s) => Err(serde::de::Error::custom(format!(
                "max_order must be an integer or \"dynamic\", got {s:?}"
            ))),
        }
    }
}

impl std::str::FromStr for MaxOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "dynamic" {
            return Ok(MaxOrder::Dynamic);
        }
        s.parse()
            .map(MaxOrder::Fixed)
            .map_err(|_| Error::Config(format!("max order must be an integer or \"dynamic\", got {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisConfig {
    pub fs: f64,
    /// Positive-frequency bins of the per-image kernels (`2F` taps).
    pub f_bins: usize,
    pub c: f64,
    pub max_order: MaxOrder,
    /// Fixed output length in seconds; later arrivals are dropped.
    pub duration: Option<f64>,
    /// Upper bound on the output length in dynamic mode, seconds.
    pub max_duration: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            fs: DEFAULT_FS,
            f_bins: DEFAULT_F_BINS,
            c: DEFAULT_C,
            max_order: MaxOrder::Dynamic,
            duration: None,
            max_duration: DEFAULT_MAX_DURATION,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fs >= 8000.0 && self.fs.is_finite()) || self.fs.fract() != 0.0 {
            return Err(Error::Config(format!("fs must be an integer >= 8000 Hz, got {}", self.fs)));
        }
        if self.f_bins < 64 {
            return Err(Error::Config(format!("f_bins must be >= 64, got {}", self.f_bins)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("speed of sound must be positive, got {}", self.c)));
        }
        if let Some(d) = self.duration {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Config(format!("duration must be positive, got {d}")));
            }
        }
        if !(self.max_duration > 0.0 && self.max_duration.is_finite()) {
            return Err(Error::Config(format!(
                "max_duration must be positive, got {}",
                self.max_duration
            )));
        }
        Ok(())
    }
}

/// A positioned source or microphone.
#[derive(Debug, Clone)]
pub struct Transducer {
    pub pose: Pose,
    pub pattern: DirectivityPattern,
}

impl Transducer {
    pub fn new(pose: Pose, pattern: DirectivityPattern) -> Self {
        Transducer { pose, pattern }
    }

    pub fn omni(position: [f64; 3]) -> Self {
        Transducer::new(Pose::at(position), DirectivityPattern::omni())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rir {
    pub channels: Vec<Vec<f64>>,
    pub fs: f64,
    pub scene_ref: String,
    pub max_order: u32,
}

impl Rir {
    pub fn n_samples(&self) -> usize {
        self.channels.first().map_or(0, |c| c.len())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fs > 0.0) {
            return Err(Error::Domain(format!("fs must be positive, got {}", self.fs)));
        }
        let n = self.n_samples();
        if self.channels.iter().any(|c| c.len() != n) {
            return Err(Error::Internal("channels differ in length".into()));
        }
        if self.channels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("impulse response contains non-finite samples".into()));
        }
        Ok(())
    }
}

/// Sidecar document written next to an exported impulse response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RirMetadata {
    pub scene_hash: String,
    pub fs: f64,
    pub max_order: u32,
    pub n_channels: usize,
    pub n_samples: usize,
    pub config: SynthesisConfig,
}

/// Path of the sidecar document for a WAV file.
pub fn sidecar_path(wav: &Path) -> std::path::PathBuf {
    wav.with_extension("json")
}

/// Writes a float32 WAV and its JSON sidecar. Neither file is left behind
/// if either write fails.
pub fn write_rir(path: &Path, rir: &Rir, cfg: &SynthesisConfig) -> Result<()> {
    rir.validate()?;
    let wav = crate::io::encode_wav_f32(&rir.channels, rir.fs as u32)?;
    let meta = RirMetadata {
        scene_hash: rir.scene_ref.clone(),
        fs: rir.fs,
        max_order: rir.max_order,
        n_channels: rir.channels.len(),
        n_samples: rir.n_samples(),
        config: cfg.clone(),
    };
    let json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Internal(e.to_string()))?;
    crate::io::write_atomic(path, &wav)?;
    if let Err(e) = crate::io::write_atomic(&sidecar_path(path), json.as_bytes()) {
        let _ = std::fs::remove_file(path);
        return Err(e);
    }
    Ok(())
}

/// Order needed to cover 1.1 times the largest band Eyring time, and
/// that time in seconds.
pub fn dynamic_order(room: &Room, c: f64) -> Result<(u32, f64)> {
    let t = eyring_rt60(room, &room.surfaces)?
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    let n = (1.1 * t * c / room.min_dim()).ceil().max(0.0);
    if n > u32::MAX as f64 {
        return Err(Error::Domain(format!("dynamic order {n} is too large")));
    }
    Ok((n as u32, t))
}

/// DFT length used for an output of `n_samples`: room for the kernel
/// support on both sides, rounded up to a 2-3-5 smooth size.
pub fn transform_length(n_samples: usize, f_bins: usize) -> usize {
    dsp::next_smooth_len(n_samples + 2 * f_bins)
}

/// Resolved extent of one synthesis run.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisPlan {
    pub max_order: u32,
    /// Images farther than this from a microphone are skipped.
    pub radius: Option<f64>,
    pub n_samples: usize,
    pub transform_len: usize,
}

pub fn synthesis_plan(room: &Room, src: &Pose, mics: &[Pose], cfg: &SynthesisConfig) -> Result<SynthesisPlan> {
    cfg.validate()?;
    room.validate()?;
    if mics.is_empty() {
        return Err(Error::Config("at least one microphone is required".into()));
    }
    src.check_inside(room)?;
    for m in mics {
        m.check_inside(room)?;
    }
    let mut radius = cfg.duration.map(|d| cfg.c * d);
    let max_order = match cfg.max_order {
        MaxOrder::Fixed(n) => n,
        MaxOrder::Dynamic => {
            let (n, t) = dynamic_order(room, cfg.c)?;
            let r = cfg.c * (1.1 * t).min(cfg.max_duration);
            radius = Some(radius.map_or(r, |d| d.min(r)));
            // Orders past this bound lie entirely outside the radius.
            let reach = (r / room.min_dim()).floor() + 3.0;
            (n as f64).min(reach) as u32
        }
    };
    let n_samples = match (cfg.duration, cfg.max_order) {
        (Some(d), _) => (d * cfg.fs).round().max(1.0) as usize,
        (None, MaxOrder::Dynamic) => {
            (radius.unwrap() / cfg.c * cfg.fs).ceil() as usize + 2 * cfg.f_bins
        }
        (None, MaxOrder::Fixed(_)) => {
            let s = src.pos();
            let mut far: f64 = 0.0;
            for m in mics {
                let p = m.pos();
                for_each_lattice(room, &s, max_order, None, |l| {
                    let d2: f64 = (0..3)
                        .map(|a| (mirror_coord(l[a], s[a], room.dims[a]) - p[a]).powi(2))
                        .sum();
                    far = far.max(d2);
                });
            }
            (far.sqrt() / cfg.c * cfg.fs).ceil() as usize + 2 * cfg.f_bins
        }
    };
    Ok(SynthesisPlan {
        max_order,
        radius,
        n_samples,
        transform_len: transform_length(n_samples, cfg.f_bins),
    })
}

/// Per-axis, per-lattice-index tables: image coordinate and the band
/// damping accumulated on that axis.
struct AxisTable {
    coord: Vec<f64>,
    damping: Vec<BandValues>,
}

impl AxisTable {
    fn new(order: u32, s: f64, len: f64, rho_lo: &BandValues, rho_hi: &BandValues) -> Self {
        let n = order as i32;
        let mut coord = Vec::with_capacity(2 * order as usize + 1);
        let mut damping = Vec::with_capacity(coord.capacity());
        for idx in -n..=n {
            coord.push(mirror_coord(idx, s, len));
            let (lo, hi) = wall_hits(idx);
            let mut d = [1.0; N_BANDS];
            for b in 0..N_BANDS {
                d[b] = rho_lo[b].powi(lo as i32) * rho_hi[b].powi(hi as i32);
            }
            damping.push(d);
        }
        AxisTable { coord, damping }
    }
}

/// Kernel-grid bins at which measured gains are sampled; between them the
/// gain is taken as linear in frequency.
fn gain_nodes(f_bins: usize, fs: f64) -> Vec<usize> {
    const NODE_HZ: [f64; 25] = [
        0.0, 31.25, 62.5, 93.75, 125.0, 156.25, 187.5, 250.0, 312.5, 375.0, 500.0, 625.0, 750.0,
        1000.0, 1250.0, 1500.0, 2000.0, 2500.0, 3000.0, 3500.0, 4000.0, 5000.0, 6000.0, 7000.0, 8000.0,
    ];
    let nyquist = fs / 2.0;
    let mut hz: Vec<f64> = NODE_HZ.iter().cloned().filter(|f| *f < nyquist).collect();
    let mut f = 9000.0;
    while f < nyquist {
        hz.push(f);
        f += 1000.0;
    }
    let mut bins: Vec<usize> = hz
        .iter()
        .map(|f| ((f * 2.0 * f_bins as f64 / fs).round() as usize).min(f_bins))
        .collect();
    bins.push(f_bins);
    bins.dedup();
    bins
}

/// A pattern with measured gains sampled at the frequency nodes.
struct Resolved {
    pattern: DirectivityPattern,
    /// `node_gains[point][node]` (measured patterns only).
    node_gains: Vec<Vec<Complex64>>,
}

impl Resolved {
    fn new(p: &DirectivityPattern, nodes: &[usize], f_bins: usize, fs: f64) -> Result<Self> {
        let PatternKind::Measured(grid) = &p.kind else {
            return Ok(Resolved {
                pattern: p.clone(),
                node_gains: Vec::new(),
            });
        };
        let g = grid.on_grid(2 * f_bins, fs)?;
        let node_gains = g
            .gains
            .iter()
            .map(|bins| nodes.iter().map(|&k| bins[k]).collect())
            .collect();
        Ok(Resolved {
            pattern: DirectivityPattern {
                kind: PatternKind::Measured(Arc::new(g)),
                rotation: p.rotation,
            },
            node_gains,
        })
    }

    fn is_flat(&self) -> bool {
        self.pattern.is_flat()
    }
}

/// Gain of a resolved pattern towards `dir`: a scalar, or one value per node.
enum Probe<'a> {
    Flat(f64),
    Nodes(&'a [Complex64]),
}

impl Probe<'_> {
    #[inline]
    fn at(&self, q: usize) -> Complex64 {
        match self {
            Probe::Flat(g) => Complex64::new(*g, 0.0),
            Probe::Nodes(v) => v[q],
        }
    }
}

/// Gain of a resolved pattern towards one direction, without borrowing it.
#[derive(Clone, Copy)]
enum GainKey {
    Flat(f64),
    Point(u32),
}

fn probe_key(r: &Resolved, dir: &Vec3) -> GainKey {
    match r.pattern.gain(dir) {
        Gain::Flat(g) => GainKey::Flat(g),
        Gain::Spectrum { point, .. } => GainKey::Point(point as u32),
    }
}

fn resolve_key(r: &Resolved, key: GainKey) -> Probe<'_> {
    match key {
        GainKey::Flat(g) => Probe::Flat(g),
        GainKey::Point(p) => Probe::Nodes(&r.node_gains[p as usize]),
    }
}

/// Images buffered per sort-and-spread pass.
const CHUNK: usize = 1 << 16;

/// One image source awaiting spreading.
struct Pending {
    t: f64,
    w: BandValues,
    src: GainKey,
    mic: GainKey,
}

/// Series layout for channels with a measured pattern: one series per
/// (band, frequency node) pair whose supports overlap.
struct NodeSeries {
    nodes: Vec<usize>,
    /// `(band, node)` for each series.
    pairs: Vec<(usize, usize)>,
}

impl NodeSeries {
    fn new(nodes: Vec<usize>, f_bins: usize, fs: f64) -> Self {
        let hz = |k: usize| k as f64 * fs / (2 * f_bins) as f64;
        let last = nodes.len() - 1;
        let mut pairs = Vec::new();
        for q in 0..=last {
            let hat_lo = if q == 0 { f64::NEG_INFINITY } else { hz(nodes[q - 1]) };
            let hat_hi = if q == last { f64::INFINITY } else { hz(nodes[q + 1]) };
            for b in 0..N_BANDS {
                let band_lo = if b == 0 { f64::NEG_INFINITY } else { BANDS[b - 1] };
                let band_hi = if b == N_BANDS - 1 { f64::INFINITY } else { BANDS[b + 1] };
                if hat_lo.max(band_lo) < hat_hi.min(band_hi) {
                    pairs.push((b, q));
                }
            }
        }
        NodeSeries { nodes, pairs }
    }

    /// Hat weights of the two nodes bracketing frequency `f`.
    fn hats(&self, f: f64, f_bins: usize, fs: f64) -> (usize, f64, f64) {
        let pos = f * 2.0 * f_bins as f64 / fs;
        let last = self.nodes.len() - 1;
        if pos >= self.nodes[last] as f64 {
            return (last - 1, 0.0, 1.0);
        }
        let q = self.nodes.partition_point(|&k| (k as f64) <= pos) - 1;
        let t = (pos - self.nodes[q] as f64) / (self.nodes[q + 1] - self.nodes[q]) as f64;
        (q, 1.0 - t, t)
    }
}

struct Context<'a> {
    room: &'a Room,
    cfg: &'a SynthesisConfig,
    plan: &'a SynthesisPlan,
    air: &'a AirAbsorption,
    src_pos: Vec3,
    src_rot_t: Matrix3<f64>,
    src: Resolved,
    axes: [AxisTable; 3],
    series: NodeSeries,
}

/// Synthesizes one channel per microphone.
pub fn synthesize_rir(
    room: &Room,
    src: &Transducer,
    mics: &[Transducer],
    cfg: &SynthesisConfig,
    air: &AirAbsorption,
) -> Result<Rir> {
    air.validate()?;
    let poses: Vec<Pose> = mics.iter().map(|m| m.pose).collect();
    let plan = synthesis_plan(room, &src.pose, &poses, cfg)?;
    let src_pos = src.pose.pos();
    let rho: Vec<BandValues> = room.surfaces.iter().map(|s| s.reflection()).collect();
    let axes = [0, 1, 2].map(|a| AxisTable::new(plan.max_order, src_pos[a], room.dims[a], &rho[2 * a], &rho[2 * a + 1]));
    let nodes = gain_nodes(cfg.f_bins, cfg.fs);
    let ctx = Context {
        room,
        cfg,
        plan: &plan,
        air,
        src_pos,
        src_rot_t: src.pose.rotation().transpose(),
        src: Resolved::new(&src.pattern, &nodes, cfg.f_bins, cfg.fs)?,
        axes,
        series: NodeSeries::new(nodes, cfg.f_bins, cfg.fs),
    };
    let channels = mics
        .par_iter()
        .map(|m| render_channel(&ctx, m))
        .collect::<Result<Vec<_>>>()?;
    let rir = Rir {
        channels,
        fs: cfg.fs,
        scene_ref: String::new(),
        max_order: plan.max_order,
    };
    rir.validate()?;
    Ok(rir)
}

fn render_channel(ctx: &Context, mic: &Transducer) -> Result<Vec<f64>> {
    let cfg = ctx.cfg;
    let m_len = ctx.plan.transform_len;
    let mic_res = Resolved::new(&mic.pattern, &ctx.series.nodes, cfg.f_bins, cfg.fs)?;
    let measured = !(ctx.src.is_flat() && mic_res.is_flat());
    let n_series = if measured { ctx.series.pairs.len() } else { N_BANDS };
    let mut gridder = nufft::Gridder::new(m_len, n_series);

    let mic_pos = mic.pose.pos();
    let mic_rot_t = mic.pose.rotation().transpose();
    let direct = (mic_pos - ctx.src_pos).norm();
    if !(direct > 0.0) {
        return Err(Error::InvalidGeometry("source and microphone coincide".into()));
    }
    let radius = ctx.plan.radius;
    let reach = radius.map(|r| r + direct);
    let with_air = ctx.air.gamma.iter().any(|g| *g > 0.0);
    let n = ctx.plan.max_order as i32;
    let n_nodes = ctx.series.nodes.len();
    let mut strengths = vec![Complex64::new(0.0, 0.0); n_series];
    let mut gamma = vec![Complex64::new(0.0, 0.0); n_nodes];
    let mut failure = None;
    let mut count = 0usize;
    let mut pending: Vec<Pending> = Vec::with_capacity(CHUNK);
    // Spreading in arrival order keeps grid accesses local.
    let mut flush = |pending: &mut Vec<Pending>| {
        pending.sort_unstable_by(|a, b| a.t.total_cmp(&b.t));
        for img in pending.iter() {
            match (img.src, img.mic) {
                (GainKey::Flat(s), GainKey::Flat(m)) => {
                    let g = s * m;
                    if measured {
                        for (slot, &(b, _)) in strengths.iter_mut().zip(&ctx.series.pairs) {
                            *slot = Complex64::new(g * img.w[b], 0.0);
                        }
                    } else {
                        for b in 0..N_BANDS {
                            strengths[b] = Complex64::new(g * img.w[b], 0.0);
                        }
                    }
                }
                (ks, km) => {
                    let gs = resolve_key(&ctx.src, ks);
                    let gm = resolve_key(&mic_res, km);
                    for (q, slot) in gamma.iter_mut().enumerate() {
                        *slot = gs.at(q) * gm.at(q);
                    }
                    for (slot, &(b, q)) in strengths.iter_mut().zip(&ctx.series.pairs) {
                        *slot = gamma[q] * img.w[b];
                    }
                }
            }
            gridder.spread(img.t, &strengths);
        }
        pending.clear();
    };

    for_each_lattice(ctx.room, &ctx.src_pos, ctx.plan.max_order, reach, |l| {
        if failure.is_some() {
            return;
        }
        let idx = l.map(|v| (v + n) as usize);
        let img = Vec3::new(
            ctx.axes[0].coord[idx[0]],
            ctx.axes[1].coord[idx[1]],
            ctx.axes[2].coord[idx[2]],
        );
        let v = img - mic_pos;
        let dist = v.norm();
        if radius.is_some_and(|r| dist > r) {
            return;
        }
        if !(dist > 0.0) {
            failure = Some(Error::InvalidGeometry("image source coincides with microphone".into()));
            return;
        }
        count += 1;
        let t = dist / cfg.c * cfg.fs;
        let a = 1.0 / dist;
        let (dx, dy, dz) = (
            &ctx.axes[0].damping[idx[0]],
            &ctx.axes[1].damping[idx[1]],
            &ctx.axes[2].damping[idx[2]],
        );
        let mut w = [0.0; N_BANDS];
        for b in 0..N_BANDS {
            w[b] = a * dx[b] * dy[b] * dz[b];
            if with_air {
                w[b] *= (-ctx.air.gamma[b] * dist).exp();
            }
        }
        let u = v / dist;
        let signs = l.map(|i| if i % 2 == 0 { 1.0 } else { -1.0 });
        let departure = ctx.src_rot_t * Vec3::new(-u.x * signs[0], -u.y * signs[1], -u.z * signs[2]);
        let arrival = mic_rot_t * u;
        pending.push(Pending {
            t,
            w,
            src: probe_key(&ctx.src, &departure),
            mic: probe_key(&mic_res, &arrival),
        });
        if pending.len() == CHUNK {
            flush(&mut pending);
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    flush(&mut pending);
    if count == 0 {
        return Err(Error::Internal("no image source contributes to the response".into()));
    }

    let series = gridder.finish();
    let mut slot_of = vec![vec![usize::MAX; ctx.series.nodes.len()]; N_BANDS];
    if measured {
        for (s, &(b, q)) in ctx.series.pairs.iter().enumerate() {
            slot_of[b][q] = s;
        }
    }
    let half: Vec<Complex64> = (0..=m_len / 2)
        .map(|j| {
            let f = j as f64 * cfg.fs / m_len as f64;
            let nu = band_weights(f);
            let mut h = Complex64::new(0.0, 0.0);
            if !measured {
                for b in 0..N_BANDS {
                    if nu[b] != 0.0 {
                        h += series[b][j] * nu[b];
                    }
                }
                return h;
            }
            let (q, w0, w1) = ctx.series.hats(f, cfg.f_bins, cfg.fs);
            for b in 0..N_BANDS {
                if nu[b] == 0.0 {
                    continue;
                }
                for (qq, wq) in [(q, w0), (q + 1, w1)] {
                    if wq != 0.0 {
                        let s = slot_of[b][qq];
                        debug_assert!(s != usize::MAX, "missing series for band {b} node {qq}");
                        h += series[s][j] * (nu[b] * wq);
                    }
                }
            }
            h
        })
        .collect();
    let mut h = dsp::irfft(&half, m_len);
    h.truncate(ctx.plan.n_samples);
    Ok(h)
}
