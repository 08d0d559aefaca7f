//! Reverberant scene rendering: a dry signal convolved with each channel of
//! an impulse response, plus white and diffuse speech-shaped noise.
//!
//! Noise components are generated at unit mean power (over all channels and
//! samples) and scaled by fixed gains. A gain is calibrated once on the
//! reference scene, so a fixed gain yields different SNRs in other rooms.

use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};
use crate::geometry::Room;
use crate::materials::AirAbsorption;
use crate::synthesis::{synthesize_rir, Rir, SynthesisConfig, Transducer};

pub const DEFAULT_LATE_CUTOFF_MS: f64 = 50.0;
pub const LPC_ORDER: usize = 16;
pub const REFERENCE_DIMS: [f64; 3] = [5.0, 5.0, 3.0];
pub const REFERENCE_ALPHA: f64 = 0.2;
pub const REFERENCE_DISTANCE: f64 = 1.0;

const SPECTRUM_SEGMENT: usize = 512;

/// Noise gains, one per component, in units of noise RMS.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseCalibration {
    pub white_gain: f64,
    pub diffuse_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Target SNR of the white component on the reference scene; `None`
    /// disables it.
    #[serde(default)]
    pub white_snr_db: Option<f64>,
    #[serde(default)]
    pub diffuse_snr_db: Option<f64>,
    #[serde(default = "default_cutoff")]
    pub late_cutoff_ms: f64,
    #[serde(default)]
    pub calibration: NoiseCalibration,
    /// Per-render uniform offset range applied to both gains, dB.
    #[serde(default)]
    pub gain_jitter_db: f64,
}

fn default_cutoff() -> f64 {
    DEFAULT_LATE_CUTOFF_MS
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            white_snr_db: None,
            diffuse_snr_db: None,
            late_cutoff_ms: DEFAULT_LATE_CUTOFF_MS,
            calibration: NoiseCalibration::default(),
            gain_jitter_db: 0.0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.late_cutoff_ms > 0.0 && self.late_cutoff_ms.is_finite()) {
            return Err(Error::Config(format!(
                "late_cutoff_ms must be positive, got {}",
                self.late_cutoff_ms
            )));
        }
        let c = &self.calibration;
        if [c.white_gain, c.diffuse_gain, self.gain_jitter_db]
            .iter()
            .any(|g| !(g.is_finite() && *g >= 0.0))
        {
            return Err(Error::Config("noise gains and jitter must be finite and >= 0".into()));
        }
        for snr in [self.white_snr_db, self.diffuse_snr_db].into_iter().flatten() {
            if !snr.is_finite() {
                return Err(Error::Config(format!("SNR must be finite, got {snr}")));
            }
        }
        Ok(())
    }

    pub fn is_silent(&self) -> bool {
        self.calibration.white_gain == 0.0 && self.calibration.diffuse_gain == 0.0
    }

    /// Sets both gains from the SNR targets on the reference scene.
    pub fn calibrate(&mut self, dry: &[f64], synth: &SynthesisConfig, air: &AirAbsorption) -> Result<()> {
        self.validate()?;
        let reference = reference_rir(synth, air)?;
        let gain = |snr: Option<f64>| snr.map_or(Ok(0.0), |s| gain_for(&reference, dry, s));
        self.calibration = NoiseCalibration {
            white_gain: gain(self.white_snr_db)?,
            diffuse_gain: gain(self.diffuse_snr_db)?,
        };
        Ok(())
    }
}

/// Omni source in the middle of the reference room with an omni microphone
/// `REFERENCE_DISTANCE` away along x.
pub fn reference_rir(synth: &SynthesisConfig, air: &AirAbsorption) -> Result<Rir> {
    let room = Room::uniform(REFERENCE_DIMS, REFERENCE_ALPHA)?;
    let centre = REFERENCE_DIMS.map(|d| d / 2.0);
    let mut mic = centre;
    mic[0] += REFERENCE_DISTANCE;
    synthesize_rir(&room, &Transducer::omni(centre), &[Transducer::omni(mic)], synth, air)
}

/// Gain giving `target_snr_db` when `dry` is rendered in the reference scene.
pub fn calibrate_noise_gain(
    target_snr_db: f64,
    dry: &[f64],
    synth: &SynthesisConfig,
    air: &AirAbsorption,
) -> Result<f64> {
    gain_for(&reference_rir(synth, air)?, dry, target_snr_db)
}

fn gain_for(reference: &Rir, dry: &[f64], target_snr_db: f64) -> Result<f64> {
    if !target_snr_db.is_finite() {
        return Err(Error::Config(format!("SNR must be finite, got {target_snr_db}")));
    }
    let clean = convolve_channels(reference, dry)?;
    let power = mean_power(&clean);
    if !(power > 0.0) {
        return Err(Error::Degenerate("reference render is silent".into()));
    }
    Ok((power / 10f64.powf(target_snr_db / 10.0)).sqrt())
}

fn convolve_channels(rir: &Rir, dry: &[f64]) -> Result<Vec<Vec<f64>>> {
    if dry.is_empty() {
        return Err(Error::Domain("dry signal is empty".into()));
    }
    rir.validate()?;
    Ok(rir.channels.iter().map(|h| dsp::convolve(h, dry)).collect())
}

fn mean_power(channels: &[Vec<f64>]) -> f64 {
    let n: usize = channels.iter().map(|c| c.len()).sum();
    if n == 0 {
        return 0.0;
    }
    channels.iter().map(|c| dsp::energy(c)).sum::<f64>() / n as f64
}

fn normalize_power(channels: &mut [Vec<f64>]) -> Result<()> {
    let p = mean_power(channels);
    if !(p > 0.0) {
        return Err(Error::Degenerate("noise component is silent".into()));
    }
    let scale = 1.0 / p.sqrt();
    channels.iter_mut().flatten().for_each(|v| *v *= scale);
    Ok(())
}

/// SNR in dB: clean energy over noise energy, each averaged over channels.
pub fn snr_db(clean: &[Vec<f64>], noise: &[Vec<f64>]) -> f64 {
    10.0 * (mean_power(clean) / mean_power(noise)).log10()
}

/// All-pole speech-shaping filter `1 / A(z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeechShaper {
    /// `A(z)` coefficients, `a[0] = 1`.
    pub lpc: Vec<f64>,
}

impl SpeechShaper {
    /// Linear-prediction fit of order `LPC_ORDER` to the long-term average
    /// spectrum of a corpus. Each signal contributes equally.
    pub fn fit(corpus: &[Vec<f64>]) -> Result<Self> {
        let mut psd = vec![0.0; SPECTRUM_SEGMENT / 2 + 1];
        let mut used = 0;
        for signal in corpus {
            let p = welch_psd(signal, SPECTRUM_SEGMENT);
            let total: f64 = p.iter().sum();
            if total > 0.0 {
                psd.iter_mut().zip(&p).for_each(|(a, b)| *a += b / total);
                used += 1;
            }
        }
        if used == 0 {
            return Err(Error::Degenerate("dry corpus is silent".into()));
        }
        let spec: Vec<Complex64> = psd.iter().map(|p| Complex64::new(*p, 0.0)).collect();
        let mut r = dsp::irfft(&spec, SPECTRUM_SEGMENT);
        r.truncate(LPC_ORDER + 1);
        // A faint white floor keeps the recursion stable for line spectra.
        r[0] *= 1.0 + 1e-9;
        Ok(SpeechShaper { lpc: levinson(&r)? })
    }

    /// `|1 / A|` at normalized frequency `f / fs`.
    pub fn magnitude(&self, f_norm: f64) -> f64 {
        let a: Complex64 = self
            .lpc
            .iter()
            .enumerate()
            .map(|(k, c)| Complex64::from_polar(*c, -2.0 * std::f64::consts::PI * f_norm * k as f64))
            .sum();
        1.0 / a.norm()
    }

    /// White Gaussian noise through `1 / A(z)`, after a settling run-in.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let settle = 64 * self.lpc.len();
        let p = self.lpc.len() - 1;
        let mut y = vec![0.0; settle + n];
        for i in 0..y.len() {
            let mut v: f64 = rng.sample(StandardNormal);
            for k in 1..=p.min(i) {
                v -= self.lpc[k] * y[i - k];
            }
            y[i] = v;
        }
        y.split_off(settle)
    }
}

/// Levinson–Durbin recursion: prediction polynomial from autocorrelation.
fn levinson(r: &[f64]) -> Result<Vec<f64>> {
    if !(r[0] > 0.0) {
        return Err(Error::Degenerate("zero autocorrelation".into()));
    }
    let p = r.len() - 1;
    let mut a = vec![0.0; p + 1];
    a[0] = 1.0;
    let mut err = r[0];
    for i in 1..=p {
        let acc: f64 = (0..i).map(|j| a[j] * r[i - j]).sum();
        let k = -acc / err;
        let prev = a.clone();
        for j in 1..i {
            a[j] = prev[j] + k * prev[i - j];
        }
        a[i] = k;
        err *= 1.0 - k * k;
        if !(err > 0.0) {
            return Err(Error::Degenerate("prediction error vanished".into()));
        }
    }
    Ok(a)
}

/// Averaged Hann-windowed periodogram with half-overlapping segments.
pub(crate) fn welch_psd(x: &[f64], seg: usize) -> Vec<f64> {
    let window: Vec<f64> = (0..seg)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / seg as f64).cos())
        .collect();
    let mut out = vec![0.0; seg / 2 + 1];
    let mut start = 0;
    loop {
        let frame: Vec<f64> = (0..seg)
            .map(|i| x.get(start + i).copied().unwrap_or(0.0) * window[i])
            .collect();
        for (o, v) in out.iter_mut().zip(dsp::rfft(&frame, seg)) {
            *o += v.norm_sqr();
        }
        start += seg / 2;
        if start + seg > x.len() {
            break;
        }
    }
    out
}

/// A donor impulse response with its first `cutoff_ms` zeroed.
pub fn late_part(rir: &Rir, cutoff_ms: f64) -> Result<Rir> {
    if !(cutoff_ms > 0.0) {
        return Err(Error::Config(format!("late cutoff must be positive, got {cutoff_ms}")));
    }
    let cut = ((cutoff_ms * 1e-3 * rir.fs).round() as usize).min(rir.n_samples());
    let mut late = rir.clone();
    for c in &mut late.channels {
        c[..cut].iter_mut().for_each(|v| *v = 0.0);
    }
    if late.channels.iter().flatten().all(|v| *v == 0.0) {
        return Err(Error::Degenerate(format!(
            "impulse response is all zero after {cutoff_ms} ms"
        )));
    }
    Ok(late)
}

/// Each channel of the late response convolved with the shaped source.
pub fn diffuse_noise(late_rir: &Rir, shaped_source: &[f64]) -> Result<Vec<Vec<f64>>> {
    if late_rir.channels.iter().flatten().all(|v| *v == 0.0) {
        return Err(Error::Degenerate("late impulse response is all zero".into()));
    }
    convolve_channels(late_rir, shaped_source)
}

/// Generator for the diffuse component of one render.
#[derive(Debug, Clone)]
pub struct DiffuseSource {
    pub late: Rir,
    pub shaper: SpeechShaper,
}

impl DiffuseSource {
    pub fn new(donor: &Rir, cutoff_ms: f64, shaper: SpeechShaper) -> Result<Self> {
        Ok(DiffuseSource {
            late: late_part(donor, cutoff_ms)?,
            shaper,
        })
    }

    /// `n` samples per channel of steady-state diffuse noise.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        let l = self.late.n_samples();
        let source = self.shaper.generate(n + l.saturating_sub(1), rng);
        let full = diffuse_noise(&self.late, &source)?;
        Ok(full.into_iter().map(|c| c[l - 1..l - 1 + n].to_vec()).collect())
    }
}

/// Clean and noisy versions of one render.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub clean: Vec<Vec<f64>>,
    pub noise: Vec<Vec<f64>>,
}

impl Rendered {
    pub fn mixture(&self) -> Vec<Vec<f64>> {
        if self.noise.is_empty() {
            return self.clean.clone();
        }
        self.clean
            .iter()
            .zip(&self.noise)
            .map(|(c, n)| c.iter().zip(n).map(|(a, b)| a + b).collect())
            .collect()
    }

    pub fn snr_db(&self) -> f64 {
        snr_db(&self.clean, &self.noise)
    }
}

/// `x = h * s + n` per channel, over the full convolution length.
pub fn render<R: Rng + ?Sized>(
    rir: &Rir,
    dry: &[f64],
    noise: &NoiseConfig,
    diffuse: Option<&DiffuseSource>,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    Ok(render_parts(rir, dry, noise, diffuse, rng)?.mixture())
}

/// As [`render`], keeping the clean and noise parts apart. `noise` is empty
/// when both gains are zero.
pub fn render_parts<R: Rng + ?Sized>(
    rir: &Rir,
    dry: &[f64],
    noise: &NoiseConfig,
    diffuse: Option<&DiffuseSource>,
    rng: &mut R,
) -> Result<Rendered> {
    noise.validate()?;
    let clean = convolve_channels(rir, dry)?;
    if noise.is_silent() {
        return Ok(Rendered { clean, noise: Vec::new() });
    }
    let n = clean[0].len();
    let n_ch = clean.len();
    let jitter = if noise.gain_jitter_db > 0.0 {
        let db = rng.random_range(-noise.gain_jitter_db..=noise.gain_jitter_db);
        10f64.powf(db / 20.0)
    } else {
        1.0
    };
    let mut total = vec![vec![0.0; n]; n_ch];
    let white_gain = noise.calibration.white_gain * jitter;
    if white_gain > 0.0 {
        let mut w: Vec<Vec<f64>> = (0..n_ch)
            .map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        normalize_power(&mut w)?;
        add_scaled(&mut total, &w, white_gain);
    }
    let diffuse_gain = noise.calibration.diffuse_gain * jitter;
    if diffuse_gain > 0.0 {
        let src = diffuse.ok_or_else(|| {
            Error::Config("diffuse noise requested without a donor response and shaping filter".into())
        })?;
        if src.late.channels.len() != n_ch {
            return Err(Error::Shape {
                expected: n_ch,
                got: src.late.channels.len(),
            });
        }
        let mut d = src.generate(n, rng)?;
        normalize_power(&mut d)?;
        add_scaled(&mut total, &d, diffuse_gain);
    }
    Ok(Rendered { clean, noise: total })
}

fn add_scaled(acc: &mut [Vec<f64>], x: &[Vec<f64>], g: f64) {
    for (a, c) in acc.iter_mut().zip(x) {
        for (v, s) in a.iter_mut().zip(c) {
            *v += g * s;
        }
    }
}

/// Mono mix of a WAV file, resampled to `fs`.
pub fn load_dry(path: &Path, fs: f64) -> Result<Vec<f64>> {
    let wav = crate::io::read_wav(path)?;
    let n_ch = wav.channels.len() as f64;
    let n = wav.channels[0].len();
    let mono: Vec<f64> = (0..n)
        .map(|i| wav.channels.iter().map(|c| c[i]).sum::<f64>() / n_ch)
        .collect();
    if mono.is_empty() {
        return Err(Error::Domain(format!("{path:?} contains no samples")));
    }
    Ok(dsp::resample(&mono, wav.fs as f64, fs))
}

/// A single WAV file, or every `.wav` file in a directory in name order.
pub fn load_corpus(path: &Path, fs: f64) -> Result<Vec<Vec<f64>>> {
    if !path.is_dir() {
        return Ok(vec![load_dry(path, fs)?]);
    }
    let mut files: Vec<_> = std::fs::read_dir(path)
        .map_err(|e| Error::io(path, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!("no .wav files in {path:?}")));
    }
    files.iter().map(|f| load_dry(f, fs)).collect()
}
