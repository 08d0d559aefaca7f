//! Energy decay curves, reverberation-time estimation and closed-form
//! Sabine / Eyring predictions.

use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};
use crate::geometry::Room;
use crate::materials::{band_weights, AirAbsorption, BandValues, SurfaceProfile, BANDS, N_BANDS};

pub const EDC_FLOOR_DB: f64 = -120.0;
/// Bands at or below this centre frequency are flagged unreliable.
pub const RELIABLE_FROM_HZ: f64 = 500.0;
const SABINE_CONSTANT: f64 = 0.161;

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyDecayCurve {
    pub values: Vec<f64>,
    pub fs: f64,
}

/// Schroeder backward integration in dB, clamped at [`EDC_FLOOR_DB`].
pub fn energy_decay_curve(channel: &[f64], fs: f64) -> Result<EnergyDecayCurve> {
    if channel.is_empty() {
        return Err(Error::Domain("empty channel".into()));
    }
    if !(fs > 0.0) {
        return Err(Error::Domain(format!("sampling rate must be positive, got {fs}")));
    }
    let mut tail = vec![0.0; channel.len()];
    let mut acc = 0.0;
    for i in (0..channel.len()).rev() {
        acc += channel[i] * channel[i];
        tail[i] = acc;
    }
    let total = tail[0];
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Domain("channel has no finite energy".into()));
    }
    let mut prev = 0.0;
    let values = tail
        .iter()
        .map(|e| {
            let db = if *e > 0.0 { 10.0 * (e / total).log10() } else { EDC_FLOOR_DB };
            let db = db.max(EDC_FLOOR_DB).min(prev);
            prev = db;
            db
        })
        .collect();
    Ok(EnergyDecayCurve { values, fs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayFit {
    T30,
    T20,
}

impl DecayFit {
    fn range(self) -> (f64, f64) {
        match self {
            DecayFit::T30 => (-5.0, -35.0),
            DecayFit::T20 => (-5.0, -25.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rt60Estimate {
    pub seconds: f64,
    pub fit: DecayFit,
}

fn fit_line(edc: &EnergyDecayCurve, fit: DecayFit) -> Option<f64> {
    let (hi, lo) = fit.range();
    if !edc.values.iter().any(|v| *v <= lo) {
        return None;
    }
    let start = edc.values.iter().position(|v| *v <= hi)?;
    let end = edc.values.iter().rposition(|v| *v >= lo)?;
    if end <= start {
        return None;
    }
    let n = (end - start + 1) as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for i in start..=end {
        sx += i as f64;
        sy += edc.values[i];
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for i in start..=end {
        let dx = i as f64 - mx;
        sxy += dx * (edc.values[i] - my);
        sxx += dx * dx;
    }
    let slope = sxy / sxx * edc.fs;
    if slope < 0.0 {
        Some(-60.0 / slope)
    } else {
        None
    }
}

/// Line fit on the requested decay range, extrapolated to -60 dB. T30
/// falls back to T20 when the curve does not reach -35 dB.
pub fn rt60_from_edc(edc: &EnergyDecayCurve, fit: DecayFit) -> Result<Rt60Estimate> {
    let order: &[DecayFit] = match fit {
        DecayFit::T30 => &[DecayFit::T30, DecayFit::T20],
        DecayFit::T20 => &[DecayFit::T20],
    };
    for &f in order {
        if let Some(seconds) = fit_line(edc, f) {
            return Ok(Rt60Estimate { seconds, fit: f });
        }
    }
    let reached = edc.values.iter().cloned().fold(0.0, f64::min);
    Err(Error::DecayRange(format!(
        "decay curve only reaches {reached:.1} dB, need -25 dB"
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRt60 {
    pub bands_hz: BandValues,
    pub rt60: BandValues,
    pub fit: [DecayFit; N_BANDS],
    /// False for bands below the Schroeder-frequency region.
    pub reliable: [bool; N_BANDS],
}

/// One channel split into the half-cosine octave bands (zero-phase,
/// frequency domain), each band truncated back to the input length.
pub fn split_bands(channel: &[f64], fs: f64) -> Vec<Vec<f64>> {
    let n = dsp::next_fast_len(2 * channel.len());
    let spec = dsp::rfft(channel, n);
    let weights: Vec<BandValues> = (0..spec.len())
        .map(|k| band_weights(k as f64 * fs / n as f64))
        .collect();
    (0..N_BANDS)
        .map(|b| {
            let band: Vec<_> = spec.iter().zip(&weights).map(|(s, w)| s * w[b]).collect();
            let mut x = dsp::irfft(&band, n);
            x.truncate(channel.len());
            x
        })
        .collect()
}

pub fn octave_band_rt60(channel: &[f64], fs: f64) -> Result<BandRt60> {
    if (channel.len() as f64) < 0.1 * fs {
        return Err(Error::Domain(format!(
            "need at least 0.1 s of signal, got {} samples at {fs} Hz",
            channel.len()
        )));
    }
    let mut rt60 = [0.0; N_BANDS];
    let mut fit = [DecayFit::T30; N_BANDS];
    for (b, x) in split_bands(channel, fs).iter().enumerate() {
        let est = rt60_from_edc(&energy_decay_curve(x, fs)?, DecayFit::T30).map_err(|e| match e {
            Error::DecayRange(m) => Error::DecayRange(format!("{} Hz band: {m}", BANDS[b])),
            other => other,
        })?;
        rt60[b] = est.seconds;
        fit[b] = est.fit;
    }
    Ok(BandRt60 {
        bands_hz: BANDS,
        rt60,
        fit,
        reliable: BANDS.map(|f| f >= RELIABLE_FROM_HZ),
    })
}

fn absorption_area(room: &Room, profiles: &[SurfaceProfile; 6]) -> BandValues {
    let areas = room.surface_areas();
    let mut a = [0.0; N_BANDS];
    for (s, p) in profiles.iter().enumerate() {
        for b in 0..N_BANDS {
            a[b] += areas[s] * p.alpha[b];
        }
    }
    a
}

/// `0.161 V / sum_i S_i alpha_i(b)`.
pub fn sabine_rt60(room: &Room, profiles: &[SurfaceProfile; 6]) -> Result<BandValues> {
    let v = room.volume();
    let a = absorption_area(room, profiles);
    if a.iter().any(|x| *x <= 0.0) {
        return Err(Error::Domain("zero absorption gives an infinite reverberation time".into()));
    }
    Ok(a.map(|x| SABINE_CONSTANT * v / x))
}

/// `0.161 V / (-S ln(1 - mean alpha(b)))`.
pub fn eyring_rt60(room: &Room, profiles: &[SurfaceProfile; 6]) -> Result<BandValues> {
    eyring_rt60_with_air(room, profiles, &AirAbsorption::none())
}

/// Eyring with an air term: `0.161 V / (-S ln(1 - mean alpha) + 4 m V)`,
/// where `m = 2 gamma` is the intensity attenuation per metre.
pub fn eyring_rt60_with_air(
    room: &Room,
    profiles: &[SurfaceProfile; 6],
    air: &AirAbsorption,
) -> Result<BandValues> {
    let v = room.volume();
    let s = room.surface_area();
    let a = absorption_area(room, profiles);
    let mut out = [0.0; N_BANDS];
    for b in 0..N_BANDS {
        let mean = a[b] / s;
        let m = 2.0 * air.gamma[b];
        if mean <= 0.0 && m <= 0.0 {
            return Err(Error::Domain("zero absorption gives an infinite reverberation time".into()));
        }
        let denom = if mean >= 1.0 { f64::INFINITY } else { -s * (1.0 - mean).ln() + 4.0 * m * v };
        out[b] = SABINE_CONSTANT * v / denom;
    }
    Ok(out)
}
