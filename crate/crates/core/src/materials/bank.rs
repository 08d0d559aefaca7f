use crate::error::{Error, Result};

use super::{BandValues, BANDS, N_BANDS};

/// Half-cosine octave weights at frequency `f` (Hz). The lowest band holds
/// gain 1 down to DC and the highest band holds gain 1 up to Nyquist, so the
/// weights always sum to one.
pub fn band_weights(f: f64) -> BandValues {
    let mut w = [0.0; N_BANDS];
    if f <= BANDS[0] {
        w[0] = 1.0;
        return w;
    }
    if f >= BANDS[N_BANDS - 1] {
        w[N_BANDS - 1] = 1.0;
        return w;
    }
    // Between two adjacent centres exactly two bands are active.
    let x = (f / BANDS[0]).log2();
    let lo = (x.floor() as usize).min(N_BANDS - 2);
    let frac = x - lo as f64;
    let upper = 0.5 * (1.0 - (std::f64::consts::PI * frac).cos());
    w[lo] = 1.0 - upper;
    w[lo + 1] = upper;
    w
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandFilterBank {
    pub centers: BandValues,
    pub fs: f64,
    /// DFT length; the bank covers bins `0..=n_fft / 2`.
    pub n_fft: usize,
    /// `nu[bin][band]`.
    pub nu: Vec<BandValues>,
}

impl BandFilterBank {
    pub fn n_bins(&self) -> usize {
        self.nu.len()
    }

    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.fs / self.n_fft as f64
    }
}

/// Filter bank on the `bins + 1` positive-frequency bins of a `2 * bins`
/// point DFT at sampling rate `fs`.
pub fn band_filter_bank(bins: usize, fs: f64) -> Result<BandFilterBank> {
    if bins < 16 {
        return Err(Error::Config(format!("filter bank needs at least 16 bins, got {bins}")));
    }
    if !(fs >= 2.0 * BANDS[N_BANDS - 1]) {
        return Err(Error::Config(format!(
            "sampling rate {fs} Hz cannot represent the {} Hz band",
            BANDS[N_BANDS - 1]
        )));
    }
    let n_fft = 2 * bins;
    let nu = (0..=bins)
        .map(|k| band_weights(k as f64 * fs / n_fft as f64))
        .collect();
    Ok(BandFilterBank {
        centers: BANDS,
        fs,
        n_fft,
        nu,
    })
}

/// Per-bin response `sum_b d_tilde(b) * nu_b(f)`.
pub fn interpolate_bands(d_tilde: &BandValues, bank: &BandFilterBank) -> Vec<f64> {
    bank.nu
        .iter()
        .map(|w| w.iter().zip(d_tilde).map(|(a, b)| a * b).sum())
        .collect()
}
