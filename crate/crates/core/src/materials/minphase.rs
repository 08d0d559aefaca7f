use num_complex::Complex64;

use crate::dsp;
use crate::error::{Error, Result};

/// Magnitudes below this fraction of the peak are clamped before the log.
const MAGNITUDE_FLOOR: f64 = 1e-8;

/// Minimum-phase FIR with the given magnitude response, via the folded real
/// cepstrum.
///
/// `magnitude` holds the `n / 2 + 1` positive-frequency bins of an `n`-point
/// DFT grid. The cepstrum is computed on a grid of at least `8 * n_taps`
/// points; a coarser input is linearly interpolated onto it.
pub fn minimum_phase(magnitude: &[f64], n_taps: usize) -> Result<Vec<f64>> {
    if magnitude.len() < 2 {
        return Err(Error::Domain("magnitude needs at least two bins".into()));
    }
    if magnitude.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::Domain("magnitude must be finite and non-negative".into()));
    }
    let peak = magnitude.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return Err(Error::Domain("magnitude response is identically zero".into()));
    }
    let n_in = 2 * (magnitude.len() - 1);
    let n = n_in.max((8 * n_taps).next_power_of_two());
    if n_taps == 0 || n_taps > n {
        return Err(Error::Domain(format!("tap count {n_taps} outside 1..={n}")));
    }

    let half = n / 2;
    let floor = MAGNITUDE_FLOOR * peak;
    let log_mag: Vec<f64> = (0..=half)
        .map(|k| {
            let m = if n == n_in {
                magnitude[k]
            } else {
                let pos = k as f64 * n_in as f64 / n as f64;
                let i = (pos.floor() as usize).min(magnitude.len() - 2);
                let t = pos - i as f64;
                magnitude[i] * (1.0 - t) + magnitude[i + 1] * t
            };
            m.max(floor).ln()
        })
        .collect();

    let log_spec: Vec<Complex64> = log_mag.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let cepstrum = dsp::irfft(&log_spec, n);

    // Fold the anti-causal part onto the causal part.
    let mut folded = vec![0.0; n];
    folded[0] = cepstrum[0];
    for k in 1..half {
        folded[k] = 2.0 * cepstrum[k];
    }
    folded[half] = cepstrum[half];

    let spec = dsp::rfft(&folded, n);
    let min_spec: Vec<Complex64> = spec.iter().map(|c| c.exp()).collect();
    let mut h = dsp::irfft(&min_spec, n);
    h.truncate(n_taps);
    Ok(h)
}
