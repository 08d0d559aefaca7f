use num_complex::Complex64;

use crate::dsp;
use crate::error::{Error, Result};

pub const TUKEY_ALPHA: f64 = 0.25;

/// Tukey window of length `2 * f_bins` centred on tap `f_bins` (the
/// symmetric `2F + 1` point window without its final zero).
pub fn tukey_window(f_bins: usize, alpha: f64) -> Vec<f64> {
    let n = 2 * f_bins;
    let width = alpha * n as f64 / 2.0;
    (0..n)
        .map(|i| {
            let i = i as f64;
            let edge = i.min(n as f64 - i);
            if edge >= width {
                1.0
            } else {
                0.5 * (1.0 - (std::f64::consts::PI * edge / width).cos())
            }
        })
        .collect()
}

/// One image source's band-limited contribution as `2F` real taps.
///
/// The response is delayed by `F + tau_frac` samples so that its peak sits
/// at tap `F` (plus the fractional part) and the window is centred on it;
/// callers place the kernel `F` samples before the integer arrival time.
pub fn image_source_kernel(
    tau_frac: f64,
    d: &[f64],
    g_src: &[Complex64],
    g_mic: &[Complex64],
    amplitude: f64,
    f_bins: usize,
) -> Result<Vec<f64>> {
    let n_bins = f_bins + 1;
    for len in [d.len(), g_src.len(), g_mic.len()] {
        if len != n_bins {
            return Err(Error::Shape {
                expected: n_bins,
                got: len,
            });
        }
    }
    if !(0.0..1.0).contains(&tau_frac) {
        return Err(Error::Domain(format!("fractional delay {tau_frac} outside [0, 1)")));
    }
    let spec: Vec<Complex64> = (0..n_bins)
        .map(|k| {
            let phase = -std::f64::consts::PI * k as f64 * (f_bins as f64 + tau_frac) / f_bins as f64;
            Complex64::from_polar(amplitude * d[k], phase) * g_src[k] * g_mic[k]
        })
        .collect();
    let window = tukey_window(f_bins, TUKEY_ALPHA);
    let mut h = dsp::irfft(&spec, 2 * f_bins);
    for (v, w) in h.iter_mut().zip(&window) {
        *v *= w;
    }
    Ok(h)
}
