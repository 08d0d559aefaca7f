//! Small FFT-backed signal helpers shared by the other modules.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub fn forward_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n))
}

pub fn inverse_plan(n: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n))
}

/// Positive-frequency half spectrum (`n / 2 + 1` bins) of a real signal,
/// zero-padded or truncated to `n` samples.
pub fn rfft(signal: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(signal.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    forward_plan(n).process(&mut buf);
    buf.truncate(n / 2 + 1);
    buf
}

/// Inverse of [`rfft`]: rebuilds the Hermitian spectrum and returns `n` real
/// samples. Imaginary parts at DC and (for even `n`) Nyquist are ignored.
pub fn irfft(half: &[Complex64], n: usize) -> Vec<f64> {
    assert_eq!(half.len(), n / 2 + 1, "half spectrum length mismatch");
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    buf[0] = Complex64::new(half[0].re, 0.0);
    for k in 1..half.len() {
        if 2 * k == n {
            buf[k] = Complex64::new(half[k].re, 0.0);
        } else {
            buf[k] = half[k];
            buf[n - k] = half[k].conj();
        }
    }
    inverse_plan(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter().map(|c| c.re * scale).collect()
}

pub fn next_fast_len(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// Smallest even `m >= n` whose only prime factors are 2, 3 and 5.
pub fn next_smooth_len(n: usize) -> usize {
    let mut m = n.max(2);
    loop {
        if m.is_multiple_of(2) {
            let mut r = m;
            for p in [2, 3, 5] {
                while r.is_multiple_of(p) {
                    r /= p;
                }
            }
            if r == 1 {
                return m;
            }
        }
        m += 1;
    }
}

/// Operands at most this long are convolved directly.
const DIRECT_CONVOLUTION_LEN: usize = 64;

/// Linear convolution; output length `a.len() + b.len() - 1`. Uses the FFT
/// unless one operand is short.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= DIRECT_CONVOLUTION_LEN {
        let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
        let mut out = vec![0.0; out_len];
        for (j, s) in short.iter().enumerate() {
            for (o, l) in out[j..].iter_mut().zip(long) {
                *o += s * l;
            }
        }
        return out;
    }
    let n = next_fast_len(out_len);
    let fa = rfft(a, n);
    let fb = rfft(b, n);
    let prod: Vec<Complex64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
    let mut out = irfft(&prod, n);
    out.truncate(out_len);
    out
}

/// Band-limited resampling of a whole signal by spectral zero-padding or
/// truncation.
pub fn resample(signal: &[f64], from_hz: f64, to_hz: f64) -> Vec<f64> {
    if signal.is_empty() || (from_hz - to_hz).abs() < 1e-9 {
        return signal.to_vec();
    }
    let n_in = signal.len();
    let n_out = ((n_in as f64) * to_hz / from_hz).round().max(1.0) as usize;
    let spec = rfft(signal, n_in);
    let bins_out = n_out / 2 + 1;
    let keep = spec.len().min(bins_out);
    let mut out_spec = vec![Complex64::new(0.0, 0.0); bins_out];
    out_spec[..keep].copy_from_slice(&spec[..keep]);
    // A shared Nyquist bin would be counted twice once mirrored.
    if n_out.is_multiple_of(2) && keep == bins_out && n_in > n_out {
        out_spec[bins_out - 1] = Complex64::new(out_spec[bins_out - 1].re, 0.0);
    }
    let scale = n_out as f64 / n_in as f64;
    irfft(&out_spec, n_out).into_iter().map(|x| x * scale).collect()
}

/// Largest sample of `x` after band-limited upsampling by `factor`.
pub fn upsampled_peak(x: &[f64], factor: usize) -> f64 {
    let n = x.len() * factor.max(1);
    resample(x, x.len() as f64, n as f64)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}
