use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::dsp;
use crate::error::{Error, Result};
use crate::geometry::{unit_from_angles, Vec3};

use super::grid::{InterpolatedGrid, MeasuredGrid};
use super::sphere::{fibonacci_grid, voronoi_weights};

pub const DEFAULT_SH_ORDER: usize = 12;
pub const DEFAULT_LAMBDA: f64 = 1e-6;
pub const MAX_CONDITION: f64 = 1e12;

pub fn n_coefficients(order: usize) -> usize {
    (order + 1) * (order + 1)
}

/// Orthonormal real spherical harmonics up to `order` at unit direction `d`,
/// without the Condon-Shortley phase. Index `l * l + l + m`.
pub fn real_sh(order: usize, d: &Vec3) -> Vec<f64> {
    let n = n_coefficients(order);
    let mut out = vec![0.0; n];
    let x = d.z.clamp(-1.0, 1.0);
    let s = d.x.hypot(d.y);
    let phi = d.y.atan2(d.x);

    // p[l][m] holds the normalized associated Legendre values.
    let mut p = vec![vec![0.0; order + 1]; order + 1];
    p[0][0] = (1.0 / (4.0 * std::f64::consts::PI)).sqrt();
    for m in 1..=order {
        p[m][m] = ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s * p[m - 1][m - 1];
    }
    for m in 0..order {
        p[m + 1][m] = ((2 * m + 3) as f64).sqrt() * x * p[m][m];
    }
    for m in 0..=order {
        for l in m + 2..=order {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[l][m] = a * (x * p[l - 1][m] - b * p[l - 2][m]);
        }
    }

    let sqrt2 = std::f64::consts::SQRT_2;
    for l in 0..=order {
        let base = l * l + l;
        out[base] = p[l][0];
        for m in 1..=l {
            let mf = m as f64;
            out[base + m] = sqrt2 * p[l][m] * (mf * phi).cos();
            out[base - m] = sqrt2 * p[l][m] * (mf * phi).sin();
        }
    }
    out
}

/// Complex spherical-harmonic coefficients per frequency bin.
#[derive(Debug, Clone)]
pub struct ShCoefficients {
    pub order: usize,
    pub fs: f64,
    /// DFT length; bins cover `0..=n_fft / 2`.
    pub n_fft: usize,
    /// `coeffs[bin][index]`.
    pub coeffs: Vec<Vec<Complex64>>,
    /// Relative RMS misfit at the grid nodes over all bins.
    pub residual_rms: f64,
    pub condition: f64,
    /// Samples removed from every node response before the transform.
    pub bulk_delay: usize,
    pub name: String,
}

impl ShCoefficients {
    pub fn n_bins(&self) -> usize {
        self.coeffs.len()
    }

    pub fn evaluate(&self, d: &Vec3) -> Vec<Complex64> {
        let y = real_sh(self.order, d);
        self.coeffs
            .iter()
            .map(|c| c.iter().zip(&y).map(|(c, y)| c * y).sum())
            .collect()
    }
}

fn onset(fir: &[f64]) -> Option<usize> {
    let peak = fir.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if peak == 0.0 {
        return None;
    }
    fir.iter().position(|v| v.abs() >= 0.1 * peak)
}

/// Per-node spectra on the `2 * f_bins` point grid at the grid's rate, after
/// removing the common onset delay.
fn node_spectra(grid: &MeasuredGrid, f_bins: usize) -> (Vec<Vec<Complex64>>, usize) {
    let firs: Vec<&[f64]> = grid.responses.iter().flatten().map(|v| v.as_slice()).collect();
    let bulk = firs.iter().filter_map(|f| onset(f)).min().unwrap_or(0);
    let n_fft = 2 * f_bins;
    let spectra = firs
        .iter()
        .map(|f| {
            let f = &f[bulk..];
            if f.len() <= n_fft {
                dsp::rfft(f, n_fft)
            } else {
                let n = f.len().next_power_of_two();
                let fine = dsp::rfft(f, n);
                resample_bins(&fine, f_bins + 1)
            }
        })
        .collect();
    (spectra, bulk)
}

/// Linear-in-frequency resampling of positive-frequency bins spanning
/// `[0, fs/2]` onto `n_out` bins spanning the same range.
pub(crate) fn resample_bins(bins: &[Complex64], n_out: usize) -> Vec<Complex64> {
    let n_in = bins.len();
    (0..n_out)
        .map(|k| {
            if n_out == 1 || n_in == 1 {
                return bins[0];
            }
            let pos = k as f64 * (n_in - 1) as f64 / (n_out - 1) as f64;
            let i = (pos.floor() as usize).min(n_in - 2);
            let t = pos - i as f64;
            bins[i] * (1.0 - t) + bins[i + 1] * t
        })
        .collect()
}

/// Voronoi-weighted, Tikhonov-regularized least-squares fit of every
/// positive-frequency bin of the node responses.
///
/// The penalty on a degree-`l` coefficient is `lambda * l (l + 1)` scaled so
/// the highest degree receives `lambda`; the omnidirectional term is left
/// unbiased.
pub fn sh_fit(grid: &MeasuredGrid, order: usize, lambda: f64, f_bins: usize) -> Result<ShCoefficients> {
    grid.validate()?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("regularization must be >= 0, got {lambda}")));
    }
    if f_bins == 0 {
        return Err(Error::Config("need at least one frequency bin".into()));
    }
    let nodes = grid.nodes();
    let n_sh = n_coefficients(order);
    if n_sh > nodes.len() {
        return Err(Error::Config(format!(
            "order {order} needs {n_sh} nodes, grid has {}",
            nodes.len()
        )));
    }
    let weights = voronoi_weights(&nodes)?;

    let mut y = DMatrix::zeros(nodes.len(), n_sh);
    for (i, d) in nodes.iter().enumerate() {
        for (j, v) in real_sh(order, d).into_iter().enumerate() {
            y[(i, j)] = v;
        }
    }
    let mut yw = y.transpose();
    for (i, w) in weights.iter().enumerate() {
        yw.column_mut(i).scale_mut(*w);
    }
    let mut normal = &yw * &y;
    let top = (order * (order + 1)).max(1) as f64;
    for l in 0..=order {
        for k in l * l..(l + 1) * (l + 1) {
            normal[(k, k)] += lambda * (l * (l + 1)) as f64 / top;
        }
    }
    let eig = SymmetricEigen::new(normal);
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned {
            msg: format!("spherical-harmonic normal equations at order {order}"),
            condition,
        });
    }
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| 1.0 / v));
    let inverse = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
    let projector = inverse * yw;

    let (spectra, bulk) = node_spectra(grid, f_bins);
    let n_bins = f_bins + 1;
    let mut coeffs = Vec::with_capacity(n_bins);
    let (mut err, mut tot) = (0.0, 0.0);
    for k in 0..n_bins {
        let re = nalgebra::DVector::from_iterator(nodes.len(), spectra.iter().map(|s| s[k].re));
        let im = nalgebra::DVector::from_iterator(nodes.len(), spectra.iter().map(|s| s[k].im));
        let cr = &projector * &re;
        let ci = &projector * &im;
        let fr = &y * &cr - &re;
        let fi = &y * &ci - &im;
        err += fr.norm_squared() + fi.norm_squared();
        tot += re.norm_squared() + im.norm_squared();
        coeffs.push(cr.iter().zip(ci.iter()).map(|(r, i)| Complex64::new(*r, *i)).collect());
    }
    let residual_rms = if tot > 0.0 { (err / tot).sqrt() } else { 0.0 };

    Ok(ShCoefficients {
        order,
        fs: grid.fs_hz,
        n_fft: 2 * f_bins,
        coeffs,
        residual_rms,
        condition,
        bulk_delay: bulk,
        name: grid.name.clone(),
    })
}

/// Evaluate the expansion at every point of an `n`-point Fibonacci grid.
pub fn resample_to_fibonacci(sh: &ShCoefficients, n: usize) -> Result<InterpolatedGrid> {
    let points = fibonacci_grid(n)?;
    let gains = points.iter().map(|p| sh.evaluate(p)).collect();
    InterpolatedGrid::new(sh.name.clone(), points, gains, sh.fs, sh.n_fft)
}

/// Node direction for an azimuth/elevation pair in degrees.
pub fn node_direction(az_deg: f64, el_deg: f64) -> Vec3 {
    unit_from_angles(az_deg.to_radians(), el_deg.to_radians())
}
