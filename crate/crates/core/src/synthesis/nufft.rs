//! Type-1 non-uniform FFT by Gaussian gridding.
//!
//! For strengths `c_k` at sample positions `t_k` on a circle of `m` samples
//! this evaluates `S(j) = sum_k c_k exp(-2 pi i j t_k / m)` for
//! `j = 0..=m/2`, to about 1e-8 relative accuracy. Several series share one
//! set of positions; their grids are interleaved so that one spread touches
//! contiguous memory.

use num_complex::Complex64;

use crate::dsp;

/// Oversampling ratio of the fine grid.
const OVERSAMPLE: usize = 2;
/// Half-width of the spreading stencil, in fine-grid points.
const SPREAD: usize = 8;

pub(crate) struct Gridder {
    m: usize,
    mr: usize,
    n_series: usize,
    tau: f64,
    h: f64,
    e3: [f64; 2 * SPREAD],
    /// `grid[point * n_series + series]`.
    grid: Vec<Complex64>,
    weights: [f64; 2 * SPREAD],
}

impl Gridder {
    pub(crate) fn new(m: usize, n_series: usize) -> Self {
        let mr = OVERSAMPLE * m;
        let r = OVERSAMPLE as f64;
        let tau = std::f64::consts::PI * SPREAD as f64 / ((m * m) as f64 * r * (r - 0.5));
        let h = 2.0 * std::f64::consts::PI / mr as f64;
        let mut e3 = [0.0; 2 * SPREAD];
        for (slot, v) in e3.iter_mut().enumerate() {
            let l = slot as f64 - (SPREAD as f64 - 1.0);
            *v = (-(l * h).powi(2) / (4.0 * tau)).exp();
        }
        Gridder {
            m,
            mr,
            n_series,
            tau,
            h,
            e3,
            grid: vec![Complex64::new(0.0, 0.0); mr * n_series],
            weights: [0.0; 2 * SPREAD],
        }
    }

    /// Spread one point at position `t` (samples, any real) with one
    /// strength per series.
    #[inline]
    pub(crate) fn spread(&mut self, t: f64, strengths: &[Complex64]) {
        debug_assert_eq!(strengths.len(), self.n_series);
        let pos = t.rem_euclid(self.m as f64) * OVERSAMPLE as f64;
        let j0 = pos.floor();
        let xi = (pos - j0) * self.h;
        let e1 = (-xi * xi / (4.0 * self.tau)).exp();
        let e2 = (xi * self.h / (2.0 * self.tau)).exp();
        let centre = SPREAD - 1;
        let mut up = e1;
        for s in centre..2 * SPREAD {
            self.weights[s] = up * self.e3[s];
            up *= e2;
        }
        let inv = 1.0 / e2;
        let mut down = e1 * inv;
        for s in (0..centre).rev() {
            self.weights[s] = down * self.e3[s];
            down *= inv;
        }
        let ns = self.n_series;
        let mut idx = (j0 as usize + self.mr - centre) % self.mr;
        for w in &self.weights {
            let row = &mut self.grid[idx * ns..(idx + 1) * ns];
            for (g, c) in row.iter_mut().zip(strengths) {
                *g += c * *w;
            }
            idx += 1;
            if idx == self.mr {
                idx = 0;
            }
        }
    }

    /// Series sums on bins `0..=m/2`, one vector per series.
    pub(crate) fn finish(self) -> Vec<Vec<Complex64>> {
        let n_out = self.m / 2 + 1;
        let plan = dsp::forward_plan(self.mr);
        let scale = (std::f64::consts::PI / self.tau).sqrt() / self.mr as f64;
        let deconv: Vec<f64> = (0..n_out)
            .map(|j| scale * ((j * j) as f64 * self.tau).exp())
            .collect();
        let mut buf = vec![Complex64::new(0.0, 0.0); self.mr];
        (0..self.n_series)
            .map(|s| {
                for (i, v) in buf.iter_mut().enumerate() {
                    *v = self.grid[i * self.n_series + s];
                }
                plan.process(&mut buf);
                buf[..n_out].iter().zip(&deconv).map(|(v, d)| v * d).collect()
            })
            .collect()
    }
}
