//! Procedural measured-grid stand-ins with a measurement-style layout
//! (30 azimuths x 18 elevations, 48 kHz, 256-tap responses).

use crate::error::{Error, Result};
use crate::materials::minimum_phase;

use super::grid::MeasuredGrid;
use super::sh::node_direction;

pub const STANDIN_SOURCES: [&str; 3] = ["genelec_8020", "neumann_kh120a", "yamaha_dxr8"];
pub const STANDIN_MIC: &str = "akg_c414_omni";

const FS: f64 = 48_000.0;
const FIR_LEN: usize = 256;
const ONSET: usize = 32;
const N_FFT: usize = 512;

struct Design {
    /// Beam concentration `k0 + k1 * (f / 1 kHz)^p`, capped at `k_max`.
    k0: f64,
    k1: f64,
    p: f64,
    k_max: f64,
    /// Second-order high-pass corner, Hz; zero for none.
    f_hp: f64,
    /// Extra rear attenuation mixing in a cardioid-like term.
    rear: f64,
}

fn design(name: &str) -> Option<Design> {
    Some(match name {
        "genelec_8020" => Design { k0: 0.05, k1: 0.35, p: 1.0, k_max: 6.0, f_hp: 65.0, rear: 0.15 },
        "neumann_kh120a" => Design { k0: 0.08, k1: 0.30, p: 1.1, k_max: 6.5, f_hp: 52.0, rear: 0.2 },
        "yamaha_dxr8" => Design { k0: 0.10, k1: 0.55, p: 0.85, k_max: 7.0, f_hp: 55.0, rear: 0.1 },
        "akg_c414_omni" => Design { k0: 0.0, k1: 0.015, p: 2.0, k_max: 1.5, f_hp: 0.0, rear: 0.0 },
        _ => return None,
    })
}

pub fn standin_names() -> Vec<&'static str> {
    let mut v = STANDIN_SOURCES.to_vec();
    v.push(STANDIN_MIC);
    v
}

/// Magnitude of the stand-in at angle `cos_theta` off boresight and frequency `f`.
fn magnitude(d: &Design, cos_theta: f64, f: f64) -> f64 {
    let kappa = (d.k0 + d.k1 * (f / 1000.0).powf(d.p)).min(d.k_max);
    let beam = (kappa * (cos_theta - 1.0)).exp();
    let rear = 1.0 - d.rear * 0.5 * (1.0 - cos_theta);
    let hp = if d.f_hp > 0.0 {
        let r = (f / d.f_hp).powi(2);
        r / (1.0 + r * r).sqrt()
    } else {
        1.0
    };
    (beam * rear * hp).max(1e-3)
}

pub fn standin_grid(name: &str) -> Result<MeasuredGrid> {
    let d = design(name).ok_or_else(|| {
        Error::Config(format!("unknown stand-in pattern {name:?}; known: {:?}", standin_names()))
    })?;
    let azimuths_deg: Vec<f64> = (0..30).map(|i| i as f64 * 12.0).collect();
    let elevations_deg: Vec<f64> = (0..18).map(|i| -85.0 + 10.0 * i as f64).collect();
    let mut responses = Vec::with_capacity(elevations_deg.len());
    for &el in &elevations_deg {
        let mut row = Vec::with_capacity(azimuths_deg.len());
        for &az in &azimuths_deg {
            let cos_theta = node_direction(az, el).x;
            let mag: Vec<f64> = (0..=N_FFT / 2)
                .map(|k| magnitude(&d, cos_theta, k as f64 * FS / N_FFT as f64))
                .collect();
            let mut fir = vec![0.0; ONSET];
            fir.extend(minimum_phase(&mag, FIR_LEN - ONSET)?);
            row.push(fir);
        }
        responses.push(row);
    }
    Ok(MeasuredGrid {
        name: name.to_string(),
        fs_hz: FS,
        azimuths_deg,
        elevations_deg,
        fir_length: FIR_LEN,
        responses,
    })
}
