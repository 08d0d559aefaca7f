//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! Run everything with `cargo test --release -p roomsim-core --test acceptance`,
//! or pick criteria by number: `... --test acceptance -- 1 4 12`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use roomsim::analysis::{eyring_rt60_with_air, octave_band_rt60};
use roomsim::dataset::{
    sample_scene, MicKind, SamplingOptions, SourceKind, WallModel, ANALYTIC_BETAS, DIMS_HIGH,
    DIMS_LOW,
};
use roomsim::directivity::{
    interpolate_grid, real_sh, sh_fit, voronoi_weights, STANDIN_MIC, STANDIN_SOURCES,
    DEFAULT_FIBONACCI_POINTS, DEFAULT_FIT_BINS, DEFAULT_LAMBDA, DEFAULT_SH_ORDER,
};
use roomsim::dsp;
use roomsim::geometry::{departure_arrival_angles, enumerate_image_sources};
use roomsim::materials::{
    air_attenuation_gain, band_weights, cumulative_damping, interpolate_bands, minimum_phase, sample_naive,
    sample_reflectivity_biased, band_filter_bank, MaterialTable, SurfaceType, N_BANDS,
};
use roomsim::synthesis::{image_source_kernel, synthesis_plan};
use roomsim::{
    generate_dataset, AirAbsorption, DatasetId, DatasetSpec, DirectivityPattern, MaxOrder, MeasuredGrid,
    Orientation, PatternSpec, Pose, Room, SurfaceProfile, SynthesisConfig, Transducer,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn fixed(order: u32, duration: f64) -> SynthesisConfig {
    SynthesisConfig {
        max_order: MaxOrder::Fixed(order),
        duration: Some(duration),
        ..SynthesisConfig::default()
    }
}

fn random_dims(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [0, 1, 2].map(|a| rng.random_range(DIMS_LOW[a]..DIMS_HIGH[a]))
}

fn random_point(rng: &mut ChaCha8Rng, dims: &[f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|a| rng.random_range(0.5..dims[a] - 0.5))
}

fn random_orientation(rng: &mut ChaCha8Rng) -> Orientation {
    Orientation::new(rng.random_range(0.0..2.0 * PI), rng.random_range(-1.2..1.2), rng.random_range(0.0..PI))
}

/// Image sum evaluated bin by bin on the output's DFT grid.
fn dense_rir(room: &Room, src: &Transducer, mic: &Transducer, cfg: &SynthesisConfig, air: &AirAbsorption) -> (Vec<f64>, usize) {
    let plan = synthesis_plan(room, &src.pose, &[mic.pose], cfg).unwrap();
    let m = plan.transform_len;
    let images = enumerate_image_sources(room, &src.pose, plan.max_order).unwrap();
    let mut half = vec![Complex64::new(0.0, 0.0); m / 2 + 1];
    for img in &images {
        let dist = (img.position - mic.pose.pos()).norm();
        if plan.radius.is_some_and(|r| dist > r) {
            continue;
        }
        let delay = dist / cfg.c * cfg.fs;
        let damp = cumulative_damping(img, &room.surfaces);
        let air_g = air_attenuation_gain(dist, air).unwrap();
        let ang = departure_arrival_angles(img, &mic.pose).unwrap();
        let g = src.pattern.eval(ang.theta_out, ang.phi_out, 0) * mic.pattern.eval(ang.theta_in, ang.phi_in, 0);
        for (j, h) in half.iter_mut().enumerate() {
            let nu = band_weights(j as f64 * cfg.fs / m as f64);
            let d: f64 = (0..N_BANDS).map(|b| nu[b] * damp[b] * air_g[b]).sum();
            *h += g * (d / dist) * Complex64::from_polar(1.0, -2.0 * PI * j as f64 * delay / m as f64);
        }
    }
    let mut h = dsp::irfft(&half, m);
    h.truncate(plan.n_samples);
    (h, images.len())
}

fn dense_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cfg = fixed(2, 0.25);
    let air = AirAbsorption::default();
    let mut worst: f64 = 0.0;
    let mut counts = Vec::new();
    for _ in 0..10 {
        let dims = random_dims(&mut rng);
        let surfaces = std::array::from_fn(|_| {
            SurfaceProfile::new(std::array::from_fn(|_| rng.random_range(0.02..0.5))).unwrap()
        });
        let room = Room::new(dims, surfaces).unwrap();
        let src = Transducer::new(
            Pose::new(random_point(&mut rng, &dims), random_orientation(&mut rng)),
            DirectivityPattern::analytic(rng.random_range(0.0..=1.0)).unwrap(),
        );
        let mic = Transducer::new(
            Pose::new(random_point(&mut rng, &dims), random_orientation(&mut rng)),
            DirectivityPattern::analytic(rng.random_range(0.0..=1.0)).unwrap(),
        );
        let fast = roomsim::synthesize_rir(&room, &src, std::slice::from_ref(&mic), &cfg, &air).unwrap();
        let (dense, k) = dense_rir(&room, &src, &mic, &cfg, &air);
        counts.push(k);
        worst = worst.max(rel_l2(&fast.channels[0], &dense));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-3 && secs < 30.0 && counts.iter().all(|&k| k == 25),
        format!("max relative L2 {worst:.2e} (<= 1e-3), {} images per scene, {secs:.1} s (< 30 s)", counts[0]),
    )
}

fn rt60_vs_eyring() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let air = AirAbsorption::default();
    // Long enough to hold the slowest decays in the alpha range.
    let cfg = SynthesisConfig {
        max_duration: 5.0,
        ..SynthesisConfig::default()
    };
    let (mut within, mut total) = (0, 0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..20 {
        let dims = random_dims(&mut rng);
        let alpha = rng.random_range(0.05..=0.4);
        let room = Room::uniform(dims, alpha).unwrap();
        let (s, m) = loop {
            let s = random_point(&mut rng, &dims);
            let m = random_point(&mut rng, &dims);
            let d: f64 = (0..3).map(|a| (s[a] - m[a]).powi(2)).sum::<f64>().sqrt();
            if d >= 1.0 {
                break (s, m);
            }
        };
        let rir = roomsim::synthesize_rir(&room, &Transducer::omni(s), &[Transducer::omni(m)], &cfg, &air).unwrap();
        let est = octave_band_rt60(&rir.channels[0], rir.fs).unwrap();
        let eyring = eyring_rt60_with_air(&room, &room.surfaces, &air).unwrap();
        for (t, e) in est.rt60.iter().zip(&eyring).skip(2) {
            let ratio = t / e;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            total += 1;
            if (ratio - 1.0).abs() <= 0.2 {
                within += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        within == total && secs < 300.0,
        format!(
            "{within}/{total} band estimates within 20 % of Eyring, simulated/Eyring in [{lo:.3}, {hi:.3}], {secs:.1} s (< 300 s)"
        ),
    )
}

fn inverse_distance() -> Outcome {
    let room = Room::uniform([10.0, 8.0, 4.0], 0.3).unwrap();
    let cfg = fixed(0, 0.05);
    let air = AirAbsorption::none();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let s = [rng.random_range(1.0..4.0), rng.random_range(1.0..7.0), rng.random_range(1.0..3.0)];
        let mics: Vec<Transducer> = [1.0, 2.0]
            .iter()
            .map(|r| Transducer::omni([s[0] + r, s[1], s[2]]))
            .collect();
        let rir = roomsim::synthesize_rir(&room, &Transducer::omni(s), &mics, &cfg, &air).unwrap();
        let ratio = dsp::upsampled_peak(&rir.channels[0], 8) / dsp::upsampled_peak(&rir.channels[1], 8);
        worst = worst.max((ratio / 2.0 - 1.0).abs());
    }
    outcome(worst <= 0.01, format!("peak ratio 1 m / 2 m deviates from 2 by at most {:.3} % (<= 1 %)", 100.0 * worst))
}

fn directivity_null() -> Outcome {
    let room = Room::uniform([7.0, 6.0, 3.0], 0.2).unwrap();
    let air = AirAbsorption::default();
    let s = [3.0, 3.0, 1.5];
    let m = [4.5, 3.5, 1.2];
    let away = Pose::new(s, Orientation::facing(&(Pose::at(s).pos() - Pose::at(m).pos())));
    let direct = fixed(0, 0.05);
    let mic = [Transducer::omni(m)];
    let cardioid = roomsim::synthesize_rir(
        &room,
        &Transducer::new(away, DirectivityPattern::analytic(0.5).unwrap()),
        &mic,
        &direct,
        &air,
    )
    .unwrap();
    let omni = roomsim::synthesize_rir(&room, &Transducer::new(away, DirectivityPattern::omni()), &mic, &direct, &air).unwrap();
    let ratio = dsp::energy(&cardioid.channels[0]) / dsp::energy(&omni.channels[0]);

    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let pose = Pose::new(s, random_orientation(&mut rng));
    let full = fixed(6, 0.3);
    let beta_one =
        roomsim::synthesize_rir(&room, &Transducer::new(pose, DirectivityPattern::analytic(1.0).unwrap()), &mic, &full, &air)
            .unwrap();
    let omni_full = roomsim::synthesize_rir(&room, &Transducer::new(pose, DirectivityPattern::omni()), &mic, &full, &air).unwrap();
    let identical = beta_one.channels == omni_full.channels;
    outcome(
        ratio <= 1e-4 && identical,
        format!("null energy ratio {ratio:.2e} (<= 1e-4), beta = 1 bit-identical to omni: {identical}"),
    )
}

fn constant_grid() -> MeasuredGrid {
    let azimuths: Vec<f64> = (0..36).map(|i| i as f64 * 10.0).collect();
    let elevations: Vec<f64> = (0..17).map(|i| -80.0 + i as f64 * 10.0).collect();
    let mut fir = vec![0.0; 16];
    fir[0] = 1.0;
    MeasuredGrid {
        name: "constant".into(),
        fs_hz: 16_000.0,
        fir_length: 16,
        responses: vec![vec![fir; azimuths.len()]; elevations.len()],
        azimuths_deg: azimuths,
        elevations_deg: elevations,
    }
}

fn measured_identity() -> Outcome {
    let grid = Arc::new(
        interpolate_grid(
            &constant_grid(),
            DEFAULT_SH_ORDER,
            DEFAULT_LAMBDA,
            DEFAULT_FIT_BINS,
            DEFAULT_FIBONACCI_POINTS,
        )
        .unwrap(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let air = AirAbsorption::default();
    let cfg = fixed(6, 0.3);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let dims = random_dims(&mut rng);
        let surfaces = std::array::from_fn(|_| {
            SurfaceProfile::new(std::array::from_fn(|_| rng.random_range(0.02..0.5))).unwrap()
        });
        let room = Room::new(dims, surfaces).unwrap();
        let sp = Pose::new(random_point(&mut rng, &dims), random_orientation(&mut rng));
        let mp = Pose::new(random_point(&mut rng, &dims), random_orientation(&mut rng));
        let measured = roomsim::synthesize_rir(
            &room,
            &Transducer::new(sp, DirectivityPattern::measured(grid.clone())),
            &[Transducer::new(mp, DirectivityPattern::measured(grid.clone()))],
            &cfg,
            &air,
        )
        .unwrap();
        let omni = roomsim::synthesize_rir(
            &room,
            &Transducer::new(sp, DirectivityPattern::omni()),
            &[Transducer::new(mp, DirectivityPattern::omni())],
            &cfg,
            &air,
        )
        .unwrap();
        worst = worst.max(rel_l2(&measured.channels[0], &omni.channels[0]));
    }
    outcome(worst <= 1e-6, format!("max relative L2 to omni {worst:.2e} (<= 1e-6)"))
}

fn partition_of_unity() -> Outcome {
    let fs = 16_000.0;
    let mut worst: f64 = 0.0;
    for n in [512usize, 16_000] {
        for k in 0..=n / 2 {
            let nu = band_weights(k as f64 * fs / n as f64);
            worst = worst.max((nu.iter().sum::<f64>() - 1.0).abs());
            assert!(nu.iter().all(|v| *v >= 0.0));
        }
    }
    let bank = band_filter_bank(256, fs).unwrap();
    let ones = interpolate_bands(&[1.0; N_BANDS], &bank);
    worst = worst.max(ones.iter().fold(0.0, |a, v| a.max((v - 1.0).abs())));
    outcome(worst <= 1e-9, format!("max |sum of band weights - 1| = {worst:.2e} (<= 1e-9)"))
}

fn minimum_phase_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let n = 1024;
    let taps = 256;
    let bank = band_filter_bank(n / 2, 16_000.0).unwrap();
    let (mut worst_db, mut worst_pre): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let profile = SurfaceProfile::new(std::array::from_fn(|_| rng.random_range(0.01..0.99))).unwrap();
        let mag = interpolate_bands(&profile.reflection(), &bank);
        let h = minimum_phase(&mag, taps).unwrap();
        let got: Vec<f64> = dsp::rfft(&h, n).iter().map(|c| c.norm()).collect();
        let peak = mag.iter().cloned().fold(0.0, f64::max);
        for (a, b) in mag.iter().zip(&got) {
            if *a > peak * 1e-3 {
                worst_db = worst_db.max((20.0 * (b / a).log10()).abs());
            }
        }
        // Energy arriving before the main tap.
        let main = h.iter().enumerate().fold(0, |best, (i, v)| if v.abs() > h[best].abs() { i } else { best });
        let pre: f64 = h[..main].iter().map(|v| v * v).sum::<f64>() / dsp::energy(&h);
        worst_pre = worst_pre.max(pre + 0.0);
    }
    let spec: Vec<f64> = dsp::rfft(&[1.0, 0.5], 512).iter().map(|c| c.norm()).collect();
    let pair = minimum_phase(&spec, 2).unwrap();
    let round_trip = (pair[0] - 1.0).abs().max((pair[1] - 0.5).abs());
    outcome(
        worst_pre == 0.0 && worst_db <= 0.5 && round_trip <= 1e-6,
        format!(
            "pre-ring energy {:.1e}, max magnitude error {worst_db:.3} dB (<= 0.5), [1, 0.5] round trip {round_trip:.1e} (<= 1e-6)",
            worst_pre.abs()
        ),
    )
}

fn direction(az_deg: f64, el_deg: f64) -> nalgebra::Vector3<f64> {
    let (az, el) = (az_deg.to_radians(), el_deg.to_radians());
    nalgebra::Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
}

fn sh_interpolation() -> Outcome {
    let order = DEFAULT_SH_ORDER;
    let n_coef = (order + 1) * (order + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let c0: Vec<f64> = (0..n_coef).map(|i| if i == 0 { 12.0 } else { rng.random_range(-0.3..0.3) }).collect();
    let c1: Vec<f64> = (0..n_coef).map(|_| rng.random_range(-0.3..0.3)).collect();
    let azimuths: Vec<f64> = (0..36).map(|i| i as f64 * 10.0).collect();
    let elevations: Vec<f64> = (0..17).map(|i| -80.0 + i as f64 * 10.0).collect();
    let mut nodes = Vec::new();
    let mut taps = Vec::new();
    let responses: Vec<Vec<Vec<f64>>> = elevations
        .iter()
        .map(|&el| {
            azimuths
                .iter()
                .map(|&az| {
                    let d = direction(az, el);
                    let y = real_sh(order, &d);
                    let g0: f64 = y.iter().zip(&c0).map(|(a, b)| a * b).sum();
                    let g1: f64 = y.iter().zip(&c1).map(|(a, b)| a * b).sum();
                    nodes.push(d);
                    taps.push((g0, g1));
                    let mut fir = vec![0.0; 8];
                    fir[0] = g0;
                    fir[1] = g1;
                    fir
                })
                .collect()
        })
        .collect();
    let grid = MeasuredGrid {
        name: "synthetic".into(),
        fs_hz: 16_000.0,
        azimuths_deg: azimuths,
        elevations_deg: elevations,
        fir_length: 8,
        responses,
    };
    let f_bins = 64;
    let sh = sh_fit(&grid, order, DEFAULT_LAMBDA, f_bins).unwrap();
    assert_eq!(sh.bulk_delay, 0);
    let (mut err, mut norm) = (0.0, 0.0);
    for (d, (g0, g1)) in nodes.iter().zip(&taps) {
        let fitted = sh.evaluate(d);
        for (k, f) in fitted.iter().enumerate() {
            let truth = *g0 + *g1 * Complex64::from_polar(1.0, -2.0 * PI * k as f64 / sh.n_fft as f64);
            err += (f - truth).norm_sqr();
            norm += truth.norm_sqr();
        }
    }
    let rms = (err / norm).sqrt();
    let weights = voronoi_weights(&nodes).unwrap();
    let area_err = (weights.iter().sum::<f64>() - 4.0 * PI).abs();
    outcome(
        rms <= 1e-4 && area_err <= 1e-6,
        format!("node relative RMS {rms:.2e} (<= 1e-4), Voronoi area error {area_err:.2e} (<= 1e-6)"),
    )
}

fn sampling_conformance() -> Outcome {
    const DRAWS: usize = 10_000;
    let table = MaterialTable::default();
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut problems = Vec::new();

    let naive_ok = (0..DRAWS).all(|_| {
        let w = sample_naive(&mut rng, &table);
        let a = w.profiles[0].alpha[0];
        (0.02..=0.5).contains(&a) && w.profiles.iter().all(|p| p.alpha.iter().all(|v| *v == a))
    });
    if !naive_ok {
        problems.push("naive alpha".to_string());
    }

    let mut counts = [0usize; 7];
    let mut rb_ok = true;
    for _ in 0..DRAWS {
        let w = sample_reflectivity_biased(&mut rng, &table);
        counts[w.reflective_count()] += 1;
        for (p, kind) in w.profiles.iter().zip(&w.kinds) {
            rb_ok &= match kind {
                SurfaceType::Reflective => {
                    p.alpha.iter().all(|v| (0.01..=0.12).contains(v) && *v == p.alpha[0])
                }
                SurfaceType::Uniform => false,
                k => {
                    let r = table.ranges(*k).unwrap();
                    p.alpha.iter().zip(r).all(|(v, r)| (r[0]..=r[1]).contains(v))
                }
            };
        }
    }
    if !rb_ok {
        problems.push("reflectivity-biased alpha".to_string());
    }
    let expected = DRAWS as f64 / 7.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p_value = 1.0 - ChiSquared::new(6.0).unwrap().cdf(chi2);
    if p_value <= 0.01 {
        problems.push(format!("reflective count p = {p_value:.4}"));
    }

    let configurations = [
        (DatasetId::D1, WallModel::Naive, SourceKind::Omni, MicKind::Omni),
        (DatasetId::D2, WallModel::ReflectivityBiased, SourceKind::Omni, MicKind::Omni),
        (DatasetId::D3, WallModel::ReflectivityBiased, SourceKind::Omni, MicKind::Measured),
        (DatasetId::D4, WallModel::ReflectivityBiased, SourceKind::Analytic, MicKind::Omni),
        (DatasetId::D5, WallModel::ReflectivityBiased, SourceKind::Measured, MicKind::Omni),
        (DatasetId::D6, WallModel::Naive, SourceKind::Measured, MicKind::Measured),
        (DatasetId::D7, WallModel::ReflectivityBiased, SourceKind::Measured, MicKind::Measured),
    ];
    let opts = SamplingOptions::default();
    let mut dims_ok = true;
    for i in 0..DRAWS {
        let (id, walls, src, mic) = configurations[i % 7];
        if id.triple() != (walls, src, mic) {
            problems.push(format!("{id} triple"));
            break;
        }
        let scene = sample_scene(id, &mut rng, &opts).unwrap();
        dims_ok &= (0..3).all(|a| (DIMS_LOW[a]..=DIMS_HIGH[a]).contains(&scene.room.dims[a]));
        let walls_match = match walls {
            WallModel::Naive => scene.wall_kinds.iter().all(|k| *k == SurfaceType::Uniform),
            WallModel::ReflectivityBiased => scene.wall_kinds.iter().all(|k| *k != SurfaceType::Uniform),
        };
        let src_match = match (&scene.source.pattern, src) {
            (PatternSpec::Omni, SourceKind::Omni) => true,
            (PatternSpec::Analytic { beta }, SourceKind::Analytic) => ANALYTIC_BETAS.contains(beta),
            (PatternSpec::Measured { grid }, SourceKind::Measured) => STANDIN_SOURCES.contains(&grid.as_str()),
            _ => false,
        };
        let mic_match = scene.mic_placements().iter().all(|p| match (&p.pattern, mic) {
            (PatternSpec::Omni, MicKind::Omni) => true,
            (PatternSpec::Measured { grid }, MicKind::Measured) => grid == STANDIN_MIC,
            _ => false,
        });
        if !(walls_match && src_match && mic_match && scene.validate().is_ok()) {
            problems.push(format!("{id} scene does not match its configuration"));
            break;
        }
    }
    if !dims_ok {
        problems.push("room dimensions".to_string());
    }
    outcome(
        problems.is_empty(),
        format!(
            "{DRAWS} draws each, reflective counts {counts:?}, chi-square p = {p_value:.3} (> 0.01){}",
            if problems.is_empty() { String::new() } else { format!("; failed: {}", problems.join(", ")) }
        ),
    )
}

fn tree_bytes(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let key = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(key, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("dry.wav");
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let dry: Vec<f64> = (0..8000).map(|i| (i as f64 * 0.07).sin() * 0.3 + rng.random_range(-0.1..0.1)).collect();
    roomsim::io::write_wav_f32(&corpus, &[dry], 16_000).unwrap();

    let run = |name: &str, jobs: usize| {
        let mut spec = DatasetSpec::new(DatasetId::D7, 4, tmp.path().join(name), 77);
        spec.dry_corpus = Some(corpus.clone());
        spec.validation_fraction = 0.25;
        spec.synthesis.max_duration = 0.3;
        spec.noise.white_snr_db = Some(25.0);
        spec.noise.diffuse_snr_db = Some(15.0);
        generate_dataset(&spec, jobs).unwrap();
        tree_bytes(&tmp.path().join(name))
    };
    let a = run("a", 1);
    let b = run("b", 1);
    let c = run("c", 4);
    let wavs = a.keys().filter(|k| k.ends_with(".wav")).count();
    let same = a == b && a == c;
    outcome(
        same && wavs > 0 && a.contains_key("manifest.json"),
        format!("{} files ({wavs} WAV) identical across two runs and jobs 1 vs 4: {same}", a.len()),
    )
}

/// Delay beyond `bulk` samples from the slope of the unwrapped phase over
/// the lower half of the band.
fn phase_slope_delay(h: &[f64], bulk: f64) -> f64 {
    let n = h.len();
    let spec: Vec<Complex64> = dsp::rfft(h, n)
        .iter()
        .enumerate()
        .map(|(k, c)| c * Complex64::from_polar(1.0, 2.0 * PI * k as f64 * bulk / n as f64))
        .collect();
    let upper = n / 4;
    let mut phase = Vec::with_capacity(upper);
    let mut prev = 0.0;
    let mut offset = 0.0;
    for (k, c) in spec.iter().enumerate().take(upper + 1).skip(1) {
        let mut p = c.arg() + offset;
        while p - prev > PI {
            p -= 2.0 * PI;
            offset -= 2.0 * PI;
        }
        while prev - p > PI {
            p += 2.0 * PI;
            offset += 2.0 * PI;
        }
        phase.push((k as f64, p));
        prev = p;
    }
    let m = phase.len() as f64;
    let mx = phase.iter().map(|p| p.0).sum::<f64>() / m;
    let my = phase.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = phase.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = phase.iter().map(|p| (p.0 - mx).powi(2)).sum();
    -(sxy / sxx) * n as f64 / (2.0 * PI)
}

fn fractional_delay() -> Outcome {
    let f = 256;
    let ones = vec![1.0; f + 1];
    let unit = vec![Complex64::new(1.0, 0.0); f + 1];
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let frac = rng.random_range(0.0..1.0);
        let h = image_source_kernel(frac, &ones, &unit, &unit, 1.0, f).unwrap();
        let est = phase_slope_delay(&h, f as f64);
        worst = worst.max((est - frac).abs());
    }
    outcome(worst <= 0.05, format!("max delay error {worst:.2e} samples over 100 fractions (<= 0.05)"))
}

fn reciprocity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1212);
    let air = AirAbsorption::none();
    let cfg = fixed(10, 0.4);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let dims = random_dims(&mut rng);
        let surfaces = std::array::from_fn(|_| SurfaceProfile::flat(rng.random_range(0.02..0.5)).unwrap());
        let room = Room::new(dims, surfaces).unwrap();
        let a = random_point(&mut rng, &dims);
        let b = random_point(&mut rng, &dims);
        let ab = roomsim::synthesize_rir(&room, &Transducer::omni(a), &[Transducer::omni(b)], &cfg, &air).unwrap();
        let ba = roomsim::synthesize_rir(&room, &Transducer::omni(b), &[Transducer::omni(a)], &cfg, &air).unwrap();
        worst = worst.max(rel_l2(&ab.channels[0], &ba.channels[0]));
    }
    outcome(worst <= 1e-6, format!("max relative L2 between swapped responses {worst:.2e} (<= 1e-6)"))
}

fn throughput() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let spec = DatasetSpec::new(DatasetId::D7, 50, tmp.path().join("d7"), 2021);
    let start = Instant::now();
    let manifest = generate_dataset(&spec, 1).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let ok = manifest.ok_rooms().count();
    let rirs: usize = manifest.rooms.iter().map(|r| r.rirs.len()).sum();
    outcome(
        secs < 600.0 && ok == 50 && rirs == 150,
        format!("{ok}/50 rooms, {rirs} two-channel RIRs in {secs:.0} s single-threaded (< 600 s)"),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 13] = [
    (1, "dense oracle", dense_oracle),
    (2, "RT60 against Eyring", rt60_vs_eyring),
    (3, "inverse distance", inverse_distance),
    (4, "directivity null", directivity_null),
    (5, "measured identity", measured_identity),
    (6, "partition of unity", partition_of_unity),
    (7, "minimum phase", minimum_phase_check),
    (8, "spherical harmonic fit", sh_interpolation),
    (9, "sampling conformance", sampling_conformance),
    (10, "determinism", determinism),
    (11, "fractional delay", fractional_delay),
    (12, "reciprocity", reciprocity),
    (13, "throughput", throughput),
];

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, name, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let result = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!("{} {n:>2} {name}: {}", if result.pass { "PASS" } else { "FAIL" }, result.detail);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
