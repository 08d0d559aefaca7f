//! `roomsim`: batch front end for simulation, dataset generation, analysis
//! and directivity processing.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use roomsim::analysis::{energy_decay_curve, rt60_from_edc, split_bands, DecayFit, RELIABLE_FROM_HZ};
use roomsim::dataset::{generate_dataset, DatasetId, DatasetSpec, MANIFEST_NAME};
use roomsim::directivity::{
    interpolate_grid, standin_grid, standin_names, MeasuredGrid, DEFAULT_FIBONACCI_POINTS, DEFAULT_FIT_BINS,
    DEFAULT_LAMBDA, DEFAULT_SH_ORDER,
};
use roomsim::geometry::unit_from_angles;
use roomsim::materials::BANDS;
use roomsim::synthesis::{sidecar_path, write_rir};
use roomsim::{Error, ErrorKind, MaxOrder, SceneDescription};

const CONFIG_DIR_ENV: &str = "ROOMSIM_CONFIG_DIR";

#[derive(Parser)]
#[command(name = "roomsim", version, about = "Image-source room impulse response simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the impulse responses of one scene.
    Simulate {
        /// Scene description (JSON).
        config: PathBuf,
        /// Output WAV; a JSON sidecar is written next to it.
        #[arg(long)]
        out: PathBuf,
        /// Reflection order, or "dynamic".
        #[arg(long)]
        max_order: Option<MaxOrder>,
        #[arg(long)]
        fs: Option<f64>,
    },
    /// Generate a dataset from a dataset spec (JSON).
    Dataset {
        spec: PathBuf,
        #[arg(long, value_parser = parse_dataset_id)]
        dataset: Option<DatasetId>,
        #[arg(long)]
        n_rooms: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Room-level worker threads; 0 uses every core.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory, overriding the spec.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report decay times of a WAV impulse response.
    Analyze {
        wav: PathBuf,
        /// Include per-octave-band RT60.
        #[arg(long)]
        bands: bool,
        /// Room dimensions in metres, for volume and surface labels.
        #[arg(long, num_args = 3, value_names = ["LX", "LY", "LZ"])]
        dims: Option<Vec<f64>>,
        /// Write the energy decay curves as CSV.
        #[arg(long)]
        edc_csv: Option<PathBuf>,
    },
    /// Fit a measured directivity grid and resample or probe it.
    Directivity {
        /// Measured-grid JSON file or a built-in stand-in name.
        grid: String,
        /// Number of Fibonacci points to resample onto.
        #[arg(long, default_value_t = DEFAULT_FIBONACCI_POINTS)]
        interpolate: usize,
        /// Write the interpolated grid here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Azimuth and elevation in degrees, frequency in Hz.
        #[arg(long, num_args = 3, value_names = ["AZ", "EL", "F"], allow_negative_numbers = true)]
        probe: Option<Vec<f64>>,
        #[arg(long, default_value_t = DEFAULT_SH_ORDER)]
        sh_order: usize,
    },
}

fn parse_dataset_id(s: &str) -> Result<DatasetId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 3,
        ErrorKind::Geometry => 4,
        ErrorKind::Numeric => 5,
        ErrorKind::Io => 6,
    }
}

/// Relative paths missing from the working directory are looked up in the
/// configuration directory named by `ROOMSIM_CONFIG_DIR`.
fn locate(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(dir) = std::env::var_os(CONFIG_DIR_ENV) {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    path.to_path_buf()
}

fn print_json<T: Serialize>(value: &T) -> roomsim::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn simulate(config: &Path, out: &Path, max_order: Option<MaxOrder>, fs: Option<f64>) -> roomsim::Result<()> {
    let config = locate(config);
    let mut scene = SceneDescription::load(&config)?;
    if let Some(n) = max_order {
        scene.synthesis.max_order = n;
    }
    if let Some(fs) = fs {
        scene.synthesis.fs = fs;
    }
    let rir = scene.synthesize(config.parent())?;
    write_rir(out, &rir, &scene.synthesis)?;
    print_json(&json!({
        "scene_hash": rir.scene_ref,
        "wav": out,
        "sidecar": sidecar_path(out),
        "channels": rir.channels.len(),
        "samples": rir.n_samples(),
        "fs": rir.fs,
        "max_order": rir.max_order,
    }))
}

fn dataset(
    spec: &Path,
    id: Option<DatasetId>,
    n_rooms: Option<usize>,
    seed: Option<u64>,
    jobs: usize,
    out: Option<PathBuf>,
) -> roomsim::Result<()> {
    let mut spec = DatasetSpec::load(&locate(spec))?;
    if let Some(id) = id {
        spec.dataset = id;
    }
    if let Some(n) = n_rooms {
        spec.n_rooms = n;
    }
    if let Some(s) = seed {
        spec.seed = s;
    }
    if let Some(o) = out {
        spec.output_dir = std::path::absolute(&o).map_err(|e| Error::Io { path: o, source: e })?;
    }
    let manifest = generate_dataset(&spec, jobs)?;
    let failed: Vec<_> = manifest
        .rooms
        .iter()
        .filter_map(|r| r.error.as_ref().map(|e| json!({"split": r.split, "index": r.index, "error": e})))
        .collect();
    print_json(&json!({
        "manifest": spec.output_path().join(MANIFEST_NAME),
        "dataset": manifest.dataset,
        "rooms": manifest.rooms.len(),
        "failed": failed,
    }))
}

fn analyze(wav: &Path, bands: bool, dims: Option<Vec<f64>>, edc_csv: Option<PathBuf>) -> roomsim::Result<()> {
    let data = roomsim::io::read_wav(wav)?;
    let fs = data.fs as f64;
    let mut channels = Vec::new();
    let mut curves = Vec::new();
    for (c, x) in data.channels.iter().enumerate() {
        let edc = energy_decay_curve(x, fs)?;
        let broadband = rt60_from_edc(&edc, DecayFit::T30);
        let mut report = json!({
            "channel": c,
            "rt60": broadband.as_ref().ok().map(|e| e.seconds),
            "fit": broadband.as_ref().ok().map(|e| e.fit),
        });
        if let Err(e) = &broadband {
            report["error"] = json!(e.to_string());
        }
        if bands {
            report["bands"] = band_report(x, fs);
        }
        channels.push(report);
        curves.push(edc.values);
    }
    let mut report = json!({ "file": wav, "fs": fs, "channels": channels });
    if let Some(d) = dims {
        let room = roomsim::Room::uniform([d[0], d[1], d[2]], 0.0)?;
        report["volume"] = json!(room.volume());
        report["surface"] = json!(room.surface_area());
    }
    if let Some(path) = edc_csv {
        roomsim::io::write_atomic(&path, edc_csv_text(&curves, fs).as_bytes())?;
        report["edc_csv"] = json!(path);
    }
    print_json(&report)
}

/// Per-band estimates; a band whose decay cannot be fitted reports its
/// error instead of failing the whole report.
fn band_report(x: &[f64], fs: f64) -> serde_json::Value {
    let mut out = Vec::new();
    for (b, band) in split_bands(x, fs).iter().enumerate() {
        let est = energy_decay_curve(band, fs).and_then(|edc| rt60_from_edc(&edc, DecayFit::T30));
        let mut v = json!({
            "hz": BANDS[b],
            "rt60": est.as_ref().ok().map(|e| e.seconds),
            "fit": est.as_ref().ok().map(|e| e.fit),
            "reliable": BANDS[b] >= RELIABLE_FROM_HZ,
        });
        if let Err(e) = est {
            v["error"] = json!(e.to_string());
        }
        out.push(v);
    }
    json!(out)
}

fn edc_csv_text(curves: &[Vec<f64>], fs: f64) -> String {
    let mut text = String::from("time_s");
    for c in 0..curves.len() {
        text.push_str(&format!(",ch{c}_db"));
    }
    text.push('\n');
    let n = curves.iter().map(Vec::len).max().unwrap_or(0);
    for i in 0..n {
        text.push_str(&format!("{}", i as f64 / fs));
        for c in curves {
            text.push_str(&format!(",{}", c[i]));
        }
        text.push('\n');
    }
    text
}

fn load_grid(name: &str) -> roomsim::Result<MeasuredGrid> {
    let path = locate(Path::new(name));
    if !path.exists() && standin_names().contains(&name) {
        return standin_grid(name);
    }
    MeasuredGrid::load(&path)
}

fn directivity(
    grid: &str,
    n_points: usize,
    out: Option<PathBuf>,
    probe: Option<Vec<f64>>,
    sh_order: usize,
) -> roomsim::Result<()> {
    let measured = load_grid(grid)?;
    let interp = interpolate_grid(&measured, sh_order, DEFAULT_LAMBDA, DEFAULT_FIT_BINS, n_points)?;
    let mut report = json!({
        "grid": measured.name,
        "nodes": measured.n_nodes(),
        "points": interp.points().len(),
        "bins": interp.n_bins(),
        "fs": interp.fs,
    });
    if let Some(path) = out {
        roomsim::io::write_atomic(&path, interp.to_json()?.as_bytes())?;
        report["out"] = json!(path);
    }
    if let Some(p) = probe {
        let (az, el, f) = (p[0], p[1], p[2]);
        if !(0.0..=interp.fs / 2.0).contains(&f) || !(-90.0..=90.0).contains(&el) {
            return Err(Error::Domain(format!("probe ({az}, {el}, {f}) out of range")));
        }
        let dir = unit_from_angles(az.to_radians(), el.to_radians());
        let bin = (f / interp.fs * interp.n_fft as f64).round() as usize;
        let g = interp.gains[interp.nearest(&dir)][bin];
        report["probe"] = json!({
            "azimuth_deg": az,
            "elevation_deg": el,
            "frequency_hz": f,
            "bin_hz": bin as f64 * interp.fs / interp.n_fft as f64,
            "re": g.re,
            "im": g.im,
            "magnitude": g.norm(),
        });
    }
    print_json(&report)
}

fn run(cli: Cli) -> roomsim::Result<()> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            max_order,
            fs,
        } => simulate(&config, &out, max_order, fs),
        Command::Dataset {
            spec,
            dataset: id,
            n_rooms,
            seed,
            jobs,
            out,
        } => dataset(&spec, id, n_rooms, seed, jobs, out),
        Command::Analyze {
            wav,
            bands,
            dims,
            edc_csv,
        } => analyze(&wav, bands, dims, edc_csv),
        Command::Directivity {
            grid,
            interpolate,
            out,
            probe,
            sh_order,
        } => directivity(&grid, interpolate, out, probe, sh_order),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    // Only `dataset --jobs` runs in parallel; it builds its own pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(1).build_global();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
