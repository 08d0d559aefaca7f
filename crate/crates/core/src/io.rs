//! File output helpers: atomic writes and WAV encoding.

use std::fs;
use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

fn temp_path(path: &Path) -> PathBuf {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp{}", std::process::id()))
}

/// Write `bytes` to a sibling temporary file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let tmp = temp_path(path);
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

/// 32-bit float WAV bytes, channels interleaved.
pub fn encode_wav_f32(channels: &[Vec<f64>], fs: u32) -> Result<Vec<u8>> {
    if channels.is_empty() {
        return Err(Error::Config("cannot write a WAV file with no channels".into()));
    }
    let len = channels[0].len();
    if let Some(c) = channels.iter().find(|c| c.len() != len) {
        return Err(Error::Shape {
            expected: len,
            got: c.len(),
        });
    }
    let spec = hound::WavSpec {
        channels: channels.len() as u16,
        sample_rate: fs,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut cursor = Cursor::new(Vec::new());
    let wav_err = |e| Error::Wav {
        path: PathBuf::from("<memory>"),
        source: e,
    };
    {
        let mut w = hound::WavWriter::new(&mut cursor, spec).map_err(wav_err)?;
        for i in 0..len {
            for c in channels {
                w.write_sample(c[i] as f32).map_err(wav_err)?;
            }
        }
        w.finalize().map_err(wav_err)?;
    }
    Ok(cursor.into_inner())
}

pub fn write_wav_f32(path: &Path, channels: &[Vec<f64>], fs: u32) -> Result<()> {
    write_atomic(path, &encode_wav_f32(channels, fs)?)
}

/// Decoded WAV contents, one vector per channel, with integer formats scaled
/// to [-1, 1).
#[derive(Debug, Clone)]
pub struct WavData {
    pub fs: u32,
    pub channels: Vec<Vec<f64>>,
}

pub fn read_wav(path: &Path) -> Result<WavData> {
    let wav_err = |e| Error::Wav {
        path: path.to_path_buf(),
        source: e,
    };
    let mut r = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = r.spec();
    let n_ch = spec.channels as usize;
    if n_ch == 0 {
        return Err(Error::Config(format!("{path:?} has no channels")));
    }
    let interleaved: Vec<f64> = match spec.sample_format {
        hound::SampleFormat::Float => r
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(wav_err)?,
        hound::SampleFormat::Int => {
            let scale = 2f64.powi(spec.bits_per_sample as i32 - 1);
            r.samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(wav_err)?
        }
    };
    let mut channels = vec![Vec::with_capacity(interleaved.len() / n_ch); n_ch];
    for (i, v) in interleaved.into_iter().enumerate() {
        channels[i % n_ch].push(v);
    }
    Ok(WavData {
        fs: spec.sample_rate,
        channels,
    })
}
