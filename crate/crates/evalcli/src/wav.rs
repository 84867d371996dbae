//! RIFF WAV reading/writing: PCM 16-bit and IEEE float 32-bit, little-endian.
//! Multichannel inputs are mixed down to mono by averaging (with a warning).

use std::path::Path;

use hound::{SampleFormat, WavSpec};
use tfrestore::frames::Signal;

use crate::{CliError, Result};

/// Container metadata kept alongside the decoded mono signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavMeta {
    pub channels: u16,
    pub bits_per_sample: u16,
    pub float: bool,
}

pub fn read_wav(path: &Path) -> Result<(Signal<f64>, WavMeta)> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    let meta = WavMeta {
        channels: spec.channels,
        bits_per_sample: spec.bits_per_sample,
        float: spec.sample_format == SampleFormat::Float,
    };
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(CliError::input("wav file reports zero channels"));
    }
    let mono: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => {
            let raw: std::result::Result<Vec<i16>, _> = reader.samples::<i16>().collect();
            mixdown(&raw?.iter().map(|&v| v as f64 / 32768.0).collect::<Vec<_>>(), channels)
        }
        (SampleFormat::Float, 32) => {
            let raw: std::result::Result<Vec<f32>, _> = reader.samples::<f32>().collect();
            mixdown(&raw?.iter().map(|&v| v as f64).collect::<Vec<_>>(), channels)
        }
        (fmt, bits) => {
            return Err(CliError::input(format!(
                "unsupported wav format: {bits}-bit {fmt:?} (supported: PCM16, float32)"
            )));
        }
    };
    if channels > 1 {
        eprintln!(
            "warning: {} channels mixed down to mono by averaging",
            spec.channels
        );
    }
    if mono.is_empty() {
        return Err(CliError::input("wav file contains no samples"));
    }
    Ok((Signal::new(mono, spec.sample_rate)?, meta))
}

fn mixdown(interleaved: &[f64], channels: usize) -> Vec<f64> {
    if channels == 1 {
        return interleaved.to_vec();
    }
    interleaved
        .chunks_exact(channels)
        .map(|frame| frame.iter().sum::<f64>() / channels as f64)
        .collect()
}

/// Write a mono float32 WAV (the lossless container for restored signals).
pub fn write_wav(path: &Path, signal: &Signal<f64>) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: signal.sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &v in &signal.samples {
        writer.write_sample(v as f32)?;
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn float_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let sig = Signal::new(
            (0..64).map(|t| (t as f64 / 10.0).sin() * 0.5).collect(),
            16000,
        )
        .unwrap();
        write_wav(&path, &sig).unwrap();
        let (back, meta) = read_wav(&path).unwrap();
        assert_eq!(meta.channels, 1);
        assert!(meta.float);
        assert_eq!(back.sample_rate, 16000);
        for (a, b) in sig.samples.iter().zip(&back.samples) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn pcm16_stereo_mixdown() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: 8000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        for t in 0..32 {
            w.write_sample((t * 100) as i16).unwrap();
            w.write_sample(-(t * 100) as i16).unwrap();
        }
        w.finalize().unwrap();
        let (sig, meta) = read_wav(&path).unwrap();
        assert_eq!(meta.channels, 2);
        assert_eq!(sig.len(), 32);
        // symmetric channels cancel in the average
        assert!(sig.samples.iter().all(|v| v.abs() < 1e-9));
    }
}
