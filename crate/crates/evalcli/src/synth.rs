//! Synthetic test-signal generator: sums of sinusoids aligned to DFT bins of
//! a reference frame length, the corpus used by the acceptance tests.

use tfrestore::frames::Signal;

use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    /// DFT bin of the reference frame length.
    pub bin: usize,
    pub amplitude: f64,
    pub phase: f64,
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub atoms: Vec<Atom>,
    pub duration_secs: f64,
    pub sample_rate: u32,
    /// Frame length the bins refer to.
    pub frame_len: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec { atoms: Vec::new(), duration_secs: 1.0, sample_rate: 16000, frame_len: 1024 }
    }
}

/// Generate the signal: x(t) = sum_k a_k cos(2 pi bin_k t / L + phi_k).
pub fn synth_signal(spec: &SynthSpec) -> Result<Signal<f64>> {
    if spec.frame_len == 0 {
        return Err(CliError::input("frame_len must be positive"));
    }
    for atom in &spec.atoms {
        if atom.bin >= spec.frame_len / 2 {
            return Err(CliError::input(format!(
                "bin {} not below L/2 = {}",
                atom.bin,
                spec.frame_len / 2
            )));
        }
    }
    let len = (spec.duration_secs * spec.sample_rate as f64).round() as usize;
    if len == 0 {
        return Err(CliError::input("duration too short"));
    }
    let l = spec.frame_len as f64;
    let samples = (0..len)
        .map(|t| {
            spec.atoms
                .iter()
                .map(|a| {
                    a.amplitude
                        * (2.0 * std::f64::consts::PI * a.bin as f64 * t as f64 / l + a.phase)
                            .cos()
                })
                .sum()
        })
        .collect();
    Ok(Signal::new(samples, spec.sample_rate)?)
}

/// Parse a spec file: key = value lines (`duration`, `rate`, `frame_len`)
/// plus one `atom = bin,amplitude,phase` line per atom.
pub fn parse_synth_spec(text: &str) -> Result<SynthSpec> {
    let mut spec = SynthSpec::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::input(format!("line {}: expected key = value", i + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = |what: &str| CliError::input(format!("line {}: bad {what} '{value}'", i + 1));
        match key {
            "duration" => spec.duration_secs = value.parse().map_err(|_| bad("duration"))?,
            "rate" => spec.sample_rate = value.parse().map_err(|_| bad("rate"))?,
            "frame_len" => spec.frame_len = value.parse().map_err(|_| bad("frame_len"))?,
            "atom" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(bad("atom (want bin,amplitude,phase)"));
                }
                spec.atoms.push(Atom {
                    bin: parts[0].parse().map_err(|_| bad("atom bin"))?,
                    amplitude: parts[1].parse().map_err(|_| bad("atom amplitude"))?,
                    phase: parts[2].parse().map_err(|_| bad("atom phase"))?,
                });
            }
            other => return Err(CliError::input(format!("line {}: unknown key '{other}'", i + 1))),
        }
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use tfrestore::transforms::{AnalysisLike, AnalysisOperator};

    #[test]
    fn zero_atoms_is_silence() {
        let spec = SynthSpec { duration_secs: 0.01, ..Default::default() };
        let s = synth_signal(&spec).unwrap();
        assert!(s.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_atom_rms() {
        let spec = SynthSpec {
            atoms: vec![Atom { bin: 16, amplitude: 1.0, phase: 0.3 }],
            duration_secs: 1.0,
            ..Default::default()
        };
        let s = synth_signal(&spec).unwrap();
        let rms = (s.samples.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt();
        assert!((rms - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3);
    }

    #[test]
    fn three_atoms_are_frame_sparse() {
        let l = 1024;
        let spec = SynthSpec {
            atoms: vec![
                Atom { bin: 10, amplitude: 0.4, phase: 0.0 },
                Atom { bin: 100, amplitude: 0.3, phase: 1.0 },
                Atom { bin: 333, amplitude: 0.2, phase: 2.0 },
            ],
            duration_secs: 0.25,
            frame_len: l,
            ..Default::default()
        };
        let s = synth_signal(&spec).unwrap();
        // one rectangular frame: exactly 6 nonzero bins (conjugate pairs)
        let op = AnalysisOperator::<f64>::new(l, 1).unwrap();
        let frame = Array2::from_shape_vec((l, 1), s.samples[..l].to_vec()).unwrap();
        let coeffs = op.op_apply(&frame);
        let nonzero = coeffs.iter().filter(|c| c.norm() > 1e-8).count();
        assert_eq!(nonzero, 6);
    }

    #[test]
    fn spec_parsing() {
        let spec = parse_synth_spec(
            "# corpus entry\nduration = 0.5\nrate = 16000\nframe_len = 512\natom = 3, 0.5, 0.1\natom = 40, 0.2, 1.2\n",
        )
        .unwrap();
        assert_eq!(spec.atoms.len(), 2);
        assert_eq!(spec.frame_len, 512);
        assert_eq!(spec.atoms[1].bin, 40);
        assert!(parse_synth_spec("atom = 1,2\n").is_err());
        assert!(parse_synth_spec("nope = 1\n").is_err());
        // bin out of range caught at synthesis time
        let bad = SynthSpec {
            atoms: vec![Atom { bin: 600, amplitude: 1.0, phase: 0.0 }],
            frame_len: 1024,
            ..Default::default()
        };
        assert!(synth_signal(&bad).is_err());
    }
}
