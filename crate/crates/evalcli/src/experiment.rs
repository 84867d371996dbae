//! Sweep runner: degrade -> restore -> score over a grid of files and
//! degradation levels, emitting a deterministic CSV report.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use tfrestore::frames::Signal;
use tfrestore::restoration::{
    apply_declip_config, apply_denoise_config, declip, denoise, DeclipConfig, DenoiseConfig,
    Flavor, Model,
};

use crate::degrade::{add_noise, clip_to_sdr};
use crate::metrics::ratio_db_trimmed;
use crate::synth::{parse_synth_spec, synth_signal};
use crate::wav::read_wav;
use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Denoise,
    Declip,
}

impl TaskKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "denoise" => Ok(TaskKind::Denoise),
            "declip" => Ok(TaskKind::Declip),
            other => Err(CliError::input(format!("unknown task '{other}'"))),
        }
    }
}

/// Parsed sweep description.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub task: TaskKind,
    pub flavor: Flavor,
    pub model: Model,
    pub seed: u64,
    pub files: Vec<String>,
    /// Degradation levels: target input SNR (denoise) or SDR (declip), dB.
    pub levels: Vec<f64>,
    /// `cfg.* = value` overrides, forwarded to the config parser.
    pub overrides: String,
    /// Include wall-clock columns (breaks byte-for-byte determinism).
    pub timing: bool,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest {
            task: TaskKind::Denoise,
            flavor: Flavor::Plain,
            model: Model::Analysis,
            seed: 0,
            files: Vec::new(),
            levels: Vec::new(),
            overrides: String::new(),
            timing: false,
        }
    }
}

/// Manifest format: `key = value` lines. `file` and `level` repeat; `levels`
/// accepts a comma list; `cfg.<key> = value` forwards restoration config
/// overrides.
pub fn parse_manifest(text: &str) -> Result<Manifest> {
    let mut m = Manifest::default();
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
        if let Some(cfg_key) = key.strip_prefix("cfg.") {
            m.overrides.push_str(&format!("{cfg_key} = {value}\n"));
            continue;
        }
        match key {
            "task" => m.task = TaskKind::parse(value)?,
            "flavor" => m.flavor = Flavor::parse(value).map_err(CliError::Core)?,
            "model" => m.model = Model::parse(value).map_err(CliError::Core)?,
            "seed" => m.seed = value.parse().map_err(|_| bad("seed"))?,
            "file" => m.files.push(value.to_string()),
            "level" => m.levels.push(value.parse().map_err(|_| bad("level"))?),
            "levels" => {
                for part in value.split(',') {
                    m.levels.push(part.trim().parse().map_err(|_| bad("levels"))?);
                }
            }
            "timing" => m.timing = value.parse().map_err(|_| bad("timing"))?,
            other => {
                return Err(CliError::input(format!("line {}: unknown key '{other}'", i + 1)))
            }
        }
    }
    Ok(m)
}

fn load_input(base: &Path, name: &str) -> Result<Signal<f64>> {
    let path: PathBuf = if Path::new(name).is_absolute() {
        PathBuf::from(name)
    } else {
        base.join(name)
    };
    if path.extension().and_then(|e| e.to_str()) == Some("spec") {
        let text = std::fs::read_to_string(&path)?;
        synth_signal(&parse_synth_spec(&text)?)
    } else {
        Ok(read_wav(&path)?.0)
    }
}

struct RowResult {
    input_db: f64,
    output_db: f64,
    runtime_ratio: f64,
}

fn run_row(
    manifest: &Manifest,
    base: &Path,
    file: &str,
    level: f64,
    seed: u64,
) -> Result<RowResult> {
    let x = load_input(base, file)?;
    let started = Instant::now();
    let (reference, degraded, restored, frame_len) = match manifest.task {
        TaskKind::Denoise => {
            let (y, sigma) = add_noise(&x, Some(level), seed)?;
            let mut cfg = DenoiseConfig::<f64>::music(sigma);
            cfg.flavor = manifest.flavor;
            cfg.model = manifest.model;
            apply_denoise_config(&mut cfg, &manifest.overrides).map_err(CliError::Core)?;
            let out = denoise(&y, &cfg).map_err(CliError::Core)?;
            (x, y, out, cfg.frame_len)
        }
        TaskKind::Declip => {
            let peak = x.samples.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
            if peak <= 0.0 {
                return Err(CliError::input("zero signal"));
            }
            let normalized =
                Signal::new(x.samples.iter().map(|v| v / peak).collect(), x.sample_rate)
                    .map_err(CliError::Core)?;
            let (y, tau) = clip_to_sdr(&normalized, level, 0.1)?;
            let mut cfg = DeclipConfig::<f64>::music(tau);
            cfg.flavor = manifest.flavor;
            cfg.model = manifest.model;
            apply_declip_config(&mut cfg, &manifest.overrides).map_err(CliError::Core)?;
            let out = declip(&y, &cfg).map_err(CliError::Core)?;
            (normalized, y, out, cfg.frame_len)
        }
    };
    let elapsed = started.elapsed().as_secs_f64();
    let duration = reference.len() as f64 / reference.sample_rate as f64;
    Ok(RowResult {
        input_db: ratio_db_trimmed(&reference, &degraded, frame_len)?,
        output_db: ratio_db_trimmed(&reference, &restored, frame_len)?,
        runtime_ratio: elapsed / duration,
    })
}

/// Run the sweep and return the CSV report. Rows that fail record the error
/// and the run continues.
pub fn run_experiment(manifest: &Manifest, base: &Path) -> Result<String> {
    let metric_name = match manifest.task {
        TaskKind::Denoise => "snr",
        TaskKind::Declip => "sdr",
    };
    let grid: Vec<(usize, usize)> = (0..manifest.files.len())
        .flat_map(|f| (0..manifest.levels.len()).map(move |l| (f, l)))
        .collect();
    let rows: Vec<(usize, usize, std::result::Result<RowResult, String>)> = grid
        .par_iter()
        .map(|&(fi, li)| {
            let seed = manifest
                .seed
                .wrapping_add((fi * manifest.levels.len() + li) as u64);
            let r = run_row(manifest, base, &manifest.files[fi], manifest.levels[li], seed)
                .map_err(|e| e.to_string());
            (fi, li, r)
        })
        .collect();

    let mut csv = String::new();
    csv.push_str("# sdr is the simplified no-gain-ambiguity energy ratio\n");
    csv.push_str("# metrics skip the first and last frame_len samples (overlap-add edges)\n");
    csv.push_str("file,level_db,task,flavor,model,metric,input_db,output_db,delta_db");
    if manifest.timing {
        csv.push_str(",runtime_ratio");
    }
    csv.push_str(",error\n");

    let task_s = match manifest.task {
        TaskKind::Denoise => "denoise",
        TaskKind::Declip => "declip",
    };
    let flavor_s = match manifest.flavor {
        Flavor::Plain => "plain",
        Flavor::Social => "social",
    };
    let model_s = match manifest.model {
        Model::Analysis => "analysis",
        Model::Synthesis => "synthesis",
    };

    // per-level aggregation over successful rows
    let mut per_level: Vec<Vec<f64>> = vec![Vec::new(); manifest.levels.len()];
    for (fi, li, result) in &rows {
        let file = &manifest.files[*fi];
        let level = manifest.levels[*li];
        match result {
            Ok(r) => {
                csv.push_str(&format!(
                    "{file},{level:.4},{task_s},{flavor_s},{model_s},{metric_name},{:.4},{:.4},{:.4}",
                    r.input_db,
                    r.output_db,
                    r.output_db - r.input_db
                ));
                if manifest.timing {
                    csv.push_str(&format!(",{:.3}", r.runtime_ratio));
                }
                csv.push_str(",\n");
                per_level[*li].push(r.output_db - r.input_db);
            }
            Err(msg) => {
                csv.push_str(&format!(
                    "{file},{level:.4},{task_s},{flavor_s},{model_s},{metric_name},,,"
                ));
                if manifest.timing {
                    csv.push(',');
                }
                csv.push_str(&format!(",{}\n", msg.replace(',', ";")));
            }
        }
    }
    for (li, deltas) in per_level.iter().enumerate() {
        if deltas.is_empty() {
            continue;
        }
        let level = manifest.levels[li];
        let n = deltas.len() as f64;
        let mean = deltas.iter().sum::<f64>() / n;
        let var = deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
        for (tag, value) in [("mean", mean), ("std", var.sqrt())] {
            csv.push_str(&format!(
                "{tag},{level:.4},{task_s},{flavor_s},{model_s},{metric_name},,,{value:.4}"
            ));
            if manifest.timing {
                csv.push(',');
            }
            csv.push_str(",\n");
        }
    }
    Ok(csv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use tempfile::tempdir;

    fn write_spec(dir: &Path, name: &str, body: &str) {
        let mut f = std::fs::File::create(dir.join(name)).unwrap();
        f.write_all(body.as_bytes()).unwrap();
    }

    #[test]
    fn manifest_parsing() {
        let m = parse_manifest(
            "task = declip\nflavor = social\nmodel = synthesis\nseed = 9\nfile = a.wav\nfile = b.wav\nlevels = 1, 5\nlevel = 10\ncfg.frame_len = 256\n",
        )
        .unwrap();
        assert_eq!(m.task, TaskKind::Declip);
        assert_eq!(m.files.len(), 2);
        assert_eq!(m.levels, vec![1.0, 5.0, 10.0]);
        assert!(m.overrides.contains("frame_len = 256"));
        assert!(parse_manifest("bogus = 1\n").is_err());
    }

    #[test]
    fn empty_grid_yields_header_only() {
        let m = Manifest::default();
        let csv = run_experiment(&m, Path::new(".")).unwrap();
        let data_lines: Vec<&str> = csv
            .lines()
            .filter(|l| !l.starts_with('#') && !l.is_empty())
            .collect();
        assert_eq!(data_lines.len(), 1);
        assert!(data_lines[0].starts_with("file,level_db"));
    }

    #[test]
    fn denoise_grid_rows_and_aggregates() {
        let dir = tempdir().unwrap();
        write_spec(
            dir.path(),
            "tone.spec",
            "duration = 0.4\nrate = 16000\nframe_len = 256\natom = 12, 0.8, 0.0\n",
        );
        let m = parse_manifest(
            "task = denoise\nseed = 3\nfile = tone.spec\nlevels = 0, 5\ncfg.frame_len = 256\ncfg.block_budget_secs = 10\n",
        )
        .unwrap();
        let csv = run_experiment(&m, dir.path()).unwrap();
        let data: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        // header + 2 rows + mean/std per level (2 levels x 2)
        assert_eq!(data.len(), 1 + 2 + 4, "csv:\n{csv}");
        assert!(data.iter().filter(|l| l.starts_with("mean,")).count() == 2);
    }

    #[test]
    fn missing_file_recorded_not_fatal() {
        let dir = tempdir().unwrap();
        let m = parse_manifest("task = denoise\nfile = nope.wav\nlevel = 5\n").unwrap();
        let csv = run_experiment(&m, dir.path()).unwrap();
        let row = csv.lines().find(|l| l.starts_with("nope.wav")).unwrap();
        assert!(row.contains("i/o error") || row.contains("No such file"), "{row}");
    }
}
