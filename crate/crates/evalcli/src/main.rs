//! `tfrestore` command line: degrade, restore, and score audio.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tfrestore::restoration::{
    apply_declip_config, apply_denoise_config, declip, denoise, DeclipConfig, DenoiseConfig,
    Flavor, Model,
};
use tfrestore::shrinkage::{
    default_music_patterns, default_speech_patterns, format_patterns, load_patterns,
};

use tfrestore_cli::degrade::{add_noise, clip_to_sdr, clip_to_tau};
use tfrestore_cli::experiment::{parse_manifest, run_experiment};
use tfrestore_cli::metrics::{ratio_db_trimmed, sdr, snr};
use tfrestore_cli::synth::{parse_synth_spec, synth_signal};
use tfrestore_cli::wav::{read_wav, write_wav};
use tfrestore_cli::{CliError, Result};

#[derive(Parser)]
#[command(name = "tfrestore", about = "Sparse/cosparse audio denoising and declipping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DegradeTask {
    Noise,
    Clip,
}

#[derive(Clone, Copy, ValueEnum)]
enum RestoreTask {
    Denoise,
    Declip,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Snr,
    Sdr,
}

#[derive(Subcommand)]
enum Command {
    /// Degrade a signal with noise or clipping.
    Degrade {
        #[arg(long, value_enum)]
        task: DegradeTask,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        /// Target SNR in dB (noise task).
        #[arg(long)]
        snr: Option<f64>,
        /// Clip level (clip task).
        #[arg(long)]
        tau: Option<f64>,
        /// Target input SDR in dB (clip task; bisects tau).
        #[arg(long)]
        sdr: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Restore a degraded signal.
    Restore {
        #[arg(long, value_enum)]
        task: RestoreTask,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
        #[arg(long, default_value = "plain")]
        flavor: String,
        #[arg(long, default_value = "analysis")]
        model: String,
        /// Oracle noise std (denoise).
        #[arg(long)]
        sigma: Option<f64>,
        /// Clip level (declip).
        #[arg(long)]
        tau: Option<f64>,
        /// key = value config file with parameter overrides.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Pattern file replacing the default collection.
        #[arg(long)]
        patterns: Option<PathBuf>,
    },
    /// Score an estimate against a reference.
    Eval {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long = "est")]
        estimate: PathBuf,
        #[arg(long, value_enum, default_value = "snr")]
        metric: Metric,
        /// Skip this many samples at each edge (0 = full signal).
        #[arg(long, default_value_t = 0)]
        skip: usize,
    },
    /// Run a manifest-driven sweep and print (or save) the CSV report.
    Sweep {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long = "out")]
        output: Option<PathBuf>,
    },
    /// List the default patterns or validate a pattern file.
    Patterns {
        /// Print a built-in collection: music or speech.
        #[arg(long)]
        list: Option<String>,
        /// Validate this pattern file.
        #[arg(long)]
        validate: Option<PathBuf>,
    },
    /// Generate a synthetic test signal from a spec file.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
    },
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Degrade { task, input, output, snr, tau, sdr, seed } => {
            let (signal, _) = read_wav(&input)?;
            let degraded = match task {
                DegradeTask::Noise => {
                    let (y, sigma) = add_noise(&signal, snr, seed)?;
                    println!("sigma = {sigma}");
                    y
                }
                DegradeTask::Clip => match (tau, sdr) {
                    (Some(t), None) => clip_to_tau(&signal, t)?,
                    (None, Some(target)) => {
                        let (y, t) = clip_to_sdr(&signal, target, 0.1)?;
                        println!("tau = {t}");
                        y
                    }
                    _ => {
                        return Err(CliError::input("clip task needs exactly one of --tau/--sdr"))
                    }
                },
            };
            write_wav(&output, &degraded)?;
        }
        Command::Restore { task, input, output, flavor, model, sigma, tau, config, patterns } => {
            let (signal, _) = read_wav(&input)?;
            if signal.sample_rate != 16000 {
                eprintln!(
                    "warning: defaults are tuned for 16 kHz material, input is {} Hz",
                    signal.sample_rate
                );
            }
            let custom_patterns = match &patterns {
                Some(path) => {
                    Some(load_patterns(&std::fs::read_to_string(path)?).map_err(CliError::Core)?)
                }
                None => None,
            };
            let restored = match task {
                RestoreTask::Denoise => {
                    let sigma =
                        sigma.ok_or_else(|| CliError::input("denoise requires --sigma"))?;
                    let mut cfg = DenoiseConfig::<f64>::music(sigma);
                    cfg.flavor = Flavor::parse(&flavor).map_err(CliError::Core)?;
                    cfg.model = Model::parse(&model).map_err(CliError::Core)?;
                    if let Some(p) = custom_patterns {
                        cfg.patterns = p;
                    }
                    if let Some(path) = config {
                        apply_denoise_config(&mut cfg, &std::fs::read_to_string(path)?)
                            .map_err(CliError::Core)?;
                    }
                    denoise(&signal, &cfg).map_err(CliError::Core)?
                }
                RestoreTask::Declip => {
                    let tau = tau.ok_or_else(|| CliError::input("declip requires --tau"))?;
                    let mut cfg = DeclipConfig::<f64>::music(tau);
                    cfg.flavor = Flavor::parse(&flavor).map_err(CliError::Core)?;
                    cfg.model = Model::parse(&model).map_err(CliError::Core)?;
                    if let Some(p) = custom_patterns {
                        cfg.patterns = p;
                    }
                    if let Some(path) = config {
                        apply_declip_config(&mut cfg, &std::fs::read_to_string(path)?)
                            .map_err(CliError::Core)?;
                    }
                    declip(&signal, &cfg).map_err(CliError::Core)?
                }
            };
            write_wav(&output, &restored)?;
        }
        Command::Eval { reference, estimate, metric, skip } => {
            let (r, _) = read_wav(&reference)?;
            let (e, _) = read_wav(&estimate)?;
            let value = if skip > 0 {
                ratio_db_trimmed(&r, &e, skip)?
            } else {
                match metric {
                    Metric::Snr => snr(&r, &e)?,
                    Metric::Sdr => sdr(&r, &e)?,
                }
            };
            println!("{value:.4}");
        }
        Command::Sweep { manifest, output } => {
            let text = std::fs::read_to_string(&manifest)?;
            let m = parse_manifest(&text)?;
            let base = manifest.parent().unwrap_or(Path::new("."));
            let csv = run_experiment(&m, base)?;
            match output {
                Some(path) => std::fs::write(path, csv)?,
                None => print!("{csv}"),
            }
        }
        Command::Patterns { list, validate } => match (list, validate) {
            (Some(set), None) => {
                let patterns = match set.as_str() {
                    "music" => default_music_patterns(),
                    "speech" => default_speech_patterns(),
                    other => {
                        return Err(CliError::input(format!("unknown collection '{other}'")))
                    }
                };
                print!("{}", format_patterns(&patterns));
            }
            (None, Some(path)) => {
                let patterns =
                    load_patterns(&std::fs::read_to_string(&path)?).map_err(CliError::Core)?;
                for p in &patterns {
                    println!(
                        "{}: {}x{}, {} active cells",
                        p.name,
                        p.mask.nrows(),
                        p.mask.ncols(),
                        p.nnz()
                    );
                }
            }
            _ => return Err(CliError::input("use exactly one of --list/--validate")),
        },
        Command::Synth { spec, output } => {
            let text = std::fs::read_to_string(&spec)?;
            let signal = synth_signal(&parse_synth_spec(&text)?)?;
            write_wav(&output, &signal)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
