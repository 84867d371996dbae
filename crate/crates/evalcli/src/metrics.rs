//! SNR/SDR scoring. Both use the same energy-ratio formula; SDR is the
//! simplified no-gain-ambiguity variant (declipped estimates keep reliable
//! samples verbatim, so gain fitting would be meaningless).

use tfrestore::frames::Signal;

use crate::{CliError, Result};

/// Cap applied when the error energy underflows (identical signals).
pub const DB_CAP: f64 = 300.0;

fn ratio_db(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(CliError::input(format!(
            "length mismatch: {} vs {}",
            reference.len(),
            estimate.len()
        )));
    }
    let ref_energy: f64 = reference.iter().map(|v| v * v).sum();
    if ref_energy <= 0.0 {
        return Err(CliError::input("reference signal is zero"));
    }
    let err_energy: f64 = reference
        .iter()
        .zip(estimate)
        .map(|(r, e)| (r - e) * (r - e))
        .sum();
    if err_energy <= 0.0 {
        return Ok(DB_CAP);
    }
    Ok((10.0 * (ref_energy / err_energy).log10()).min(DB_CAP))
}

/// Signal-to-noise ratio in dB.
pub fn snr(reference: &Signal<f64>, estimate: &Signal<f64>) -> Result<f64> {
    ratio_db(&reference.samples, &estimate.samples)
}

/// Signal-to-distortion ratio in dB; same formula on the full signal.
pub fn sdr(reference: &Signal<f64>, estimate: &Signal<f64>) -> Result<f64> {
    ratio_db(&reference.samples, &estimate.samples)
}

/// Ratio skipping the first and last `skip` samples (overlap-add edge
/// region), used by experiment reports.
pub fn ratio_db_trimmed(
    reference: &Signal<f64>,
    estimate: &Signal<f64>,
    skip: usize,
) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(CliError::input("length mismatch"));
    }
    if reference.len() <= 2 * skip {
        return ratio_db(&reference.samples, &estimate.samples);
    }
    let end = reference.len() - skip;
    ratio_db(&reference.samples[skip..end], &estimate.samples[skip..end])
}
