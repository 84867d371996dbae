//! Degradation simulators: additive white Gaussian noise at a target SNR and
//! hard clipping, either at a given level or bisected to a target SDR.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use tfrestore::frames::Signal;

use crate::metrics::sdr;
use crate::{CliError, Result};

/// Add white Gaussian noise so the expected SNR matches the target.
/// `target_snr_db = None` means "clean": the signal is returned unchanged
/// with sigma 0. Returns the exact sigma used.
pub fn add_noise(
    x: &Signal<f64>,
    target_snr_db: Option<f64>,
    seed: u64,
) -> Result<(Signal<f64>, f64)> {
    let energy: f64 = x.samples.iter().map(|v| v * v).sum();
    if energy <= 0.0 {
        return Err(CliError::input("cannot add noise to a zero signal"));
    }
    let target = match target_snr_db {
        None => return Ok((x.clone(), 0.0)),
        Some(t) => t,
    };
    let rms = (energy / x.len() as f64).sqrt();
    let sigma = rms * 10f64.powf(-target / 20.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy: Vec<f64> = x
        .samples
        .iter()
        .map(|&v| v + sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        .collect();
    Ok((Signal::new(noisy, x.sample_rate)?, sigma))
}

/// Idealized hard clipping at level tau.
pub fn clip_to_tau(x: &Signal<f64>, tau: f64) -> Result<Signal<f64>> {
    if tau <= 0.0 {
        return Err(CliError::input("tau must be positive"));
    }
    let clipped = x.samples.iter().map(|&v| v.clamp(-tau, tau)).collect();
    Ok(Signal::new(clipped, x.sample_rate)?)
}

/// Find tau so that SDR(x, clip(x, tau)) hits the target within tol_db, by
/// bisection (SDR is monotone nondecreasing in tau). The input must be
/// amplitude-normalized to max |x| = 1.
pub fn clip_to_sdr(
    x: &Signal<f64>,
    target_sdr_db: f64,
    tol_db: f64,
) -> Result<(Signal<f64>, f64)> {
    let peak = x.samples.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if (peak - 1.0).abs() > 1e-6 {
        return Err(CliError::input(format!(
            "clip_to_sdr expects max |x| = 1, got {peak}"
        )));
    }
    let mut lo = 1e-6;
    let mut hi = 1.0;
    let sdr_at = |tau: f64| -> Result<f64> { sdr(x, &clip_to_tau(x, tau)?) };
    if sdr_at(lo)? > target_sdr_db + tol_db {
        return Err(CliError::range(format!(
            "target {target_sdr_db} dB below the SDR floor at tau -> 0"
        )));
    }
    let mut tau = 0.5 * (lo + hi);
    for _ in 0..60 {
        tau = 0.5 * (lo + hi);
        let s = sdr_at(tau)?;
        if (s - target_sdr_db).abs() <= tol_db {
            return Ok((clip_to_tau(x, tau)?, tau));
        }
        if s < target_sdr_db {
            lo = tau;
        } else {
            hi = tau;
        }
    }
    let s = sdr_at(tau)?;
    if (s - target_sdr_db).abs() <= tol_db {
        Ok((clip_to_tau(x, tau)?, tau))
    } else {
        Err(CliError::range(format!(
            "bisection did not reach {target_sdr_db} dB (got {s:.2} dB at tau = {tau:.4})"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::snr;

    fn tone(len: usize) -> Signal<f64> {
        Signal::new(
            (0..len)
                .map(|t| (2.0 * std::f64::consts::PI * 440.0 * t as f64 / 16000.0).sin())
                .collect(),
            16000,
        )
        .unwrap()
    }

    #[test]
    fn sigma_for_zero_db_is_rms() {
        let x = tone(16000);
        let (_, sigma) = add_noise(&x, Some(0.0), 1).unwrap();
        let rms = (x.samples.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        assert!((sigma - rms).abs() < 1e-12);
        // clean flag
        let (y, s0) = add_noise(&x, None, 1).unwrap();
        assert_eq!(s0, 0.0);
        assert_eq!(y.samples, x.samples);
        // 10 dB on (approximately) unit-rms input
        let unit = Signal::new(x.samples.iter().map(|v| v * 2f64.sqrt()).collect(), 16000).unwrap();
        let (_, s10) = add_noise(&unit, Some(10.0), 1).unwrap();
        assert!((s10 - 10f64.powf(-0.5)).abs() < 1e-3);
    }

    #[test]
    fn measured_snr_close_to_target() {
        let x = tone(16000); // 1 s
        for &target in &[0.0, 5.0, 20.0] {
            let (y, _) = add_noise(&x, Some(target), 42).unwrap();
            let measured = snr(&x, &y).unwrap();
            assert!((measured - target).abs() < 0.5, "target {target}, got {measured}");
        }
        // determinism under the seed
        let (a, _) = add_noise(&x, Some(5.0), 7).unwrap();
        let (b, _) = add_noise(&x, Some(5.0), 7).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn clipping_rules() {
        let x = Signal::new(vec![0.5, -1.2, 0.8, -0.1], 16000).unwrap();
        let y = clip_to_tau(&x, 0.8).unwrap();
        assert_eq!(y.samples, vec![0.5, -0.8, 0.8, -0.1]);
        // idempotent
        let z = clip_to_tau(&y, 0.8).unwrap();
        assert_eq!(z.samples, y.samples);
        // tau above the peak: identity
        let id = clip_to_tau(&x, 2.0).unwrap();
        assert_eq!(id.samples, x.samples);
        assert!(clip_to_tau(&x, 0.0).is_err());
    }

    #[test]
    fn sdr_bisection_inverts_forward_evaluation() {
        let raw = tone(8192);
        let peak = raw.samples.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let x = Signal::new(raw.samples.iter().map(|v| v / peak).collect(), 16000).unwrap();
        let target = sdr(&x, &clip_to_tau(&x, 0.5).unwrap()).unwrap();
        let (_, tau) = clip_to_sdr(&x, target, 0.1).unwrap();
        let achieved = sdr(&x, &clip_to_tau(&x, tau).unwrap()).unwrap();
        assert!((achieved - target).abs() <= 0.1);
        // very high target: tau tends to 1 and y ~ x
        let (y, tau_hi) = clip_to_sdr(&x, 120.0, 0.5).unwrap();
        assert!(tau_hi > 0.99, "tau {tau_hi}");
        assert!(snr(&x, &y).unwrap() >= 119.5);
        // unreachable target
        assert!(clip_to_sdr(&x, -100.0, 0.1).is_err());
    }
}
