//! Sparsity-promoting shrinkage operators and the time-frequency pattern
//! library.
//!
//! Plain models shrink with hard thresholding; social models with the
//! Persistent Empirical Wiener rule, which gates each coefficient on the
//! energy of a pattern-shaped neighborhood around it.

use ndarray::Array2;

use crate::{CMat, Error, Result, Scalar};

/// Binary time-frequency neighborhood mask, (2F+1) rows x (2T+1) columns.
/// Rows run down the frequency axis, columns rightward in time.
#[derive(Debug, Clone)]
pub struct Pattern {
    pub mask: Array2<u8>,
    pub name: String,
}

impl Pattern {
    pub fn new(name: impl Into<String>, mask: Array2<u8>) -> Result<Self> {
        if mask.nrows().is_multiple_of(2) || mask.ncols().is_multiple_of(2) {
            return Err(Error::parameter("pattern dimensions must be odd"));
        }
        if mask.iter().any(|&v| v > 1) {
            return Err(Error::parameter("pattern entries must be 0 or 1"));
        }
        if mask.iter().all(|&v| v == 0) {
            return Err(Error::parameter("pattern must have at least one nonzero entry"));
        }
        Ok(Pattern { mask, name: name.into() })
    }

    /// Frequency half-extent F.
    pub fn f_half(&self) -> usize {
        (self.mask.nrows() - 1) / 2
    }

    /// Time half-extent T.
    pub fn t_half(&self) -> usize {
        (self.mask.ncols() - 1) / 2
    }

    /// Number of active cells, written ||Gamma||_0.
    pub fn nnz(&self) -> usize {
        self.mask.iter().filter(|&&v| v == 1).count()
    }

    /// Offsets of active cells relative to the pattern center.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        let fc = self.f_half() as isize;
        let tc = self.t_half() as isize;
        self.mask
            .indexed_iter()
            .filter(|(_, &v)| v == 1)
            .map(|((r, c), _)| (r as isize - fc, c as isize - tc))
            .collect()
    }
}

/// Threshold update rule across iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuRule {
    /// mu -> max(mu - 1, 0).
    LinearDecrement,
    /// mu -> alpha * mu.
    Geometric,
}

/// Initial threshold plus its update rule.
#[derive(Debug, Clone, Copy)]
pub struct MuSchedule<T> {
    pub rule: MuRule,
    pub alpha: T,
}

impl<T: Scalar> MuSchedule<T> {
    pub fn linear() -> Self {
        MuSchedule { rule: MuRule::LinearDecrement, alpha: T::one() }
    }

    pub fn geometric(alpha: T) -> Result<Self> {
        if alpha <= T::zero() || alpha > T::one() {
            return Err(Error::parameter("geometric ratio must be in (0, 1]"));
        }
        Ok(MuSchedule { rule: MuRule::Geometric, alpha })
    }
}

/// One step of the schedule.
pub fn next_mu<T: Scalar>(schedule: &MuSchedule<T>, mu: T) -> T {
    match schedule.rule {
        MuRule::LinearDecrement => (mu - T::one()).max(T::zero()),
        MuRule::Geometric => schedule.alpha * mu,
    }
}

/// Keep the k entries of largest magnitude, zero the rest. Ties are broken
/// by keeping the lowest column-major linear index first.
pub fn hard_threshold<T: Scalar>(z: &CMat<T>, k: usize) -> Result<CMat<T>> {
    let total = z.len();
    if k > total {
        return Err(Error::parameter(format!("k = {k} exceeds entry count {total}")));
    }
    if k == total {
        return Ok(z.clone());
    }
    let mut ranked: Vec<(T, usize)> = Vec::with_capacity(total);
    for col in 0..z.ncols() {
        for row in 0..z.nrows() {
            let idx = col * z.nrows() + row;
            ranked.push((z[(row, col)].norm_sqr(), idx));
        }
    }
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut keep = vec![false; total];
    for &(_, idx) in ranked.iter().take(k) {
        keep[idx] = true;
    }
    // DFT coefficients of a real signal come in conjugate pairs whose
    // magnitudes agree up to rounding; if the cut splits such a tie, keep the
    // partner too so conjugate symmetry survives the threshold.
    let n_rows = z.nrows();
    let tie = T::from_f64_lit(1e-9);
    for col in 0..z.ncols() {
        for row in 0..n_rows {
            let idx = col * n_rows + row;
            if !keep[idx] {
                continue;
            }
            let mirror = (n_rows - row) % n_rows;
            let midx = col * n_rows + mirror;
            let own = z[(row, col)].norm_sqr();
            let other = z[(mirror, col)].norm_sqr();
            if !keep[midx] && (own - other).abs() <= tie * own {
                keep[midx] = true;
            }
        }
    }
    let mut out = z.clone();
    for col in 0..z.ncols() {
        for row in 0..z.nrows() {
            if !keep[col * z.nrows() + row] {
                out[(row, col)] = num_complex::Complex::new(T::zero(), T::zero());
            }
        }
    }
    Ok(out)
}

// Symmetric (mirror) reflection of an index into 0..n.
fn reflect(idx: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut r = idx % period;
    if r < 0 {
        r += period;
    }
    if r >= n {
        r = period - 1 - r;
    }
    r as usize
}

/// Persistent Empirical Wiener: each entry is scaled by
/// (1 - mu^2 / E)_+ where E is the |Z|^2 energy over the pattern-shaped
/// neighborhood, mirror-padded at the borders.
pub fn pew<T: Scalar>(z: &CMat<T>, pattern: &Pattern, mu: T) -> CMat<T> {
    if mu == T::zero() {
        return z.clone();
    }
    let (rows, cols) = z.dim();
    let mag2 = z.mapv(|v| v.norm_sqr());
    let offsets = pattern.offsets();
    let mu2 = mu * mu;
    let mut out = z.clone();
    for col in 0..cols {
        for row in 0..rows {
            let mut energy = T::zero();
            for &(df, dt) in &offsets {
                let r = reflect(row as isize + df, rows);
                let c = reflect(col as isize + dt, cols);
                energy += mag2[(r, c)];
            }
            let gain = if energy > T::zero() {
                (T::one() - mu2 / energy).max(T::zero())
            } else {
                T::zero()
            };
            out[(row, col)] = z[(row, col)] * gain;
        }
    }
    out
}

/// Shrinkage family selector for the generic solver.
#[derive(Debug, Clone)]
pub enum ShrinkFamily {
    /// Hard thresholding; mu counts suppressed coefficients out of `total`.
    Plain { total: usize },
    /// PEW with the given pattern.
    Social { pattern: Pattern },
}

/// Apply the family member S_mu. Satisfies S_0 = identity, S_inf = 0.
pub fn shrink<T: Scalar>(family: &ShrinkFamily, z: &CMat<T>, mu: T) -> Result<CMat<T>> {
    match family {
        ShrinkFamily::Plain { total } => {
            // a linear schedule may push mu below zero; that regime keeps
            // every coefficient
            let rounded = mu.round().max(T::zero());
            if (mu.max(T::zero()) - rounded).abs() > T::from_f64_lit(1e-9) {
                return Err(Error::parameter(format!(
                    "plain shrinkage needs an integer mu, got {mu}"
                )));
            }
            let mu_int = rounded.to_usize().ok_or_else(|| {
                Error::parameter(format!("plain shrinkage mu out of range: {mu}"))
            })?;
            let k = total.saturating_sub(mu_int);
            hard_threshold(z, k.min(z.len()))
        }
        ShrinkFamily::Social { pattern } => Ok(pew(z, pattern, mu)),
    }
}

fn bar_row(name: &str, width: usize, ones: std::ops::Range<usize>) -> Pattern {
    let mut mask = Array2::zeros((1, width));
    for c in ones {
        mask[(0, c)] = 1;
    }
    Pattern::new(name, mask).expect("static pattern")
}

/// The six default patterns at a given time half-extent T (frames) and
/// transient frequency half-extent F.
fn default_patterns(t_half: usize, f_half: usize) -> Vec<Pattern> {
    let width = 2 * t_half + 1;
    // G1: horizontal bar, tonal content.
    let g1 = bar_row("G1_tonal", width, 0..width);
    // G2: vertical bar, transients.
    let g2 = Pattern::new("G2_transient", Array2::ones((2 * f_half + 1, 1))).unwrap();
    // G3: causal half bar (center plus future frames), pre-echo avoidance.
    let g3 = bar_row("G3_causal", width, t_half..width);
    // G4/G5: 3-wide diagonal staircases, tonal transitions.
    let diag = |name: &str, up: bool| {
        let rows = 7usize;
        let mut mask = Array2::zeros((rows, width));
        for c in 0..width {
            let pos = (c as f64 / (width - 1).max(1) as f64 * (rows - 1) as f64).round() as usize;
            let center = if up { rows - 1 - pos } else { pos };
            for dr in -1isize..=1 {
                let r = center as isize + dr;
                if r >= 0 && (r as usize) < rows {
                    mask[(r as usize, c)] = 1;
                }
            }
        }
        Pattern::new(name, mask).unwrap()
    };
    let g4 = diag("G4_diag_up", true);
    let g5 = diag("G5_diag_down", false);
    // G6: 3x3 default neighborhood.
    let g6 = Pattern::new("G6_default", Array2::ones((3, 3))).unwrap();
    vec![g1, g2, g3, g4, g5, g6]
}

/// Default music patterns: 21 frames wide, i.e. 320 ms at a 16 ms hop.
pub fn default_music_patterns() -> Vec<Pattern> {
    default_patterns(10, 7)
}

/// Default speech patterns: 13 frames wide, i.e. 96 ms at an 8 ms hop.
pub fn default_speech_patterns() -> Vec<Pattern> {
    default_patterns(6, 7)
}

/// Parse a pattern file: blocks separated by blank lines, each starting with
/// `name <label>` followed by space-separated 0/1 rows.
pub fn load_patterns(text: &str) -> Result<Vec<Pattern>> {
    let mut patterns = Vec::new();
    let mut name: Option<String> = None;
    let mut rows: Vec<Vec<u8>> = Vec::new();
    let mut block_line = 0usize;

    let mut flush = |name: &mut Option<String>, rows: &mut Vec<Vec<u8>>, line: usize| -> Result<()> {
        if name.is_none() && rows.is_empty() {
            return Ok(());
        }
        let label = name.take().ok_or(Error::Parse {
            line,
            msg: "pattern block missing `name` line".into(),
        })?;
        if rows.is_empty() {
            return Err(Error::Parse { line, msg: format!("pattern `{label}` has no rows") });
        }
        let width = rows[0].len();
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Parse { line, msg: format!("pattern `{label}` rows differ in length") });
        }
        let mask = Array2::from_shape_fn((rows.len(), width), |(r, c)| rows[r][c]);
        let pat = Pattern::new(label, mask)
            .map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        patterns.push(pat);
        rows.clear();
        Ok(())
    };

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            flush(&mut name, &mut rows, block_line)?;
            continue;
        }
        if rows.is_empty() && name.is_none() {
            block_line = lineno + 1;
        }
        if let Some(label) = line.strip_prefix("name ") {
            if name.is_some() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    msg: "duplicate `name` line in pattern block".into(),
                });
            }
            name = Some(label.trim().to_string());
            continue;
        }
        let row: Result<Vec<u8>> = line
            .split_whitespace()
            .map(|tok| match tok {
                "0" => Ok(0u8),
                "1" => Ok(1u8),
                other => Err(Error::Parse {
                    line: lineno + 1,
                    msg: format!("expected 0 or 1, got `{other}`"),
                }),
            })
            .collect();
        rows.push(row?);
    }
    flush(&mut name, &mut rows, block_line)?;
    Ok(patterns)
}

/// Serialize patterns in the `load_patterns` format.
pub fn format_patterns(patterns: &[Pattern]) -> String {
    let mut out = String::new();
    for (i, p) in patterns.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&format!("name {}\n", p.name));
        for r in 0..p.mask.nrows() {
            let row: Vec<String> = (0..p.mask.ncols()).map(|c| p.mask[(r, c)].to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex;

    fn cmat(vals: &[f64]) -> CMat<f64> {
        Array2::from_shape_fn((1, vals.len()), |(_, c)| Complex::new(vals[c], 0.0))
    }

    #[test]
    fn hard_threshold_keeps_two_largest() {
        let z = cmat(&[3.0, -1.0, 0.5, -4.0]);
        let out = hard_threshold(&z, 2).unwrap();
        assert_eq!(out[(0, 0)].re, 3.0);
        assert_eq!(out[(0, 1)].re, 0.0);
        assert_eq!(out[(0, 2)].re, 0.0);
        assert_eq!(out[(0, 3)].re, -4.0);
    }

    #[test]
    fn hard_threshold_extremes() {
        let z = cmat(&[1.0, 2.0, 3.0]);
        let zeroed = hard_threshold(&z, 0).unwrap();
        assert!(zeroed.iter().all(|v| v.norm() == 0.0));
        let kept = hard_threshold(&z, 3).unwrap();
        assert_eq!(kept, z);
        assert!(hard_threshold(&z, 4).is_err());
    }

    #[test]
    fn hard_threshold_tie_breaks_by_lowest_index() {
        let z = cmat(&[1.0, -1.0, 1.0]);
        let out = hard_threshold(&z, 2).unwrap();
        assert_eq!(out[(0, 0)].re, 1.0);
        assert_eq!(out[(0, 1)].re, -1.0);
        assert_eq!(out[(0, 2)].re, 0.0);
    }

    #[test]
    fn hard_threshold_idempotent() {
        let z = cmat(&[0.3, 2.0, -0.7, 1.1, 0.0]);
        let once = hard_threshold(&z, 2).unwrap();
        let twice = hard_threshold(&once, 2).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn pew_scalar_cases() {
        let one = Pattern::new("p", Array2::ones((1, 1))).unwrap();
        // mu = 0 -> identity
        let z = cmat(&[2.0]);
        assert_eq!(pew(&z, &one, 0.0), z);
        // 1x1 Z = [2], mu = 1 -> 2 (1 - 1/4) = 1.5
        let out = pew(&z, &one, 1.0);
        assert!((out[(0, 0)].re - 1.5).abs() < 1e-15);
        // energy below mu^2 -> 0
        let small = cmat(&[0.5]);
        assert_eq!(pew(&small, &one, 1.0)[(0, 0)].re, 0.0);
    }

    #[test]
    fn pew_row_mask_patch_energy_via_explicit_loop() {
        // 3x3 all ones, 1x3 row mask, mu = 1 -> every entry 2/3
        let z = Array2::from_elem((3, 3), Complex::new(1.0f64, 0.0));
        let mut mask = Array2::zeros((1, 3));
        mask.fill(1);
        let p = Pattern::new("row", mask).unwrap();
        // oracle: explicit per-entry patch extraction with mirror padding
        for (i, j) in [(0usize, 0usize), (1, 1), (2, 2), (0, 2)] {
            let mut e = 0.0;
            for dt in -1isize..=1 {
                let c = reflect(j as isize + dt, 3);
                e += z[(i, c)].norm_sqr();
            }
            assert!((e - 3.0).abs() < 1e-15);
        }
        let out = pew(&z, &p, 1.0);
        for v in out.iter() {
            assert!((v.re - 2.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn pew_matches_empirical_wiener_for_unit_pattern() {
        let one = Pattern::new("p", Array2::ones((1, 1))).unwrap();
        let z = Array2::from_shape_fn((4, 3), |(r, c)| {
            Complex::new(0.3 * r as f64 - 0.2, 0.15 * c as f64 + 0.05)
        });
        let mu = 0.4;
        let out = pew(&z, &one, mu);
        for (i, v) in z.indexed_iter() {
            let gain = (1.0 - mu * mu / v.norm_sqr()).max(0.0);
            assert!((out[i] - v * gain).norm() < 1e-12);
        }
    }

    #[test]
    fn pew_commutes_with_global_phase() {
        let p = Pattern::new("p", Array2::ones((3, 1))).unwrap();
        let z = Array2::from_shape_fn((5, 4), |(r, c)| {
            Complex::new((r + 1) as f64 * 0.2, c as f64 * -0.3)
        });
        let theta = Complex::from_polar(1.0, 0.77);
        let lhs = pew(&z.mapv(|v| v * theta), &p, 0.5);
        let rhs = pew(&z, &p, 0.5).mapv(|v| v * theta);
        for (i, v) in lhs.indexed_iter() {
            assert!((v - rhs[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn shrink_plain_counts() {
        let z = cmat(&[1.0, 5.0, 2.0, 0.5]);
        // mu = total - 1 -> exactly one survivor
        let fam = ShrinkFamily::Plain { total: 4 };
        let out = shrink(&fam, &z, 3.0).unwrap();
        assert_eq!(out.iter().filter(|v| v.norm() > 0.0).count(), 1);
        // mu = 0 -> identity
        assert_eq!(shrink(&fam, &z, 0.0).unwrap(), z);
        // non-integer mu -> error
        assert!(shrink(&fam, &z, 1.5).is_err());
    }

    #[test]
    fn shrink_social_mu_zero_is_identity() {
        let fam = ShrinkFamily::Social {
            pattern: Pattern::new("p", Array2::ones((1, 1))).unwrap(),
        };
        let z = cmat(&[0.1, -0.4]);
        assert_eq!(shrink(&fam, &z, 0.0).unwrap(), z);
    }

    #[test]
    fn next_mu_rules() {
        let lin = MuSchedule::<f64>::linear();
        assert_eq!(next_mu(&lin, 5.0), 4.0);
        assert_eq!(next_mu(&lin, 0.0), 0.0);
        let geo = MuSchedule::<f64>::geometric(0.99).unwrap();
        assert!((next_mu(&geo, 10.0) - 9.9).abs() < 1e-12);
        assert!(MuSchedule::<f64>::geometric(0.0).is_err());
        assert!(MuSchedule::<f64>::geometric(1.5).is_err());
    }

    #[test]
    fn shrinkage_definition_properties_sampled() {
        // odd, contractive, and monotone-unbounded along a ray
        let fam_plain = ShrinkFamily::Plain { total: 6 };
        let p = Pattern::new("p", Array2::ones((1, 3))).unwrap();
        let z = cmat(&[0.2, -1.3, 0.7, 2.2, -0.1, 0.9]);
        for (fam, mu) in [(&fam_plain, 3.0), (&ShrinkFamily::Social { pattern: p }, 0.5)] {
            let s = shrink(fam, &z, mu).unwrap();
            let s_neg = shrink(fam, &z.mapv(|v| -v), mu).unwrap();
            for (i, v) in s.indexed_iter() {
                assert!((s_neg[i] + v).norm() < 1e-12, "odd failed");
                assert!(v.norm() <= z[i].norm() + 1e-12, "contraction failed");
            }
        }
        // unbounded: scaling the input up drives the output up
        let fam = ShrinkFamily::Social {
            pattern: Pattern::new("p", Array2::ones((1, 1))).unwrap(),
        };
        let big = shrink(&fam, &cmat(&[100.0]), 1.0).unwrap();
        assert!(big[(0, 0)].re > 99.0);
    }

    #[test]
    fn default_pattern_collections() {
        let music = default_music_patterns();
        assert_eq!(music.len(), 6);
        assert_eq!(music[0].mask.ncols(), 21);
        assert_eq!(music[0].nnz(), 21);
        assert_eq!(music[1].nnz(), 15);
        let speech = default_speech_patterns();
        assert_eq!(speech.len(), 6);
        assert_eq!(speech[0].mask.ncols(), 13);
        assert_eq!(speech[1].nnz(), 15);
        assert_eq!(speech[5].nnz(), 9);
    }

    #[test]
    fn pattern_round_trip_through_text() {
        let src = default_music_patterns();
        let text = format_patterns(&src);
        let parsed = load_patterns(&text).unwrap();
        assert_eq!(parsed.len(), src.len());
        for (a, b) in parsed.iter().zip(src.iter()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.mask, b.mask);
        }
    }

    #[test]
    fn load_simple_pattern() {
        let pats = load_patterns("name bar\n1 1 1\n").unwrap();
        assert_eq!(pats.len(), 1);
        assert_eq!(pats[0].f_half(), 0);
        assert_eq!(pats[0].t_half(), 1);
        assert_eq!(pats[0].nnz(), 3);
    }

    #[test]
    fn load_rejects_malformed() {
        assert!(load_patterns("name bad\n1 2 1\n").is_err());
        assert!(load_patterns("name even\n1 1\n").is_err());
        assert!(load_patterns("name empty\n0 0 0\n").is_err());
        assert!(load_patterns("1 1 1\n").is_err()); // missing name
    }
}
