//! Generalized projections P_{Theta,M} for the four problem instantiations.
//!
//! Denoising constrains the estimate to an l2 ball around the observation;
//! declipping constrains it componentwise through a reliable/clipped mask.
//! Analysis variants project time frames, synthesis variants project
//! time-frequency coefficients.

use ndarray::Array2;
use num_complex::Complex;

use crate::solver::{Estimate, GeneralizedProjection, ProjectionOutcome, ProjectionReport};
use crate::transforms::{realify, AnalysisLike, RealMode, SynthesisLike};
use crate::{fro_norm_c, fro_norm_r, CMat, Error, RMat, Result, Scalar};

/// How a sample relates to the clipping level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipClass {
    Reliable,
    ClipPos,
    ClipNeg,
}

/// Per-sample classification of a clipped block, plus the threshold each
/// clipped sample must respect. Thresholds are per-entry so that windowed
/// frames (where a clipped sample sits at w_j * tau) are handled correctly.
#[derive(Debug, Clone)]
pub struct ClipMask<T: Scalar> {
    pub classes: Array2<ClipClass>,
    pub tau: T,
    pub thresholds: RMat<T>,
}

impl<T: Scalar> ClipMask<T> {
    pub fn new(classes: Array2<ClipClass>, tau: T, thresholds: RMat<T>) -> Result<Self> {
        if tau <= T::zero() {
            return Err(Error::parameter("clip level tau must be positive"));
        }
        if classes.dim() != thresholds.dim() {
            return Err(Error::dimension("classes and thresholds shapes differ"));
        }
        Ok(ClipMask { classes, tau, thresholds })
    }

    pub fn reliable_count(&self) -> usize {
        self.classes.iter().filter(|c| **c == ClipClass::Reliable).count()
    }

    pub fn clipped_count(&self) -> usize {
        self.classes.len() - self.reliable_count()
    }
}

/// Classify every entry of `y` against a uniform clip level: values at or
/// above tau are positive-clipped, at or below -tau negative-clipped.
pub fn build_clip_mask<T: Scalar>(y: &RMat<T>, tau: T) -> Result<ClipMask<T>> {
    if tau <= T::zero() {
        return Err(Error::parameter("clip level tau must be positive"));
    }
    let classes = y.map(|&v| {
        if v >= tau {
            ClipClass::ClipPos
        } else if v <= -tau {
            ClipClass::ClipNeg
        } else {
            ClipClass::Reliable
        }
    });
    let thresholds = Array2::from_elem(y.dim(), tau);
    ClipMask::new(classes, tau, thresholds)
}

fn ball_clamp<T: Scalar>(b: &RMat<T>, y: &RMat<T>, epsilon: T) -> (RMat<T>, T) {
    let diff = b - y;
    let r = fro_norm_r(&diff);
    if r <= epsilon {
        return (b.clone(), T::zero());
    }
    let shrink = (r - epsilon) / r;
    (b - &diff.mapv(|v| v * shrink), r - epsilon)
}

/// Denoise, analysis role: project the realified inverse transform of Z onto
/// the epsilon-ball around the observation.
pub fn project_denoise_analysis<T: Scalar>(
    z: &CMat<T>,
    y: &RMat<T>,
    epsilon: T,
    op: &impl AnalysisLike<T>,
    mode: RealMode,
) -> Result<RMat<T>> {
    if epsilon < T::zero() {
        return Err(Error::parameter("epsilon must be nonnegative"));
    }
    let adj = op.op_adjoint(z);
    let inv_zeta = T::one() / op.zeta();
    let b = realify(&adj.mapv(|c| c * inv_zeta), mode);
    if b.dim() != y.dim() {
        return Err(Error::dimension("observation shape does not match transform"));
    }
    Ok(ball_clamp(&b, y, epsilon).0)
}

/// Denoise, synthesis role: pull the coefficient estimate toward the ball
/// constraint on its realified synthesis.
pub fn project_denoise_synthesis<T: Scalar>(
    z: &CMat<T>,
    y: &RMat<T>,
    epsilon: T,
    op: &impl SynthesisLike<T>,
    mode: RealMode,
) -> Result<CMat<T>> {
    if epsilon < T::zero() {
        return Err(Error::parameter("epsilon must be nonnegative"));
    }
    let synth = realify(&op.op_apply(z), mode);
    if synth.dim() != y.dim() {
        return Err(Error::dimension("observation shape does not match transform"));
    }
    let resid = &synth - y;
    let r = fro_norm_r(&resid);
    if r <= epsilon {
        return Ok(z.clone());
    }
    let factor = (r - epsilon) / (r * op.xi());
    let correction = op.op_adjoint_real(&resid);
    Ok(z - &correction.mapv(|c| c * factor))
}

/// Declip, analysis role: componentwise projection of the realified inverse
/// transform. Reliable samples are pinned to the observation; clipped samples
/// are pushed past their per-sample threshold when necessary.
pub fn project_declip_analysis<T: Scalar>(
    z: &CMat<T>,
    mask: &ClipMask<T>,
    y: &RMat<T>,
    op: &impl AnalysisLike<T>,
    mode: RealMode,
) -> Result<RMat<T>> {
    let adj = op.op_adjoint(z);
    let inv_zeta = T::one() / op.zeta();
    let b = realify(&adj.mapv(|c| c * inv_zeta), mode);
    if b.dim() != y.dim() || b.dim() != mask.classes.dim() {
        return Err(Error::dimension("mask/observation shape does not match transform"));
    }
    let mut w = b;
    for (idx, entry) in w.indexed_iter_mut() {
        match mask.classes[idx] {
            ClipClass::Reliable => *entry = y[idx],
            ClipClass::ClipPos => {
                let thr = mask.thresholds[idx];
                if *entry < thr {
                    *entry = thr;
                }
            }
            ClipClass::ClipNeg => {
                let thr = mask.thresholds[idx];
                if *entry > -thr {
                    *entry = -thr;
                }
            }
        }
    }
    Ok(w)
}

fn realify_lift_factor<T: Scalar>(mode: RealMode) -> (Complex<T>, T) {
    // adjoint multiplier of realify∘D, and the Gram constant c with
    // G Gᴴ = c * xi * I
    match mode {
        RealMode::ReMinusIm => (Complex::new(T::one(), -T::one()), T::from_f64_lit(2.0)),
        RealMode::ReOnly => (Complex::new(T::one(), T::zero()), T::one()),
    }
}

fn clip_bounds_and_violation<T: Scalar>(
    g: &RMat<T>,
    mask: &ClipMask<T>,
    y: &RMat<T>,
) -> (RMat<T>, T) {
    // componentwise distance from g to the clip-consistent set, together with
    // the target value b used by the dual update
    let mut b = Array2::zeros(g.dim());
    let mut viol_sq = T::zero();
    for (idx, &gv) in g.indexed_iter() {
        let (target, gap) = match mask.classes[idx] {
            ClipClass::Reliable => (y[idx], (gv - y[idx]).abs()),
            ClipClass::ClipPos => {
                let thr = mask.thresholds[idx];
                (thr, (thr - gv).max(T::zero()))
            }
            ClipClass::ClipNeg => {
                let thr = mask.thresholds[idx];
                (-thr, (gv + thr).max(T::zero()))
            }
        };
        b[idx] = target;
        viol_sq += gap * gap;
    }
    (b, viol_sq.sqrt())
}

/// Outcome of the iterative synthesis declip projection: the projected
/// coefficients, the dual variable for warm-starting the next call, and a
/// convergence report.
pub struct DualProjection<T: Scalar> {
    pub w: CMat<T>,
    pub dual: RMat<T>,
    pub report: ProjectionReport<T>,
}

/// Declip, synthesis role: no closed form is used; the projection is computed
/// by projected gradient ascent on the dual of the constrained least-squares
/// problem. `warm` carries the dual variable from the previous outer
/// iteration.
#[allow(clippy::too_many_arguments)]
pub fn project_declip_synthesis<T: Scalar>(
    z: &CMat<T>,
    mask: &ClipMask<T>,
    y: &RMat<T>,
    op: &impl SynthesisLike<T>,
    mode: RealMode,
    tol: T,
    max_inner: usize,
    warm: Option<RMat<T>>,
) -> Result<DualProjection<T>> {
    if max_inner == 0 {
        return Err(Error::parameter("max_inner must be at least 1"));
    }
    let time_dim = (op.time_rows(), z.ncols());
    if y.dim() != time_dim || mask.classes.dim() != time_dim {
        return Err(Error::dimension("mask/observation shape does not match transform"));
    }
    let (adj_mul, c) = realify_lift_factor::<T>(mode);
    let step = T::one() / (c * op.xi());
    let mut v: RMat<T> = match warm {
        Some(v) if v.dim() == time_dim => v,
        _ => Array2::zeros(time_dim),
    };
    let mut w = z.clone();
    let mut residual = T::infinity();
    let mut converged = false;
    let mut iters = 0usize;
    for _ in 0..max_inner {
        iters += 1;
        let corr = op.op_adjoint_real(&v);
        w = z + &corr.mapv(|cv| cv * adj_mul);
        let g = realify(&op.op_apply(&w), mode);
        let (b, viol) = clip_bounds_and_violation(&g, mask, y);
        residual = viol;
        if viol <= tol {
            converged = true;
            break;
        }
        for (idx, entry) in v.indexed_iter_mut() {
            let updated = *entry - step * (g[idx] - b[idx]);
            *entry = match mask.classes[idx] {
                ClipClass::Reliable => updated,
                ClipClass::ClipPos => updated.max(T::zero()),
                ClipClass::ClipNeg => updated.min(T::zero()),
            };
        }
    }
    Ok(DualProjection {
        w,
        dual: v,
        report: ProjectionReport { inner_iterations: iters, residual, converged },
    })
}

/// One-shot candidate for the synthesis declip projection, valid because the
/// lifted operator realify∘D satisfies G Gᴴ = c xi I. Kept as an independent
/// cross-check for the iterative route.
pub fn closed_form_declip_synthesis<T: Scalar>(
    z: &CMat<T>,
    mask: &ClipMask<T>,
    y: &RMat<T>,
    op: &impl SynthesisLike<T>,
    mode: RealMode,
) -> Result<CMat<T>> {
    let time_dim = (op.time_rows(), z.ncols());
    if y.dim() != time_dim || mask.classes.dim() != time_dim {
        return Err(Error::dimension("mask/observation shape does not match transform"));
    }
    let (adj_mul, c) = realify_lift_factor::<T>(mode);
    let g = realify(&op.op_apply(z), mode);
    let mut delta = Array2::zeros(time_dim);
    for (idx, &gv) in g.indexed_iter() {
        delta[idx] = match mask.classes[idx] {
            ClipClass::Reliable => y[idx] - gv,
            ClipClass::ClipPos => (mask.thresholds[idx] - gv).max(T::zero()),
            ClipClass::ClipNeg => (-mask.thresholds[idx] - gv).min(T::zero()),
        };
    }
    let scale = adj_mul.scale(T::one() / (c * op.xi()));
    let corr = op.op_adjoint_real(&delta);
    Ok(z + &corr.mapv(|cv| cv * scale))
}

// ---------------------------------------------------------------------------
// GeneralizedProjection adapters for the solver
// ---------------------------------------------------------------------------

pub struct DenoiseAnalysisProjection<'a, T: Scalar, A: AnalysisLike<T>> {
    y: RMat<T>,
    epsilon: T,
    op: &'a A,
    mode: RealMode,
}

impl<'a, T: Scalar, A: AnalysisLike<T>> DenoiseAnalysisProjection<'a, T, A> {
    pub fn new(y: RMat<T>, epsilon: T, op: &'a A, mode: RealMode) -> Self {
        DenoiseAnalysisProjection { y, epsilon, op, mode }
    }
}

impl<T: Scalar, A: AnalysisLike<T>> GeneralizedProjection<T>
    for DenoiseAnalysisProjection<'_, T, A>
{
    fn project(&mut self, zhat: &CMat<T>) -> ProjectionOutcome<T> {
        let w = project_denoise_analysis(zhat, &self.y, self.epsilon, self.op, self.mode)
            .expect("projection inputs validated at construction");
        let m_w = self.op.op_apply(&w);
        ProjectionOutcome {
            estimate: Estimate::Time(w),
            m_w,
            report: ProjectionReport::closed_form(T::zero()),
        }
    }
}

pub struct DenoiseSynthesisProjection<'a, T: Scalar, D: SynthesisLike<T>> {
    y: RMat<T>,
    epsilon: T,
    op: &'a D,
    mode: RealMode,
}

impl<'a, T: Scalar, D: SynthesisLike<T>> DenoiseSynthesisProjection<'a, T, D> {
    pub fn new(y: RMat<T>, epsilon: T, op: &'a D, mode: RealMode) -> Self {
        DenoiseSynthesisProjection { y, epsilon, op, mode }
    }
}

impl<T: Scalar, D: SynthesisLike<T>> GeneralizedProjection<T>
    for DenoiseSynthesisProjection<'_, T, D>
{
    fn project(&mut self, zhat: &CMat<T>) -> ProjectionOutcome<T> {
        let w = project_denoise_synthesis(zhat, &self.y, self.epsilon, self.op, self.mode)
            .expect("projection inputs validated at construction");
        // synthesis role: M is the identity on coefficients
        let m_w = w.clone();
        ProjectionOutcome {
            estimate: Estimate::TimeFrequency(w),
            m_w,
            report: ProjectionReport::closed_form(T::zero()),
        }
    }
}

pub struct DeclipAnalysisProjection<'a, T: Scalar, A: AnalysisLike<T>> {
    mask: ClipMask<T>,
    y: RMat<T>,
    op: &'a A,
    mode: RealMode,
}

impl<'a, T: Scalar, A: AnalysisLike<T>> DeclipAnalysisProjection<'a, T, A> {
    pub fn new(mask: ClipMask<T>, y: RMat<T>, op: &'a A, mode: RealMode) -> Self {
        DeclipAnalysisProjection { mask, y, op, mode }
    }
}

impl<T: Scalar, A: AnalysisLike<T>> GeneralizedProjection<T>
    for DeclipAnalysisProjection<'_, T, A>
{
    fn project(&mut self, zhat: &CMat<T>) -> ProjectionOutcome<T> {
        let w = project_declip_analysis(zhat, &self.mask, &self.y, self.op, self.mode)
            .expect("projection inputs validated at construction");
        let m_w = self.op.op_apply(&w);
        ProjectionOutcome {
            estimate: Estimate::Time(w),
            m_w,
            report: ProjectionReport::closed_form(T::zero()),
        }
    }
}

pub struct DeclipSynthesisProjection<'a, T: Scalar, D: SynthesisLike<T>> {
    mask: ClipMask<T>,
    y: RMat<T>,
    op: &'a D,
    mode: RealMode,
    tol: T,
    max_inner: usize,
    dual: Option<RMat<T>>,
}

impl<'a, T: Scalar, D: SynthesisLike<T>> DeclipSynthesisProjection<'a, T, D> {
    pub fn new(
        mask: ClipMask<T>,
        y: RMat<T>,
        op: &'a D,
        mode: RealMode,
        tol: T,
        max_inner: usize,
    ) -> Self {
        DeclipSynthesisProjection { mask, y, op, mode, tol, max_inner, dual: None }
    }

    /// Default feasibility tolerance, relative to the observation scale.
    pub fn default_tol(y: &RMat<T>) -> T {
        T::from_f64_lit(1e-6) * fro_norm_r(y).max(T::one())
    }

    /// Drop the warm-started dual variable.
    pub fn reset(&mut self) {
        self.dual = None;
    }
}

impl<T: Scalar, D: SynthesisLike<T>> GeneralizedProjection<T>
    for DeclipSynthesisProjection<'_, T, D>
{
    fn project(&mut self, zhat: &CMat<T>) -> ProjectionOutcome<T> {
        let out = project_declip_synthesis(
            zhat,
            &self.mask,
            &self.y,
            self.op,
            self.mode,
            self.tol,
            self.max_inner,
            self.dual.take(),
        )
        .expect("projection inputs validated at construction");
        self.dual = Some(out.dual);
        let m_w = out.w.clone();
        ProjectionOutcome {
            estimate: Estimate::TimeFrequency(out.w),
            m_w,
            report: out.report,
        }
    }
}

// ---------------------------------------------------------------------------
// Oracle projection for tiny instances (test-only reference)
// ---------------------------------------------------------------------------

/// Constraint sets the oracle understands. Lifted variants apply a dense
/// synthesis matrix before the componentwise/ball constraint.
pub enum ThetaOracle<'a, T: Scalar> {
    /// No constraint (M must be injective for a unique answer).
    Whole,
    /// W = Y exactly.
    Singleton { y: &'a RMat<T> },
    /// Real W with ||W - Y||_F <= eps.
    Ball { y: &'a RMat<T>, eps: T },
    /// Real W, componentwise clip consistency.
    Clip { mask: &'a ClipMask<T>, y: &'a RMat<T> },
    /// Complex W with ||F W - Y||_F <= eps, F a tight dense synthesis matrix
    /// with F Fᴴ = xi I.
    LiftedBall { f: &'a CMat<T>, xi: T, y: &'a RMat<T>, eps: T },
    /// Complex W with realify(F W) clip-consistent.
    LiftedClip {
        f: &'a CMat<T>,
        xi: T,
        mask: &'a ClipMask<T>,
        y: &'a RMat<T>,
        mode: RealMode,
    },
}

fn dense_mul<T: Scalar>(m: &CMat<T>, x: &CMat<T>) -> CMat<T> {
    m.dot(x)
}

fn dense_adj_mul<T: Scalar>(m: &CMat<T>, x: &CMat<T>) -> CMat<T> {
    m.t().mapv(|c| c.conj()).dot(x)
}

fn to_complex<T: Scalar>(x: &RMat<T>) -> CMat<T> {
    x.mapv(|v| Complex::new(v, T::zero()))
}

fn project_theta<T: Scalar>(theta: &ThetaOracle<'_, T>, w: &CMat<T>) -> CMat<T> {
    match theta {
        ThetaOracle::Whole => w.clone(),
        ThetaOracle::Singleton { y } => to_complex(y),
        ThetaOracle::Ball { y, eps } => {
            let wr = w.mapv(|c| c.re);
            to_complex(&ball_clamp(&wr, y, *eps).0)
        }
        ThetaOracle::Clip { mask, y } => {
            let wr = w.mapv(|c| c.re);
            let mut out = wr;
            for (idx, entry) in out.indexed_iter_mut() {
                match mask.classes[idx] {
                    ClipClass::Reliable => *entry = y[idx],
                    ClipClass::ClipPos => *entry = entry.max(mask.thresholds[idx]),
                    ClipClass::ClipNeg => *entry = entry.min(-mask.thresholds[idx]),
                }
            }
            to_complex(&out)
        }
        ThetaOracle::LiftedBall { f, xi, y, eps } => {
            // exact projection onto {W : ||F W - Y|| <= eps} using F Fᴴ = xi I
            let g = dense_mul(f, w);
            let diff = &g - &to_complex(y);
            let r = fro_norm_c(&diff);
            if r <= *eps {
                return w.clone();
            }
            let shrink = (r - *eps) / (r * *xi);
            w - &dense_adj_mul(f, &diff).mapv(|c| c * shrink)
        }
        ThetaOracle::LiftedClip { f, xi, mask, y, mode } => {
            let (adj_mul, c) = realify_lift_factor::<T>(*mode);
            let g = realify(&dense_mul(f, w), *mode);
            let mut delta: RMat<T> = Array2::zeros(g.dim());
            for (idx, &gv) in g.indexed_iter() {
                delta[idx] = match mask.classes[idx] {
                    ClipClass::Reliable => y[idx] - gv,
                    ClipClass::ClipPos => (mask.thresholds[idx] - gv).max(T::zero()),
                    ClipClass::ClipNeg => (-mask.thresholds[idx] - gv).min(T::zero()),
                };
            }
            let scale = adj_mul.scale(T::one() / (c * *xi));
            w + &dense_adj_mul(f, &to_complex(&delta)).mapv(|cv| cv * scale)
        }
    }
}

fn spectral_norm_sq<T: Scalar>(m: &CMat<T>) -> T {
    // power iteration on Mᴴ M
    let n = m.ncols();
    let mut v: CMat<T> = Array2::from_elem((n, 1), Complex::new(T::one(), T::zero()));
    let mut lambda = T::one();
    for _ in 0..60 {
        let mv = dense_adj_mul(m, &dense_mul(m, &v));
        let norm = fro_norm_c(&mv);
        if norm < T::from_f64_lit(1e-30) {
            return T::one();
        }
        lambda = norm / fro_norm_c(&v).max(T::from_f64_lit(1e-30));
        v = mv.mapv(|c| c.scale(T::one() / norm));
    }
    lambda
}

/// Reference projection for tiny instances: projected gradient descent on
/// ||M W - Z||^2 over Theta, with a fixed step from the spectral norm of M.
/// Guarded to at most 64 unknowns so it stays an oracle, not a solver.
pub fn oracle_project<T: Scalar>(
    m: &CMat<T>,
    theta: &ThetaOracle<'_, T>,
    z: &CMat<T>,
    iters: usize,
) -> Result<CMat<T>> {
    if m.nrows() != z.nrows() {
        return Err(Error::dimension("M row count must match Z"));
    }
    let unknowns = m.ncols() * z.ncols();
    if unknowns > 64 {
        return Err(Error::parameter("oracle_project is limited to 64 unknowns"));
    }
    let step = T::one() / spectral_norm_sq(m).max(T::from_f64_lit(1e-12));
    let mut w: CMat<T> = project_theta(theta, &Array2::zeros((m.ncols(), z.ncols())));
    for _ in 0..iters {
        let grad = dense_adj_mul(m, &(&dense_mul(m, &w) - z));
        let candidate = &w - &grad.mapv(|c| c.scale(step));
        w = project_theta(theta, &candidate);
    }
    Ok(w)
}
