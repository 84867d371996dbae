//! Redundant DFT analysis and synthesis operators.
//!
//! The analysis operator A (P x L, P = R*L) has entries
//! A_pl = P^{-1/2} exp(-j 2 pi p l / P), so AᴴA = I; the synthesis operator
//! D (L x S, S = R*L) has D_ls = S^{-1/2} exp(+j 2 pi l s / S), so DDᴴ = I.
//! Applications go through zero-padded FFTs of size P (resp. S), adjoints
//! through truncated inverse FFTs.

use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::{CMat, Error, RMat, Result, Scalar};

/// How a complex time-domain estimate is folded back to a real one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RealMode {
    /// Re(v) - Im(v), the substitution used alongside complex transforms.
    #[default]
    ReMinusIm,
    /// Plain real part.
    ReOnly,
}

impl RealMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "re_minus_im" => Ok(RealMode::ReMinusIm),
            "re_only" => Ok(RealMode::ReOnly),
            other => Err(Error::parameter(format!("unknown real mode `{other}`"))),
        }
    }
}

/// Entrywise real extraction of a complex matrix under the given mode.
pub fn realify<T: Scalar>(v: &CMat<T>, mode: RealMode) -> RMat<T> {
    match mode {
        RealMode::ReMinusIm => v.mapv(|z| z.re - z.im),
        RealMode::ReOnly => v.mapv(|z| z.re),
    }
}

fn check_pow2(len: usize) -> Result<()> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::parameter(format!(
            "frame length must be a power of two, got {len}"
        )));
    }
    Ok(())
}

/// Forward redundant DFT, a tight frame with AᴴA = I.
pub struct AnalysisOperator<T: Scalar> {
    pub frame_len: usize,
    pub redundancy: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Scalar> AnalysisOperator<T> {
    pub fn new(frame_len: usize, redundancy: usize) -> Result<Self> {
        check_pow2(frame_len)?;
        if redundancy == 0 {
            return Err(Error::parameter("redundancy must be positive"));
        }
        let p = frame_len * redundancy;
        let mut planner = FftPlanner::new();
        Ok(AnalysisOperator {
            frame_len,
            redundancy,
            forward: planner.plan_fft_forward(p),
            inverse: planner.plan_fft_inverse(p),
        })
    }

    /// Number of analysis coefficients P = R * L.
    pub fn coeff_len(&self) -> usize {
        self.frame_len * self.redundancy
    }

    /// A X: column-wise zero-padded FFT scaled by P^{-1/2}.
    pub fn apply(&self, x: &RMat<T>) -> Result<CMat<T>> {
        if x.nrows() != self.frame_len {
            return Err(Error::dimension(format!(
                "expected {} rows, got {}",
                self.frame_len,
                x.nrows()
            )));
        }
        let p = self.coeff_len();
        let scale = T::one() / T::from_usize(p).unwrap().sqrt();
        let mut out = Array2::zeros((p, x.ncols()));
        let mut buf = vec![Complex::new(T::zero(), T::zero()); p];
        for col in 0..x.ncols() {
            for v in buf.iter_mut() {
                *v = Complex::new(T::zero(), T::zero());
            }
            for (j, &v) in x.column(col).iter().enumerate() {
                buf[j] = Complex::new(v, T::zero());
            }
            self.forward.process(&mut buf);
            for (i, &v) in buf.iter().enumerate() {
                out[(i, col)] = v * scale;
            }
        }
        Ok(out)
    }

    /// Aᴴ Z: inverse FFT of size P, truncated to L, scaled so AᴴA = I.
    pub fn adjoint(&self, z: &CMat<T>) -> Result<CMat<T>> {
        let p = self.coeff_len();
        if z.nrows() != p {
            return Err(Error::dimension(format!(
                "expected {} rows, got {}",
                p,
                z.nrows()
            )));
        }
        let scale = T::one() / T::from_usize(p).unwrap().sqrt();
        let mut out = Array2::zeros((self.frame_len, z.ncols()));
        let mut buf = vec![Complex::new(T::zero(), T::zero()); p];
        for col in 0..z.ncols() {
            for (i, v) in buf.iter_mut().enumerate() {
                *v = z[(i, col)];
            }
            self.inverse.process(&mut buf);
            for j in 0..self.frame_len {
                out[(j, col)] = buf[j] * scale;
            }
        }
        Ok(out)
    }
}

/// Inverse redundant DFT, a tight frame with DDᴴ = I.
pub struct SynthesisOperator<T: Scalar> {
    pub frame_len: usize,
    pub redundancy: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Scalar> SynthesisOperator<T> {
    pub fn new(frame_len: usize, redundancy: usize) -> Result<Self> {
        check_pow2(frame_len)?;
        if redundancy == 0 {
            return Err(Error::parameter("redundancy must be positive"));
        }
        let s = frame_len * redundancy;
        let mut planner = FftPlanner::new();
        Ok(SynthesisOperator {
            frame_len,
            redundancy,
            forward: planner.plan_fft_forward(s),
            inverse: planner.plan_fft_inverse(s),
        })
    }

    /// Number of synthesis coefficients S = R * L.
    pub fn coeff_len(&self) -> usize {
        self.frame_len * self.redundancy
    }

    /// D W: inverse FFT of size S truncated to L, scaled by S^{-1/2}.
    pub fn apply(&self, w: &CMat<T>) -> Result<CMat<T>> {
        let s = self.coeff_len();
        if w.nrows() != s {
            return Err(Error::dimension(format!(
                "expected {} rows, got {}",
                s,
                w.nrows()
            )));
        }
        let scale = T::one() / T::from_usize(s).unwrap().sqrt();
        let mut out = Array2::zeros((self.frame_len, w.ncols()));
        let mut buf = vec![Complex::new(T::zero(), T::zero()); s];
        for col in 0..w.ncols() {
            for (i, v) in buf.iter_mut().enumerate() {
                *v = w[(i, col)];
            }
            self.inverse.process(&mut buf);
            for j in 0..self.frame_len {
                out[(j, col)] = buf[j] * scale;
            }
        }
        Ok(out)
    }

    /// Dᴴ X: zero-padded forward FFT of size S, scaled by S^{-1/2}.
    pub fn adjoint_real(&self, x: &RMat<T>) -> Result<CMat<T>> {
        self.adjoint(&x.mapv(|v| Complex::new(v, T::zero())))
    }

    pub fn adjoint(&self, x: &CMat<T>) -> Result<CMat<T>> {
        if x.nrows() != self.frame_len {
            return Err(Error::dimension(format!(
                "expected {} rows, got {}",
                self.frame_len,
                x.nrows()
            )));
        }
        let s = self.coeff_len();
        let scale = T::one() / T::from_usize(s).unwrap().sqrt();
        let mut out = Array2::zeros((s, x.ncols()));
        let mut buf = vec![Complex::new(T::zero(), T::zero()); s];
        for col in 0..x.ncols() {
            for v in buf.iter_mut() {
                *v = Complex::new(T::zero(), T::zero());
            }
            for (j, v) in x.column(col).iter().enumerate() {
                buf[j] = *v;
            }
            self.forward.process(&mut buf);
            for (i, &v) in buf.iter().enumerate() {
                out[(i, col)] = v * scale;
            }
        }
        Ok(out)
    }
}

/// Abstraction over analysis-like tight frames M with MᴴM = zeta * I, so the
/// closed-form projections also cover dense non-unit-zeta operators.
pub trait AnalysisLike<T: Scalar>: Sync {
    fn coeff_rows(&self) -> usize;
    fn time_rows(&self) -> usize;
    /// zeta with MᴴM = zeta * I.
    fn zeta(&self) -> T;
    fn op_apply(&self, x: &RMat<T>) -> CMat<T>;
    fn op_adjoint(&self, z: &CMat<T>) -> CMat<T>;
}

impl<T: Scalar> AnalysisLike<T> for AnalysisOperator<T> {
    fn coeff_rows(&self) -> usize {
        self.coeff_len()
    }
    fn time_rows(&self) -> usize {
        self.frame_len
    }
    fn zeta(&self) -> T {
        T::one()
    }
    fn op_apply(&self, x: &RMat<T>) -> CMat<T> {
        self.apply(x).expect("dimension checked by caller")
    }
    fn op_adjoint(&self, z: &CMat<T>) -> CMat<T> {
        self.adjoint(z).expect("dimension checked by caller")
    }
}

/// Abstraction over synthesis-like co-isometries F with FFᴴ = xi * I.
pub trait SynthesisLike<T: Scalar>: Sync {
    fn coeff_rows(&self) -> usize;
    fn time_rows(&self) -> usize;
    /// xi with FFᴴ = xi * I.
    fn xi(&self) -> T;
    fn op_apply(&self, w: &CMat<T>) -> CMat<T>;
    fn op_adjoint_real(&self, x: &RMat<T>) -> CMat<T>;
}

impl<T: Scalar> SynthesisLike<T> for SynthesisOperator<T> {
    fn coeff_rows(&self) -> usize {
        self.coeff_len()
    }
    fn time_rows(&self) -> usize {
        self.frame_len
    }
    fn xi(&self) -> T {
        T::one()
    }
    fn op_apply(&self, w: &CMat<T>) -> CMat<T> {
        self.apply(w).expect("dimension checked by caller")
    }
    fn op_adjoint_real(&self, x: &RMat<T>) -> CMat<T> {
        self.adjoint_real(x).expect("dimension checked by caller")
    }
}

/// Dense DFT-matrix twins of the fast operators, for cross-checking and for
/// synthetic non-unit frame constants in tests.
pub mod dense {
    use super::*;

    /// Dense analysis matrix, optionally rescaled so AᴴA = zeta I.
    pub struct DenseAnalysis<T: Scalar> {
        pub matrix: CMat<T>,
        pub zeta: T,
    }

    impl<T: Scalar> DenseAnalysis<T> {
        pub fn dft(frame_len: usize, redundancy: usize, zeta: T) -> Self {
            let p = frame_len * redundancy;
            let scale = (zeta / T::from_usize(p).unwrap()).sqrt();
            let mut matrix = Array2::zeros((p, frame_len));
            let two_pi = T::from_f64_lit(2.0) * T::PI();
            for row in 0..p {
                for colx in 0..frame_len {
                    let ang = -two_pi * T::from_usize(row * colx).unwrap() / T::from_usize(p).unwrap();
                    matrix[(row, colx)] = Complex::new(ang.cos(), ang.sin()) * scale;
                }
            }
            DenseAnalysis { matrix, zeta }
        }
    }

    impl<T: Scalar> AnalysisLike<T> for DenseAnalysis<T> {
        fn coeff_rows(&self) -> usize {
            self.matrix.nrows()
        }
        fn time_rows(&self) -> usize {
            self.matrix.ncols()
        }
        fn zeta(&self) -> T {
            self.zeta
        }
        fn op_apply(&self, x: &RMat<T>) -> CMat<T> {
            let xc = x.mapv(|v| Complex::new(v, T::zero()));
            self.matrix.dot(&xc)
        }
        fn op_adjoint(&self, z: &CMat<T>) -> CMat<T> {
            let ah = self.matrix.t().mapv(|v| v.conj());
            ah.dot(z)
        }
    }

    /// Dense synthesis matrix with DDᴴ = xi I.
    pub struct DenseSynthesis<T: Scalar> {
        pub matrix: CMat<T>,
        pub xi: T,
    }

    impl<T: Scalar> DenseSynthesis<T> {
        pub fn dft(frame_len: usize, redundancy: usize, xi: T) -> Self {
            let s = frame_len * redundancy;
            let scale = (xi / T::from_usize(s).unwrap()).sqrt();
            let mut matrix = Array2::zeros((frame_len, s));
            let two_pi = T::from_f64_lit(2.0) * T::PI();
            for row in 0..frame_len {
                for colx in 0..s {
                    let ang = two_pi * T::from_usize(row * colx).unwrap() / T::from_usize(s).unwrap();
                    matrix[(row, colx)] = Complex::new(ang.cos(), ang.sin()) * scale;
                }
            }
            DenseSynthesis { matrix, xi }
        }
    }

    impl<T: Scalar> SynthesisLike<T> for DenseSynthesis<T> {
        fn coeff_rows(&self) -> usize {
            self.matrix.ncols()
        }
        fn time_rows(&self) -> usize {
            self.matrix.nrows()
        }
        fn xi(&self) -> T {
            self.xi
        }
        fn op_apply(&self, w: &CMat<T>) -> CMat<T> {
            self.matrix.dot(w)
        }
        fn op_adjoint_real(&self, x: &RMat<T>) -> CMat<T> {
            let xc = x.mapv(|v| Complex::new(v, T::zero()));
            let dh = self.matrix.t().mapv(|v| v.conj());
            dh.dot(&xc)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::dense::{DenseAnalysis, DenseSynthesis};
    use super::*;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_real(rows: usize, cols: usize, seed: u64) -> RMat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
    }

    fn rand_complex(rows: usize, cols: usize, seed: u64) -> CMat<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| {
            Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn analysis_delta_all_coeffs_half() {
        // L = P = 4, x = delta_0 -> all four coefficients = 1/2
        let a = AnalysisOperator::<f64>::new(4, 1).unwrap();
        let mut x = Array2::zeros((4, 1));
        x[(0, 0)] = 1.0;
        let z = a.apply(&x).unwrap();
        for i in 0..4 {
            assert!((z[(i, 0)] - Complex::new(0.5, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn analysis_parseval_and_round_trip() {
        for (l, r) in [(4usize, 1usize), (64, 2), (512, 4), (1024, 2)] {
            let a = AnalysisOperator::<f64>::new(l, r).unwrap();
            let x = rand_real(l, 3, 7);
            let z = a.apply(&x).unwrap();
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nz = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            assert!((nx - nz).abs() / nx < 1e-10, "Parseval failed L={l} R={r}");
            let back = a.adjoint(&z).unwrap();
            for (i, &v) in x.indexed_iter() {
                assert!((back[i].re - v).abs() < 1e-10);
                assert!(back[i].im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn synthesis_co_isometry() {
        for (l, r) in [(4usize, 1usize), (64, 2), (512, 4), (1024, 2)] {
            let d = SynthesisOperator::<f64>::new(l, r).unwrap();
            let x = rand_real(l, 2, 11);
            let w = d.adjoint_real(&x).unwrap();
            let back = d.apply(&w).unwrap();
            for (i, &v) in x.indexed_iter() {
                assert!((back[i].re - v).abs() < 1e-10, "DDᴴ failed L={l} R={r}");
                assert!(back[i].im.abs() < 1e-10);
            }
        }
    }

    #[test]
    fn adjoint_inner_product_identity_vs_dense() {
        // <Ax, z> = <x, Aᴴz> and fast == dense, L <= 16
        let l = 8;
        let r = 2;
        let a = AnalysisOperator::<f64>::new(l, r).unwrap();
        let da = DenseAnalysis::dft(l, r, 1.0);
        let x = rand_real(l, 1, 3);
        let z = rand_complex(l * r, 1, 4);
        let ax = a.apply(&x).unwrap();
        let ax_dense = da.op_apply(&x);
        for (i, v) in ax.indexed_iter() {
            assert!((v - ax_dense[i]).norm() < 1e-10);
        }
        let ahz = a.adjoint(&z).unwrap();
        let ahz_dense = da.op_adjoint(&z);
        for (i, v) in ahz.indexed_iter() {
            assert!((v - ahz_dense[i]).norm() < 1e-10);
        }
        let lhs: Complex<f64> = ax
            .iter()
            .zip(z.iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        let rhs: Complex<f64> = x
            .iter()
            .zip(ahz.iter())
            .map(|(&a, b)| Complex::new(a, 0.0).conj() * b)
            .sum();
        assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn synthesis_fast_matches_dense() {
        let l = 8;
        let r = 2;
        let d = SynthesisOperator::<f64>::new(l, r).unwrap();
        let dd = DenseSynthesis::dft(l, r, 1.0);
        let w = rand_complex(l * r, 2, 9);
        let fast = d.apply(&w).unwrap();
        let dense = dd.op_apply(&w);
        for (i, v) in fast.indexed_iter() {
            assert!((v - dense[i]).norm() < 1e-10);
        }
        let x = rand_real(l, 2, 10);
        let fast = d.adjoint_real(&x).unwrap();
        let dense = dd.op_adjoint_real(&x);
        for (i, v) in fast.indexed_iter() {
            assert!((v - dense[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn r1_analysis_synthesis_are_inverse() {
        // AD = I when P = S = L
        let l = 16;
        let a = AnalysisOperator::<f64>::new(l, 1).unwrap();
        let d = SynthesisOperator::<f64>::new(l, 1).unwrap();
        let x = rand_real(l, 1, 21);
        let z = a.apply(&x).unwrap();
        let back = d.apply(&z).unwrap();
        for (i, &v) in x.indexed_iter() {
            assert!((back[i].re - v).abs() < 1e-10);
            assert!(back[i].im.abs() < 1e-10);
        }
    }

    #[test]
    fn realify_modes() {
        let v = Array2::from_elem((1, 1), Complex::new(3.0, 4.0));
        assert_eq!(realify(&v, RealMode::ReMinusIm)[(0, 0)], -1.0);
        assert_eq!(realify(&v, RealMode::ReOnly)[(0, 0)], 3.0);
        // real input unchanged under both modes
        let r = Array2::from_elem((1, 1), Complex::new(2.5, 0.0));
        assert_eq!(realify(&r, RealMode::ReMinusIm)[(0, 0)], 2.5);
        assert_eq!(realify(&r, RealMode::ReOnly)[(0, 0)], 2.5);
    }

    #[test]
    fn realify_modes_agree_on_conjugate_symmetric_spectra() {
        // Z = A x for real x has Im(AᴴZ) = 0
        let a = AnalysisOperator::<f64>::new(16, 2).unwrap();
        let x = rand_real(16, 1, 33);
        let z = a.apply(&x).unwrap();
        let v = a.adjoint(&z).unwrap();
        let m1 = realify(&v, RealMode::ReMinusIm);
        let m2 = realify(&v, RealMode::ReOnly);
        for (i, &a) in m1.indexed_iter() {
            assert!((a - m2[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn non_power_of_two_rejected() {
        assert!(AnalysisOperator::<f64>::new(12, 2).is_err());
        assert!(SynthesisOperator::<f64>::new(0, 2).is_err());
    }

    #[test]
    fn dense_zeta_scaling() {
        let zeta = 2.5;
        let da = DenseAnalysis::dft(8, 2, zeta);
        let x = rand_real(8, 1, 5);
        let z = da.op_apply(&x);
        let back = da.op_adjoint(&z);
        // AᴴA = zeta I
        for (i, &v) in x.indexed_iter() {
            assert!((back[i].re - zeta * v).abs() < 1e-10);
        }
    }
}
