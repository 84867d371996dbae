//! Time-frequency sparse / cosparse audio restoration.
//!
//! The crate implements a single iterative scheme (alternating generalized
//! projection and shrinkage with an ADMM-style residual) and instantiates it
//! four ways: plain or social sparsity, analysis (cosparse) or synthesis
//! model, applied to audio denoising and declipping.
//!
//! Core math is generic over the scalar type through the [`Scalar`] trait
//! (`f32` or `f64`); concrete aliases are exported at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::Array2;
use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

pub mod frames;
pub mod projections;
pub mod restoration;
pub mod shrinkage;
pub mod solver;
pub mod transforms;

/// Floating-point scalar the whole crate is generic over.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + rustfft::FftNum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Shorthand for lossless construction from an `f64` literal.
    fn from_f64_lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Real matrix (rows x columns).
pub type RMat<T> = Array2<T>;
/// Complex matrix, the shape time-frequency data lives in.
pub type CMat<T> = Array2<Complex<T>>;

pub type RMat32 = RMat<f32>;
pub type RMat64 = RMat<f64>;
pub type CMat32 = CMat<f32>;
pub type CMat64 = CMat<f64>;
pub type Signal32 = frames::Signal<f32>;
pub type Signal64 = frames::Signal<f64>;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn parameter(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
    pub fn index(msg: impl Into<String>) -> Self {
        Error::Index(msg.into())
    }
}

/// Frobenius norm of a complex matrix.
pub(crate) fn fro_norm_c<T: Scalar>(m: &CMat<T>) -> T {
    m.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// Frobenius norm of a real matrix.
pub(crate) fn fro_norm_r<T: Scalar>(m: &RMat<T>) -> T {
    m.iter().map(|&v| v * v).sum::<T>().sqrt()
}
