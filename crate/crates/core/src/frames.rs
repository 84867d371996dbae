//! Windowed framing, block assembly and normalized overlap-add.
//!
//! Frames are taken at 75% overlap (hop = L/4). A block gathers the 2b+1
//! frames centered on frame n; out-of-range neighbors are edge-replicated.

use ndarray::{s, Array2};

use crate::{Error, RMat, Result, Scalar};

/// A mono time-domain signal.
#[derive(Debug, Clone)]
pub struct Signal<T> {
    pub samples: Vec<T>,
    pub sample_rate: u32,
}

impl<T: Scalar> Signal<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::parameter("signal must contain at least one sample"));
        }
        if sample_rate == 0 {
            return Err(Error::parameter("sample rate must be positive"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::parameter("signal contains NaN or Inf"));
        }
        Ok(Signal { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Hann,
    Sine,
    Rectangular,
}

impl WindowKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "hann" => Ok(WindowKind::Hann),
            "sine" => Ok(WindowKind::Sine),
            "rectangular" | "rect" => Ok(WindowKind::Rectangular),
            other => Err(Error::parameter(format!("unknown window kind `{other}`"))),
        }
    }
}

/// Analysis/synthesis window of length L.
#[derive(Debug, Clone)]
pub struct Window<T> {
    pub coefficients: Vec<T>,
    pub kind: WindowKind,
}

impl<T: Scalar> Window<T> {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    /// Sum of the window coefficients (used by the denoising epsilon rule).
    pub fn sum(&self) -> T {
        self.coefficients.iter().copied().sum()
    }

    /// Sum of squared coefficients.
    pub fn sum_sq(&self) -> T {
        self.coefficients.iter().map(|&w| w * w).sum()
    }

    /// Deviation from constant overlap-add of the squared window at the
    /// given hop, ignoring the first and last window-length of samples.
    /// Zero (up to rounding) means the squared window tiles the line evenly,
    /// which is what the normalized overlap-add relies on.
    pub fn cola_sq_deviation(&self, hop: usize) -> T {
        let len = self.len();
        let span = 4 * len;
        let mut acc = vec![T::zero(); span];
        let mut start = 0usize;
        while start + len <= span {
            for (j, &w) in self.coefficients.iter().enumerate() {
                acc[start + j] += w * w;
            }
            start += hop;
        }
        let interior = &acc[len..span - 2 * len];
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for &v in interior {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi - lo
    }
}

/// Build a window of the requested kind. Hann is periodic; the sine window
/// uses half-sample offsets so its square tiles evenly at hop L/4.
pub fn make_window<T: Scalar>(kind: WindowKind, len: usize) -> Result<Window<T>> {
    if len < 4 || !len.is_multiple_of(4) {
        return Err(Error::parameter(format!(
            "frame length must be >= 4 and divisible by 4, got {len}"
        )));
    }
    let lf = T::from_usize(len).unwrap();
    let coefficients = match kind {
        WindowKind::Rectangular => vec![T::one(); len],
        WindowKind::Hann => (0..len)
            .map(|j| {
                let phase = T::from_f64_lit(2.0) * T::PI() * T::from_usize(j).unwrap() / lf;
                T::from_f64_lit(0.5) * (T::one() - phase.cos())
            })
            .collect(),
        WindowKind::Sine => (0..len)
            .map(|j| {
                let arg = T::PI() * (T::from_usize(j).unwrap() + T::from_f64_lit(0.5)) / lf;
                arg.sin()
            })
            .collect(),
    };
    Ok(Window { coefficients, kind })
}

/// Windowed frames of a signal, one frame per column.
#[derive(Debug, Clone)]
pub struct FrameGrid<T> {
    /// L x N matrix, column n = window o signal[n*hop .. n*hop+L].
    pub frames: RMat<T>,
    pub hop: usize,
    pub window: Window<T>,
    pub original_length: usize,
}

impl<T: Scalar> FrameGrid<T> {
    pub fn frame_len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn num_frames(&self) -> usize {
        self.frames.ncols()
    }
}

/// 2b+1 adjacent frames around frame `center_index`, one restoration unit.
#[derive(Debug, Clone)]
pub struct FrameBlock<T> {
    /// L x (2b+1); column j corresponds to frame center_index - b + j,
    /// clamped to the valid frame range.
    pub columns: RMat<T>,
    pub center_index: usize,
    pub b: usize,
}

impl<T: Scalar> FrameBlock<T> {
    pub fn width(&self) -> usize {
        2 * self.b + 1
    }

    pub fn frame_len(&self) -> usize {
        self.columns.nrows()
    }
}

/// Number of frames for a signal of `len` samples, frame length L, hop L/4.
pub fn num_frames(len: usize, frame_len: usize, hop: usize) -> usize {
    if len <= frame_len {
        1
    } else {
        (len - frame_len).div_ceil(hop) + 1
    }
}

/// Slice the signal into windowed frames at 75% overlap, zero-padding the
/// tail.
pub fn analyze_frames<T: Scalar>(
    signal: &Signal<T>,
    frame_len: usize,
    window: &Window<T>,
) -> Result<FrameGrid<T>> {
    if frame_len < 4 || !frame_len.is_multiple_of(4) {
        return Err(Error::parameter("frame length must be >= 4 and divisible by 4"));
    }
    if window.len() != frame_len {
        return Err(Error::dimension(format!(
            "window length {} != frame length {}",
            window.len(),
            frame_len
        )));
    }
    let hop = frame_len / 4;
    let n = num_frames(signal.len(), frame_len, hop);
    let mut frames = Array2::zeros((frame_len, n));
    for col in 0..n {
        let start = col * hop;
        for j in 0..frame_len {
            let t = start + j;
            if t < signal.len() {
                frames[(j, col)] = window.coefficients[j] * signal.samples[t];
            }
        }
    }
    Ok(FrameGrid {
        frames,
        hop,
        window: window.clone(),
        original_length: signal.len(),
    })
}

/// Gather the 2b+1 frames around frame `n`, replicating edge frames.
pub fn extract_block<T: Scalar>(grid: &FrameGrid<T>, n: usize, b: usize) -> Result<FrameBlock<T>> {
    let total = grid.num_frames();
    if n >= total {
        return Err(Error::index(format!("frame index {n} out of range 0..{total}")));
    }
    let width = 2 * b + 1;
    let mut columns = Array2::zeros((grid.frame_len(), width));
    for j in 0..width {
        let idx = (n as isize - b as isize + j as isize).clamp(0, total as isize - 1) as usize;
        columns.slice_mut(s![.., j]).assign(&grid.frames.column(idx));
    }
    Ok(FrameBlock { columns, center_index: n, b })
}

/// Column b+1 (1-based) of the block: the frame the block is centered on.
pub fn center_column<T: Scalar>(block: &FrameBlock<T>) -> Vec<T> {
    block.columns.column(block.b).to_vec()
}

/// Weighted least-squares overlap-add: per-frame estimates are assumed to be
/// windowed once, so each contribution is re-weighted by the window and the
/// accumulated squared-window envelope divides the sum.
pub fn overlap_add<T: Scalar>(
    frames: &RMat<T>,
    hop: usize,
    window: &Window<T>,
    original_length: usize,
) -> Result<Signal<T>> {
    let frame_len = frames.nrows();
    if window.len() != frame_len {
        return Err(Error::dimension("window length != frame length"));
    }
    let n = frames.ncols();
    let padded = (n - 1) * hop + frame_len;
    let mut num = vec![T::zero(); padded];
    let mut den = vec![T::zero(); padded];
    for col in 0..n {
        let start = col * hop;
        for j in 0..frame_len {
            let w = window.coefficients[j];
            num[start + j] += w * frames[(j, col)];
            den[start + j] += w * w;
        }
    }
    let floor = T::from_f64_lit(1e-12);
    let samples = (0..original_length.min(padded))
        .map(|t| num[t] / den[t].max(floor))
        .collect::<Vec<_>>();
    Ok(Signal { samples, sample_rate: 0 })
}

impl<T: Scalar> Signal<T> {
    /// Overlap-add output carries no rate; reattach the source's.
    pub fn with_sample_rate(mut self, rate: u32) -> Signal<T> {
        self.sample_rate = rate;
        self
    }
}
