//! The generic iterative restoration procedure: alternating generalized
//! projection and shrinkage with an ADMM-style residual variable.
//!
//! One solver instance handles one block; instances are independent and
//! internally single-threaded.

use std::time::{Duration, Instant};

use ndarray::Array2;
use num_complex::Complex;

use crate::shrinkage::{next_mu, shrink, MuSchedule, ShrinkFamily};
use crate::{fro_norm_c, CMat, Error, RMat, Result, Scalar};

/// Feasibility report attached to each projection output.
#[derive(Debug, Clone, Copy)]
pub struct ProjectionReport<T> {
    /// Inner iterations spent (0 for closed forms).
    pub inner_iterations: usize,
    /// Remaining feasibility gap.
    pub residual: T,
    pub converged: bool,
}

impl<T: Scalar> ProjectionReport<T> {
    pub fn closed_form(residual: T) -> Self {
        ProjectionReport { inner_iterations: 0, residual, converged: true }
    }
}

/// The estimate a projection produces: time frames for the analysis role,
/// time-frequency coefficients for the synthesis role.
#[derive(Debug, Clone)]
pub enum Estimate<T> {
    Time(RMat<T>),
    TimeFrequency(CMat<T>),
}

impl<T: Scalar> Estimate<T> {
    pub fn as_time(&self) -> Option<&RMat<T>> {
        match self {
            Estimate::Time(m) => Some(m),
            Estimate::TimeFrequency(_) => None,
        }
    }

    pub fn as_tf(&self) -> Option<&CMat<T>> {
        match self {
            Estimate::TimeFrequency(m) => Some(m),
            Estimate::Time(_) => None,
        }
    }
}

/// Output of one projection step: the constrained estimate W together with
/// M W in the time-frequency domain.
pub struct ProjectionOutcome<T> {
    pub estimate: Estimate<T>,
    pub m_w: CMat<T>,
    pub report: ProjectionReport<T>,
}

/// A generalized projection P_{Theta,M}. Implementations may keep warm-start
/// state across calls, hence `&mut self`.
pub trait GeneralizedProjection<T: Scalar> {
    fn project(&mut self, zhat: &CMat<T>) -> ProjectionOutcome<T>;
}

/// Full parameterization of the generic procedure.
pub struct GenericProblem<'a, T: Scalar> {
    pub projection: &'a mut dyn GeneralizedProjection<T>,
    pub family: ShrinkFamily,
    pub schedule: MuSchedule<T>,
    pub mu0: T,
    pub z0: CMat<T>,
    pub beta: T,
    pub i_max: usize,
    /// Wall-clock budget; exceeding it flags non-convergence.
    pub budget: Option<Duration>,
    pub collect_trace: bool,
}

/// One row of the iteration trace.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow<T> {
    pub iteration: usize,
    pub mu: T,
    pub residual_ratio: T,
}

#[derive(Debug, Clone)]
pub struct SolverResult<T> {
    pub estimate: Estimate<T>,
    pub mu_final: T,
    pub z_final: CMat<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Projection warnings (iterative inner solvers that did not converge).
    pub projection_warnings: usize,
    pub trace: Vec<TraceRow<T>>,
}

/// Run the alternating projection/shrinkage iteration until the relative
/// residual drops below beta or the iteration cap is hit.
pub fn run_generic<T: Scalar>(problem: GenericProblem<'_, T>) -> Result<SolverResult<T>> {
    if problem.beta <= T::zero() {
        return Err(Error::parameter("beta must be positive"));
    }
    if problem.i_max == 0 {
        return Err(Error::parameter("i_max must be at least 1"));
    }
    let start = Instant::now();
    let dims = problem.z0.dim();
    let mut z = problem.z0.clone();
    let mut u: CMat<T> = Array2::from_elem(dims, Complex::new(T::zero(), T::zero()));
    let mut mu = problem.mu0;
    let mut trace = Vec::new();
    let mut warnings = 0usize;
    let mut last_estimate: Option<Estimate<T>> = None;
    let mut converged = false;
    let mut iterations = 0usize;
    let tiny = T::from_f64_lit(1e-12);

    for i in 1..=problem.i_max {
        iterations = i;
        let zhat = &z - &u;
        let outcome = problem.projection.project(&zhat);
        if !outcome.report.converged {
            warnings += 1;
        }
        let m_w = outcome.m_w;
        last_estimate = Some(outcome.estimate);

        let shrink_input = &m_w + &u;
        z = shrink(&problem.family, &shrink_input, mu)?;

        let diff = &m_w - &z;
        let denom = fro_norm_c(&m_w);
        let ratio = if denom < tiny { T::zero() } else { fro_norm_c(&diff) / denom };
        if problem.collect_trace {
            trace.push(TraceRow { iteration: i, mu, residual_ratio: ratio });
        }
        if ratio <= problem.beta {
            converged = true;
            break;
        }
        u = &u + &diff;
        mu = next_mu(&problem.schedule, mu);

        if let Some(budget) = problem.budget {
            if start.elapsed() > budget {
                break;
            }
        }
    }

    Ok(SolverResult {
        estimate: last_estimate.expect("at least one iteration ran"),
        mu_final: mu,
        z_final: z,
        iterations,
        converged,
        projection_warnings: warnings,
        trace,
    })
}
