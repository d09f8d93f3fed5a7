//! Time-domain integration of the linearised OPO equations.
//!
//! The mean field is integrated with classical RK4; the fluctuations are a
//! linear SDE on the intracavity quadratures driven by unit white noise on
//! the seed and loss ports. Two integrators are provided: Euler–Maruyama and
//! an exact discretisation (Van Loan) that also integrates the output over
//! each step, so a vacuum output has sample variance exactly 1.

use nalgebra::{Matrix2, SMatrix, SVector, SymmetricEigen, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::params::{Efficiency, OpoParams, QuadPair};
use crate::psd::{welch, PsdError};
use crate::spectra::SpectrumTrace;
use crate::steadystate::drift_matrix;

/// Upper bound on dt·κ.
pub const MAX_STEP_KAPPA: f64 = 0.05;
/// Minimum number of integration steps per run.
pub const MIN_STEPS: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("mean field not converged at t_end: estimated relative change {0:.3e}")]
    NotConverged(f64),
    #[error("dt * kappa = {0} exceeds {MAX_STEP_KAPPA}")]
    StepTooLarge(f64),
    #[error("run has {0} steps, fewer than {MIN_STEPS}")]
    TooShort(usize),
    #[error("invalid simulation setting: {0}")]
    Invalid(&'static str),
    #[error(transparent)]
    Psd(#[from] PsdError),
}

/// Slowest relaxation rate of the linear drift, κ − Re√(χ² − Δ²).
pub fn slowest_decay_rate(params: &OpoParams) -> f64 {
    let disc = params.chi * params.chi - params.detuning * params.detuning;
    params.kappa() - disc.max(0.0).sqrt()
}

/// Integrates the deterministic mean field from an empty cavity to `t_end`
/// and returns the output quadratures.
pub fn integrate_mean(
    params: &OpoParams,
    seed_in: QuadPair,
    t_end: f64,
) -> Result<QuadPair, DynamicsError> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(DynamicsError::Invalid("t_end must be positive"));
    }
    let m = drift_matrix(params);
    let s = (2.0 * params.kappa_s).sqrt();
    let b = Vector2::new(seed_in.x_plus, seed_in.x_minus) * s;
    let f = |x: &Vector2<f64>| m * x + b;

    let fastest = params.kappa() + params.chi + params.detuning.abs();
    let steps = (t_end * fastest / MAX_STEP_KAPPA).ceil().max(1.0) as usize;
    let h = t_end / steps as f64;
    let mut x = Vector2::zeros();
    for _ in 0..steps {
        let k1 = f(&x);
        let k2 = f(&(x + k1 * (h / 2.0)));
        let k3 = f(&(x + k2 * (h / 2.0)));
        let k4 = f(&(x + k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }

    let remaining = f(&x).norm() / slowest_decay_rate(params);
    let scale = x.norm();
    let rel = if remaining == 0.0 {
        0.0
    } else {
        remaining / scale
    };
    if !(rel <= 1e-10) {
        return Err(DynamicsError::NotConverged(rel));
    }
    Ok(QuadPair::new(
        s * x[0] - seed_in.x_plus,
        s * x[1] - seed_in.x_minus,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// Exact discretisation of the linear SDE including the output integral.
    #[default]
    Exact,
    EulerMaruyama,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Integration step (s).
    pub dt: f64,
    /// Recorded duration after burn-in (s).
    pub duration: f64,
    pub seed_value: u64,
    pub params: OpoParams,
    /// Keep every k-th output sample.
    pub record_decimation: usize,
    pub integrator: Integrator,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(DynamicsError::Invalid("dt must be positive"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(DynamicsError::Invalid("duration must be positive"));
        }
        if self.record_decimation == 0 {
            return Err(DynamicsError::Invalid(
                "record_decimation must be at least 1",
            ));
        }
        let dk = self.dt * self.params.kappa();
        if dk > MAX_STEP_KAPPA {
            return Err(DynamicsError::StepTooLarge(dk));
        }
        let steps = self.steps();
        if steps < MIN_STEPS {
            return Err(DynamicsError::TooShort(steps));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

/// Output quadrature fluctuations, scaled so vacuum has unit sample variance.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub t: Vec<f64>,
    pub x_minus_out: Vec<f64>,
    pub x_plus_out: Vec<f64>,
}

impl TimeSeries {
    pub fn sample_interval(&self) -> Option<f64> {
        (self.t.len() >= 2).then(|| self.t[1] - self.t[0])
    }
}

type Mat6 = SMatrix<f64, 6, 6>;
type Mat6x2 = SMatrix<f64, 6, 2>;

/// One-step transition for the augmented state (x, ∫x, W_seed).
struct ExactStep {
    /// Maps x_k to the mean of the augmented state after one step.
    transition: Mat6x2,
    /// Square root of the one-step noise covariance.
    noise: Mat6,
}

impl ExactStep {
    fn new(params: &OpoParams, dt: f64) -> Self {
        let m = drift_matrix(params);
        let s = (2.0 * params.kappa_s).sqrt();
        let l = (2.0 * params.kappa_l).sqrt();
        let mut f = Mat6::zeros();
        f.fixed_view_mut::<2, 2>(0, 0).copy_from(&m);
        f.fixed_view_mut::<2, 2>(2, 0)
            .copy_from(&Matrix2::identity());
        let mut g = SMatrix::<f64, 6, 4>::zeros();
        g.fixed_view_mut::<2, 2>(0, 0)
            .copy_from(&(Matrix2::identity() * s));
        g.fixed_view_mut::<2, 2>(0, 2)
            .copy_from(&(Matrix2::identity() * l));
        g.fixed_view_mut::<2, 2>(4, 0)
            .copy_from(&Matrix2::identity());

        let mut van_loan = SMatrix::<f64, 12, 12>::zeros();
        van_loan.fixed_view_mut::<6, 6>(0, 0).copy_from(&(-f * dt));
        van_loan
            .fixed_view_mut::<6, 6>(0, 6)
            .copy_from(&(g * g.transpose() * dt));
        van_loan
            .fixed_view_mut::<6, 6>(6, 6)
            .copy_from(&(f.transpose() * dt));
        let e = van_loan.exp();
        let phi: Mat6 = e.fixed_view::<6, 6>(6, 6).transpose();
        let q: Mat6 = phi * e.fixed_view::<6, 6>(0, 6);
        let q = (q + q.transpose()) * 0.5;

        let eig = SymmetricEigen::new(q);
        let mut noise = eig.eigenvectors;
        for (j, lambda) in eig.eigenvalues.iter().enumerate() {
            let r = lambda.max(0.0).sqrt();
            noise.column_mut(j).scale_mut(r);
        }
        ExactStep {
            transition: phi.fixed_view::<6, 2>(0, 0).into_owned(),
            noise,
        }
    }
}

fn normal6(rng: &mut ChaCha8Rng) -> SVector<f64, 6> {
    SVector::<f64, 6>::from_fn(|_, _| StandardNormal.sample(rng))
}

fn normal2(rng: &mut ChaCha8Rng) -> Vector2<f64> {
    Vector2::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

/// RNG for trial `trial_index` of a run seeded with `seed_value`.
pub fn trial_rng(seed_value: u64, trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_value);
    rng.set_stream(trial_index);
    rng
}

/// Simulates output fluctuations for trial 0 of `config`.
pub fn integrate_fluctuations(config: &SimConfig) -> Result<TimeSeries, DynamicsError> {
    integrate_fluctuations_trial(config, 0)
}

/// Simulates output fluctuations with the RNG stream of `trial_index`.
///
/// The cavity starts empty and is run for 20 slowest relaxation times before
/// recording starts.
pub fn integrate_fluctuations_trial(
    config: &SimConfig,
    trial_index: u64,
) -> Result<TimeSeries, DynamicsError> {
    config.validate()?;
    let params = &config.params;
    let dt = config.dt;
    let s = (2.0 * params.kappa_s).sqrt();
    let l = (2.0 * params.kappa_l).sqrt();
    let sqrt_dt = dt.sqrt();
    let burn_in = (20.0 / (slowest_decay_rate(params) * dt)).ceil() as usize;
    let steps = config.steps();
    let mut rng = trial_rng(config.seed_value, trial_index);

    let kept = steps.div_ceil(config.record_decimation);
    let mut out = TimeSeries {
        t: Vec::with_capacity(kept),
        x_minus_out: Vec::with_capacity(kept),
        x_plus_out: Vec::with_capacity(kept),
    };
    let mut x = Vector2::<f64>::zeros();
    let mut record = |k: usize, y: Vector2<f64>| {
        if k >= burn_in && (k - burn_in).is_multiple_of(config.record_decimation) {
            out.t.push((k - burn_in) as f64 * dt);
            out.x_plus_out.push(y[0]);
            out.x_minus_out.push(y[1]);
        }
    };

    match config.integrator {
        Integrator::Exact => {
            let step = ExactStep::new(params, dt);
            for k in 0..burn_in + steps {
                let w = step.transition * x + step.noise * normal6(&mut rng);
                let y = (w.fixed_rows::<2>(2) * s - w.fixed_rows::<2>(4)) / sqrt_dt;
                x = w.fixed_rows::<2>(0).into_owned();
                record(k, y);
            }
        }
        Integrator::EulerMaruyama => {
            let m = drift_matrix(params);
            for k in 0..burn_in + steps {
                let n_s = normal2(&mut rng);
                let n_l = normal2(&mut rng);
                let y = x * (s * sqrt_dt) - n_s;
                x += m * x * dt + (n_s * s + n_l * l) * sqrt_dt;
                record(k, y);
            }
        }
    }
    Ok(out)
}

/// Welch estimate of both output quadrature spectra, normalised so vacuum
/// reads 1.
pub fn estimate_psd(
    series: &TimeSeries,
    segment_length: usize,
    overlap: f64,
) -> Result<SpectrumTrace, DynamicsError> {
    let dt = series
        .sample_interval()
        .ok_or(DynamicsError::Invalid("series needs at least two samples"))?;
    let plus = welch(&series.x_plus_out, dt, segment_length, overlap)?;
    let minus = welch(&series.x_minus_out, dt, segment_length, overlap)?;
    Ok(SpectrumTrace {
        frequencies: plus.frequencies,
        variance_plus: plus.density,
        variance_minus: minus.density,
        efficiency: Efficiency::PERFECT,
        reference_hz: 0.0,
    })
}

/// Runs `trials` independent realisations of `config` (one RNG stream each)
/// and averages their Welch spectra. The result does not depend on how the
/// trials are scheduled across threads.
pub fn averaged_psd(
    config: &SimConfig,
    trials: usize,
    segment_length: usize,
    overlap: f64,
) -> Result<SpectrumTrace, DynamicsError> {
    if trials == 0 {
        return Err(DynamicsError::Invalid("trials must be at least 1"));
    }
    let traces = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let series = integrate_fluctuations_trial(config, k)?;
            estimate_psd(&series, segment_length, overlap)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut iter = traces.into_iter();
    let mut acc = iter.next().expect("at least one trial");
    for trace in iter {
        for (a, b) in acc.variance_plus.iter_mut().zip(&trace.variance_plus) {
            *a += b;
        }
        for (a, b) in acc.variance_minus.iter_mut().zip(&trace.variance_minus) {
            *a += b;
        }
    }
    let n = trials as f64;
    acc.variance_plus.iter_mut().for_each(|v| *v /= n);
    acc.variance_minus.iter_mut().for_each(|v| *v /= n);
    Ok(acc)
}
