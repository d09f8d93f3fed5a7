//! Closed-loop frequency lock driven by the homodyne error signal.
//!
//! The cavity responds quasi-statically: each step the discriminator reads
//! the steady-state error signal at the current detuning, plus white
//! measurement noise at the level of the output phase-quadrature spectrum
//! at DC. A PI controller with clamping anti-windup drives an actuator with a
//! first-order lag, and the actuator output is subtracted from the external
//! disturbance.
//!
//! The controller acts on the detuning estimate `e / slope`, so `kp` is
//! dimensionless and `ki` has units of 1/s.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::dynamics::trial_rng;
use crate::params::{Efficiency, OpoParams, Quadrature, TwoModeField};
use crate::spectra::variance;
use crate::steadystate::{composite_error, error_signal, error_slope};

/// The discriminator model holds only while the loop is this much slower
/// than the cavity.
pub const QUASI_STATIC_FRACTION: f64 = 0.1;
/// |Δ| below this fraction of κ counts as locked.
pub const LOCK_THRESHOLD: f64 = 0.1;
/// Consecutive in-lock samples needed to declare acquisition.
pub const ACQUISITION_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LockError {
    #[error("invalid lock configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(
        "loop crossover {crossover:.4e} rad/s is not below {limit:.4e} rad/s; \
         the quasi-static discriminator does not apply"
    )]
    QuasiStaticViolation { crossover: f64, limit: f64 },
    #[error("loop ran away: detuning {detuning:.4e} rad/s at t = {time:.4e} s")]
    UnstableLoop { time: f64, detuning: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    /// Vacuum-level measurement noise.
    #[default]
    Qnl,
    /// Noise at the OPO's phase-quadrature level at DC.
    Squeezed,
    Noiseless,
}

impl NoiseMode {
    fn stream(self) -> u64 {
        match self {
            NoiseMode::Qnl => 1,
            NoiseMode::Squeezed => 2,
            NoiseMode::Noiseless => 3,
        }
    }
}

impl std::fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoiseMode::Qnl => "qnl",
            NoiseMode::Squeezed => "squeezed",
            NoiseMode::Noiseless => "noiseless",
        })
    }
}

impl std::str::FromStr for NoiseMode {
    type Err = LockError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qnl" => Ok(NoiseMode::Qnl),
            "squeezed" => Ok(NoiseMode::Squeezed),
            "noiseless" => Ok(NoiseMode::Noiseless),
            _ => Err(LockError::InvalidConfig(
                "noise_mode must be qnl, squeezed or noiseless",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiGains {
    /// Proportional gain (dimensionless).
    pub kp: f64,
    /// Integral gain (1/s).
    pub ki: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DisturbanceSpec {
    /// Sinusoid amplitude (rad/s).
    pub sinusoid_amplitude: f64,
    /// Sinusoid frequency (Hz).
    pub sinusoid_frequency: f64,
    /// Random-walk diffusion of the detuning (rad²/s³).
    pub random_walk_diffusion: f64,
    /// Detuning at t = 0 (rad/s).
    pub initial_offset: f64,
}

impl DisturbanceSpec {
    fn validate(&self) -> Result<(), LockError> {
        let all = [
            self.sinusoid_amplitude,
            self.sinusoid_frequency,
            self.random_walk_diffusion,
            self.initial_offset,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(LockError::InvalidConfig(
                "disturbance values must be finite",
            ));
        }
        if self.sinusoid_amplitude < 0.0
            || self.sinusoid_frequency < 0.0
            || self.random_walk_diffusion < 0.0
        {
            return Err(LockError::InvalidConfig(
                "disturbance amplitudes must be non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockConfig {
    pub params: OpoParams,
    /// Discriminator slope (per rad/s).
    pub slope: f64,
    pub controller: PiGains,
    /// Actuator lag pole (rad/s).
    pub actuator_bandwidth: f64,
    /// Largest correction the actuator can apply (rad/s).
    pub actuator_range: f64,
    pub disturbance: DisturbanceSpec,
    pub noise_mode: NoiseMode,
    /// Optional two-mode field; when set the discriminator follows the full
    /// two-mode error curve including the LO resonances.
    pub field: Option<TwoModeField>,
    pub dt: f64,
    pub duration: f64,
    pub rng_seed: u64,
}

impl LockConfig {
    /// Default loop around `params` for a real seed of `seed_amplitude`:
    /// kp = 0.3, ki = 0.01κ, actuator pole 0.05κ, range 10κ, dt = 0.1/κ and
    /// 2·10⁴/κ of simulated time. Crossover sits near 0.01κ with about 95°
    /// of phase margin.
    pub fn tuned(params: OpoParams, seed_amplitude: f64) -> Self {
        let k = params.kappa();
        LockConfig {
            params,
            slope: error_slope(&params, seed_amplitude),
            controller: PiGains {
                kp: 0.3,
                ki: 0.01 * k,
            },
            actuator_bandwidth: 0.05 * k,
            actuator_range: 10.0 * k,
            disturbance: DisturbanceSpec::default(),
            noise_mode: NoiseMode::Qnl,
            field: None,
            dt: 0.1 / k,
            duration: 2e4 / k,
            rng_seed: 0,
        }
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// Seed amplitude implied by the slope.
    pub fn seed_amplitude(&self) -> f64 {
        seed_amplitude_for_slope(&self.params, self.slope)
    }

    pub fn validate(&self) -> Result<(), LockError> {
        let PiGains { kp, ki } = self.controller;
        if !(kp >= 0.0 && ki >= 0.0 && kp.is_finite() && ki.is_finite()) {
            return Err(LockError::InvalidConfig(
                "kp and ki must be finite and non-negative",
            ));
        }
        if !(self.slope.is_finite() && self.slope != 0.0) {
            return Err(LockError::InvalidConfig(
                "slope must be finite and non-zero",
            ));
        }
        if !(self.actuator_bandwidth > 0.0 && self.actuator_bandwidth.is_finite()) {
            return Err(LockError::InvalidConfig(
                "actuator_bandwidth must be positive",
            ));
        }
        if !(self.actuator_range > 0.0) {
            return Err(LockError::InvalidConfig("actuator_range must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(LockError::InvalidConfig("dt must be positive"));
        }
        if !(self.duration.is_finite() && self.steps() >= 2 * ACQUISITION_SAMPLES) {
            return Err(LockError::InvalidConfig(
                "duration must cover at least 200 steps",
            ));
        }
        if self.dt * self.actuator_bandwidth > 0.1 {
            return Err(LockError::InvalidConfig(
                "dt * actuator_bandwidth must not exceed 0.1",
            ));
        }
        self.disturbance.validate()?;
        if self.dt * TAU * self.disturbance.sinusoid_frequency > 0.1 {
            return Err(LockError::InvalidConfig(
                "dt is too long for the disturbance frequency",
            ));
        }
        let limit = QUASI_STATIC_FRACTION * self.params.kappa();
        if let Some(crossover) = crossover_frequency(self) {
            if crossover >= limit {
                return Err(LockError::QuasiStaticViolation { crossover, limit });
            }
        }
        Ok(())
    }
}

/// Seed amplitude whose on-resonance error slope is `slope`.
pub fn seed_amplitude_for_slope(params: &OpoParams, slope: f64) -> f64 {
    let k = params.kappa();
    slope * (k * k - params.chi * params.chi) / (4.0 * params.kappa_s)
}

/// Spectral level V of the measurement noise at DC for `mode`.
pub fn noise_level(params: &OpoParams, mode: NoiseMode) -> f64 {
    match mode {
        NoiseMode::Qnl => 1.0,
        NoiseMode::Squeezed => variance(
            &params.with_detuning(0.0),
            0.0,
            Quadrature::Minus,
            Efficiency::PERFECT,
        ),
        NoiseMode::Noiseless => 0.0,
    }
}

/// One error sample at detuning `delta_now`: the steady-state error signal
/// plus Gaussian noise of per-sample variance V/(2·dt).
pub fn discriminator<R: Rng + ?Sized>(
    params: &OpoParams,
    slope: f64,
    delta_now: f64,
    noise_mode: NoiseMode,
    dt: f64,
    rng: &mut R,
) -> f64 {
    let amp = seed_amplitude_for_slope(params, slope);
    let e = error_signal(&params.with_detuning(delta_now), amp);
    e + noise_sample(noise_std(params, noise_mode, dt), rng)
}

fn noise_std(params: &OpoParams, mode: NoiseMode, dt: f64) -> f64 {
    (noise_level(params, mode) / (2.0 * dt)).sqrt()
}

fn noise_sample<R: Rng + ?Sized>(std: f64, rng: &mut R) -> f64 {
    if std == 0.0 {
        0.0
    } else {
        let n: f64 = StandardNormal.sample(rng);
        std * n
    }
}

/// Continuous-time open-loop gain (kp + ki/s)·ω_a/(s + ω_a) at s = iω.
pub fn loop_gain(config: &LockConfig, omega: f64) -> Complex64 {
    let s = Complex64::new(0.0, omega);
    let PiGains { kp, ki } = config.controller;
    let wa = config.actuator_bandwidth;
    (kp + ki / s) * wa / (s + wa)
}

/// Predicted closed-loop disturbance suppression |1/(1 + L(iω))|.
pub fn predicted_suppression(config: &LockConfig, omega: f64) -> f64 {
    (1.0 / (1.0 + loop_gain(config, omega))).norm()
}

/// Highest angular frequency where |L| = 1, if the loop has gain there.
pub fn crossover_frequency(config: &LockConfig) -> Option<f64> {
    let k = config.params.kappa();
    let mag = |w: f64| loop_gain(config, w).norm();
    let (lo, hi) = (1e-9 * k, 1e3 * k);
    let n = 4000;
    let at = |i: usize| lo * (hi / lo).powf(i as f64 / n as f64);
    let idx = (0..n).rev().find(|&i| mag(at(i)) >= 1.0)?;
    if idx == n {
        return Some(hi);
    }
    let (mut a, mut b) = (at(idx), at(idx + 1));
    for _ in 0..100 {
        let m = (a * b).sqrt();
        if mag(m) >= 1.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Some((a * b).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockMetrics {
    /// RMS detuning over the second half of the run (rad/s).
    pub rms_detuning_locked: f64,
    /// RMS of the disturbance alone over the same window (rad/s).
    pub rms_detuning_open_loop: f64,
    /// Start of the first run of 100 samples with |Δ| < 0.1κ (s).
    pub acquisition_time: Option<f64>,
    pub in_lock_fraction: f64,
}

impl LockMetrics {
    pub fn from_series(
        t: &[f64],
        detuning: &[f64],
        disturbance: &[f64],
        kappa: f64,
    ) -> LockMetrics {
        let n = detuning.len();
        let half = n / 2;
        let rms = |x: &[f64]| (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        let threshold = LOCK_THRESHOLD * kappa;
        let mut run = 0usize;
        let mut acquisition_time = None;
        for (k, d) in detuning.iter().enumerate() {
            if d.abs() < threshold {
                run += 1;
                if run == ACQUISITION_SAMPLES {
                    acquisition_time = Some(t[k + 1 - ACQUISITION_SAMPLES]);
                    break;
                }
            } else {
                run = 0;
            }
        }
        let in_lock = detuning.iter().filter(|d| d.abs() < threshold).count();
        LockMetrics {
            rms_detuning_locked: rms(&detuning[half..]),
            rms_detuning_open_loop: rms(&disturbance[half..]),
            acquisition_time,
            in_lock_fraction: in_lock as f64 / n as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockResult {
    pub t: Vec<f64>,
    /// Residual detuning Δ = disturbance − actuator (rad/s).
    pub detuning: Vec<f64>,
    pub error: Vec<f64>,
    /// Controller output before the actuator lag (rad/s).
    pub control: Vec<f64>,
    pub disturbance: Vec<f64>,
    pub metrics: LockMetrics,
}

/// Runs trial 0 of `config`.
pub fn simulate_lock(config: &LockConfig) -> Result<LockResult, LockError> {
    simulate_lock_trial(config, 0)
}

fn rng_for(config: &LockConfig, trial: u64, purpose: u64) -> ChaCha8Rng {
    trial_rng(config.rng_seed, trial * 4 + purpose)
}

/// Runs one trial. The disturbance draws from a stream shared by every noise
/// mode of the same trial; the measurement noise has its own stream per mode.
pub fn simulate_lock_trial(config: &LockConfig, trial: u64) -> Result<LockResult, LockError> {
    config.validate()?;
    let params = &config.params;
    let dt = config.dt;
    let steps = config.steps();
    let amp = config.seed_amplitude();
    let runaway = 10.0 * params.fsr_angular();
    let range = config.actuator_range;
    let PiGains { kp, ki } = config.controller;
    let lag = 1.0 - (-config.actuator_bandwidth * dt).exp();
    let dist = config.disturbance;
    let walk_std = (dist.random_walk_diffusion * dt).sqrt();
    let std = noise_std(params, config.noise_mode, dt);
    let mut dist_rng = rng_for(config, trial, 0);
    let mut noise_rng = rng_for(config, trial, config.noise_mode.stream());

    let mut out = LockResult {
        t: Vec::with_capacity(steps),
        detuning: Vec::with_capacity(steps),
        error: Vec::with_capacity(steps),
        control: Vec::with_capacity(steps),
        disturbance: Vec::with_capacity(steps),
        metrics: LockMetrics {
            rms_detuning_locked: 0.0,
            rms_detuning_open_loop: 0.0,
            acquisition_time: None,
            in_lock_fraction: 0.0,
        },
    };
    let (mut walk, mut actuator, mut integral) = (0.0, 0.0, 0.0);
    for k in 0..steps {
        let t = k as f64 * dt;
        let d = dist.initial_offset
            + walk
            + dist.sinusoid_amplitude * (TAU * dist.sinusoid_frequency * t).sin();
        let delta = d - actuator;
        if !(delta.abs() <= runaway) {
            return Err(LockError::UnstableLoop {
                time: t,
                detuning: delta,
            });
        }
        let clean = match &config.field {
            Some(field) => composite_error(params, field, delta),
            None => error_signal(&params.with_detuning(delta), amp),
        };
        let e = clean + noise_sample(std, &mut noise_rng);
        let estimate = e / config.slope;
        integral = (integral + ki * estimate * dt).clamp(-range, range);
        let u = (kp * estimate + integral).clamp(-range, range);

        out.t.push(t);
        out.detuning.push(delta);
        out.error.push(e);
        out.control.push(u);
        out.disturbance.push(d);

        actuator += lag * (u - actuator);
        if walk_std > 0.0 {
            let n: f64 = StandardNormal.sample(&mut dist_rng);
            walk += walk_std * n;
        }
    }
    out.metrics = LockMetrics::from_series(&out.t, &out.detuning, &out.disturbance, params.kappa());
    Ok(out)
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn from_samples(x: &[f64]) -> Estimate {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = if x.len() > 1 {
            x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Estimate {
            mean,
            std_error: (var / n).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub trials: usize,
    pub rms_detuning_locked: Estimate,
    pub rms_detuning_open_loop: Estimate,
    pub in_lock_fraction: Estimate,
    pub acquired_fraction: f64,
}

fn run_trials(config: &LockConfig, trials: usize) -> Result<Vec<LockMetrics>, LockError> {
    if trials == 0 {
        return Err(LockError::InvalidConfig("trials must be at least 1"));
    }
    (0..trials as u64)
        .into_par_iter()
        .map(|k| simulate_lock_trial(config, k).map(|r| r.metrics))
        .collect()
}

/// Runs `trials` independent trials in parallel; output is independent of
/// the thread count.
pub fn monte_carlo(config: &LockConfig, trials: usize) -> Result<MonteCarloSummary, LockError> {
    let metrics = run_trials(config, trials)?;
    let pick = |f: fn(&LockMetrics) -> f64| {
        Estimate::from_samples(&metrics.iter().map(f).collect::<Vec<_>>())
    };
    Ok(MonteCarloSummary {
        trials,
        rms_detuning_locked: pick(|m| m.rms_detuning_locked),
        rms_detuning_open_loop: pick(|m| m.rms_detuning_open_loop),
        in_lock_fraction: pick(|m| m.in_lock_fraction),
        acquired_fraction: metrics
            .iter()
            .filter(|m| m.acquisition_time.is_some())
            .count() as f64
            / trials as f64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseComparison {
    /// Mean locked RMS detuning, squeezed over QNL.
    pub ratio: f64,
    pub ratio_std_error: f64,
    pub squeezed: Estimate,
    pub qnl: Estimate,
}

/// Locked RMS detuning with a squeezed discriminator relative to a QNL one.
/// Both modes see the same disturbance realisations.
pub fn residual_noise_comparison(
    config: &LockConfig,
    trials: usize,
) -> Result<NoiseComparison, LockError> {
    let with_mode = |mode| LockConfig {
        noise_mode: mode,
        ..config.clone()
    };
    let squeezed = monte_carlo(&with_mode(NoiseMode::Squeezed), trials)?.rms_detuning_locked;
    let qnl = monte_carlo(&with_mode(NoiseMode::Qnl), trials)?.rms_detuning_locked;
    let ratio = squeezed.mean / qnl.mean;
    let rel =
        ((squeezed.std_error / squeezed.mean).powi(2) + (qnl.std_error / qnl.mean).powi(2)).sqrt();
    Ok(NoiseComparison {
        ratio,
        ratio_std_error: ratio * rel,
        squeezed,
        qnl,
    })
}
