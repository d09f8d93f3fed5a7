//! Gaussian covariance engine and the measurement-based universal squeezer.
//!
//! States are stored as a mean vector and covariance matrix over
//! (X⁺₀, X⁻₀, X⁺₁, X⁻₁, …); vacuum has identity covariance.
//!
//! Beamsplitter convention, with t = √T and r = √(1−T):
//!
//! ```text
//! out_i = t·a_i − i·r·a_j
//! out_j = −i·r·a_i + t·a_j
//! ```
//!
//! The −i on the cross terms swaps quadratures: X⁺ of `−i·a` is −X⁻ of `a`
//! and X⁻ of `−i·a` is X⁺ of `a`. In the universal squeezer the detected
//! port therefore carries the input's phase quadrature in its X⁺, and the
//! ancilla's anti-squeezed X⁺ lands in the output's X⁻. Measuring X⁺ of the
//! detected port and adding `g = −√((1−T)/T)` times the outcome to X⁻ of
//! the output removes the ancilla from output X⁻ entirely and scales the
//! input's X⁻ by 1/√T; output X⁺ becomes √T·X⁺_in − √(1−T)·X⁻_anc.

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen, Vector2};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::params::Quadrature;

pub const PHYSICALITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FfError {
    #[error("invalid state: {0}")]
    InvalidState(&'static str),
    #[error("state violates the uncertainty principle (min eigenvalue {0:.3e})")]
    NonPhysical(f64),
    #[error("squeezed variance must be in (0, 1], got {0}")]
    InvalidSqueezing(f64),
    #[error("transmittivity must be in (0, 1), got {0}")]
    Transmittivity(f64),
    #[error("mode {mode} out of range for a {modes}-mode state")]
    ModeOutOfRange { mode: usize, modes: usize },
    #[error("beamsplitter needs two distinct modes")]
    SameMode,
    #[error("measured quadrature variance {0} is not positive")]
    SingularVariance(f64),
}

fn index(mode: usize, q: Quadrature) -> usize {
    2 * mode + q.offset()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    /// Validated constructor; rejects asymmetric or unphysical covariances.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, FfError> {
        let n = mean.len();
        if n == 0 || !n.is_multiple_of(2) {
            return Err(FfError::InvalidState(
                "mean length must be a positive even number",
            ));
        }
        if cov.nrows() != n || cov.ncols() != n {
            return Err(FfError::InvalidState(
                "covariance shape does not match the mean",
            ));
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(FfError::InvalidState("non-finite entry"));
        }
        if (&cov - cov.transpose()).amax() > PHYSICALITY_TOLERANCE {
            return Err(FfError::InvalidState("covariance is not symmetric"));
        }
        let state = GaussianState { mean, cov };
        let min = state.min_uncertainty_eigenvalue();
        if min < -PHYSICALITY_TOLERANCE {
            return Err(FfError::NonPhysical(min));
        }
        Ok(state)
    }

    pub fn vacuum(modes: usize) -> Self {
        GaussianState {
            mean: DVector::zeros(2 * modes),
            cov: DMatrix::identity(2 * modes, 2 * modes),
        }
    }

    /// Pure single-mode state with X⁻ variance `v_minus` and X⁺ variance
    /// 1/v_minus.
    pub fn squeezed_vacuum(v_minus: f64) -> Result<Self, FfError> {
        if !(v_minus > 0.0 && v_minus <= 1.0) {
            return Err(FfError::InvalidSqueezing(v_minus));
        }
        Ok(GaussianState {
            mean: DVector::zeros(2),
            cov: DMatrix::from_diagonal(&DVector::from_vec(vec![1.0 / v_minus, v_minus])),
        })
    }

    /// Vacuum noise displaced to the given quadrature means.
    pub fn coherent(x_plus: f64, x_minus: f64) -> Self {
        GaussianState {
            mean: DVector::from_vec(vec![x_plus, x_minus]),
            cov: DMatrix::identity(2, 2),
        }
    }

    pub fn modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Direct sum: `self`'s modes first, then `other`'s.
    pub fn tensor(&self, other: &GaussianState) -> GaussianState {
        let (a, b) = (self.mean.len(), other.mean.len());
        let mut mean = DVector::zeros(a + b);
        mean.rows_mut(0, a).copy_from(&self.mean);
        mean.rows_mut(a, b).copy_from(&other.mean);
        let mut cov = DMatrix::zeros(a + b, a + b);
        cov.view_mut((0, 0), (a, a)).copy_from(&self.cov);
        cov.view_mut((a, a), (b, b)).copy_from(&other.cov);
        GaussianState { mean, cov }
    }

    /// Marginal state of one mode.
    pub fn reduced(&self, mode: usize) -> Result<GaussianState, FfError> {
        self.check_mode(mode)?;
        Ok(GaussianState {
            mean: self.mean.rows(2 * mode, 2).into_owned(),
            cov: self.cov.view((2 * mode, 2 * mode), (2, 2)).into_owned(),
        })
    }

    /// Smallest eigenvalue of cov + iΩ.
    pub fn min_uncertainty_eigenvalue(&self) -> f64 {
        let n = self.mean.len();
        if n == 0 {
            return f64::INFINITY;
        }
        let omega = symplectic_form(n / 2);
        let mut real = DMatrix::zeros(2 * n, 2 * n);
        real.view_mut((0, 0), (n, n)).copy_from(&self.cov);
        real.view_mut((n, n), (n, n)).copy_from(&self.cov);
        real.view_mut((0, n), (n, n)).copy_from(&(-&omega));
        real.view_mut((n, 0), (n, n)).copy_from(&omega);
        SymmetricEigen::new(real).eigenvalues.min()
    }

    pub fn is_physical(&self) -> bool {
        self.min_uncertainty_eigenvalue() >= -PHYSICALITY_TOLERANCE
    }

    /// 1/√det(cov); 1 for pure states.
    pub fn purity(&self) -> f64 {
        1.0 / self.cov.determinant().sqrt()
    }

    fn check_mode(&self, mode: usize) -> Result<(), FfError> {
        if mode >= self.modes() {
            return Err(FfError::ModeOutOfRange {
                mode,
                modes: self.modes(),
            });
        }
        Ok(())
    }

    fn checked(self) -> Self {
        debug_assert!(self.is_physical(), "unphysical state produced");
        self
    }

    fn transformed(&self, s: &DMatrix<f64>) -> GaussianState {
        let cov = s * &self.cov * s.transpose();
        GaussianState {
            mean: s * &self.mean,
            cov: (&cov + cov.transpose()) * 0.5,
        }
        .checked()
    }
}

/// Ω = ⊕ [[0, 1], [−1, 0]].
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * modes, 2 * modes);
    for m in 0..modes {
        omega[(2 * m, 2 * m + 1)] = 1.0;
        omega[(2 * m + 1, 2 * m)] = -1.0;
    }
    omega
}

/// Symplectic matrix of the beamsplitter on modes `i`, `j` of an
/// `modes`-mode state.
pub fn beamsplitter_matrix(modes: usize, i: usize, j: usize, t: f64) -> DMatrix<f64> {
    let (tt, rr) = (t.sqrt(), (1.0 - t).sqrt());
    let mut s = DMatrix::identity(2 * modes, 2 * modes);
    let (ip, im, jp, jm) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
    for &(row, col, v) in &[
        (ip, ip, tt),
        (ip, jm, -rr),
        (im, im, tt),
        (im, jp, rr),
        (jp, jp, tt),
        (jp, im, -rr),
        (jm, jm, tt),
        (jm, ip, rr),
    ] {
        s[(row, col)] = v;
    }
    s
}

pub fn beamsplitter(
    state: &GaussianState,
    modes: (usize, usize),
    transmittivity: f64,
) -> Result<GaussianState, FfError> {
    let (i, j) = modes;
    state.check_mode(i)?;
    state.check_mode(j)?;
    if i == j {
        return Err(FfError::SameMode);
    }
    if !(0.0..=1.0).contains(&transmittivity) {
        return Err(FfError::Transmittivity(transmittivity));
    }
    Ok(state.transformed(&beamsplitter_matrix(state.modes(), i, j, transmittivity)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeDistribution {
    pub mean: f64,
    pub variance: f64,
}

/// Result of a homodyne measurement. The measured mode is removed and the
/// modes after it shift down by one.
#[derive(Debug, Clone, PartialEq)]
pub struct HomodyneResult {
    pub outcome: OutcomeDistribution,
    /// Remaining modes conditioned on the outcome equal to its mean.
    pub conditioned: GaussianState,
    /// Change of the conditioned mean per unit of outcome.
    pub sensitivity: DVector<f64>,
}

impl HomodyneResult {
    /// Conditioned state for a specific outcome.
    pub fn state_given(&self, outcome: f64) -> GaussianState {
        GaussianState {
            mean: &self.conditioned.mean + &self.sensitivity * (outcome - self.outcome.mean),
            cov: self.conditioned.cov.clone(),
        }
    }
}

pub fn homodyne_condition(
    state: &GaussianState,
    mode: usize,
    quadrature: Quadrature,
) -> Result<HomodyneResult, FfError> {
    state.check_mode(mode)?;
    let k = index(mode, quadrature);
    let var = state.cov[(k, k)];
    if !(var > 0.0) {
        return Err(FfError::SingularVariance(var));
    }
    let keep: Vec<usize> = (0..state.mean.len()).filter(|&r| r / 2 != mode).collect();
    let m = keep.len();
    let cross = DVector::from_fn(m, |r, _| state.cov[(keep[r], k)]);
    let sensitivity = &cross / var;
    let mean = DVector::from_fn(m, |r, _| state.mean[keep[r]]);
    let cov = DMatrix::from_fn(m, m, |r, c| state.cov[(keep[r], keep[c])])
        - &cross * cross.transpose() / var;
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(HomodyneResult {
        outcome: OutcomeDistribution {
            mean: state.mean[k],
            variance: var,
        },
        conditioned: GaussianState { mean, cov }.checked(),
        sensitivity,
    })
}

/// Trajectory feed-forward: shifts the mean of `quadrature` of `mode` by
/// `gain · outcome`.
pub fn feedforward_displace(
    state: &GaussianState,
    mode: usize,
    quadrature: Quadrature,
    gain: f64,
    outcome: f64,
) -> Result<GaussianState, FfError> {
    state.check_mode(mode)?;
    let mut out = state.clone();
    out.mean[index(mode, quadrature)] += gain * outcome;
    Ok(out)
}

/// Ensemble feed-forward: averages the displaced conditioned states over
/// the outcome distribution.
pub fn feedforward_ensemble(
    result: &HomodyneResult,
    mode: usize,
    quadrature: Quadrature,
    gain: f64,
) -> Result<GaussianState, FfError> {
    result.conditioned.check_mode(mode)?;
    let j = index(mode, quadrature);
    let mut lever = result.sensitivity.clone();
    lever[j] += gain;
    let mut mean = result.conditioned.mean.clone();
    mean[j] += gain * result.outcome.mean;
    let cov = &result.conditioned.cov + &lever * lever.transpose() * result.outcome.variance;
    Ok(GaussianState { mean, cov }.checked())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedforwardConfig {
    pub transmittivity: f64,
    pub gain: f64,
    /// Quadrature read on the detected port, in that port's frame. The
    /// conjugate quadrature of the output port receives the correction.
    pub measured_quadrature: Quadrature,
}

impl FeedforwardConfig {
    /// Gain −√((1−T)/T), measuring X⁺ of the detected port.
    pub fn new(transmittivity: f64) -> Result<Self, FfError> {
        if !(transmittivity > 0.0 && transmittivity < 1.0) {
            return Err(FfError::Transmittivity(transmittivity));
        }
        Ok(FeedforwardConfig {
            transmittivity,
            gain: default_gain(transmittivity),
            measured_quadrature: Quadrature::Plus,
        })
    }

    pub fn fed_quadrature(&self) -> Quadrature {
        self.measured_quadrature.conjugate()
    }
}

pub fn default_gain(transmittivity: f64) -> f64 {
    -((1.0 - transmittivity) / transmittivity).sqrt()
}

fn mix(input: &GaussianState, ancilla: &GaussianState, t: f64) -> Result<GaussianState, FfError> {
    if input.modes() != 1 || ancilla.modes() != 1 {
        return Err(FfError::InvalidState(
            "input and ancilla must be single-mode",
        ));
    }
    beamsplitter(&input.tensor(ancilla), (0, 1), t)
}

/// Ensemble output of the squeezer circuit for an arbitrary ancilla.
pub fn apply_feedforward(
    input: &GaussianState,
    ancilla: &GaussianState,
    config: &FeedforwardConfig,
) -> Result<GaussianState, FfError> {
    let mixed = mix(input, ancilla, config.transmittivity)?;
    let measured = homodyne_condition(&mixed, 1, config.measured_quadrature)?;
    feedforward_ensemble(&measured, 0, config.fed_quadrature(), config.gain)
}

/// Output for one recorded outcome of the detected quadrature.
pub fn apply_feedforward_trajectory(
    input: &GaussianState,
    ancilla: &GaussianState,
    config: &FeedforwardConfig,
    outcome: f64,
) -> Result<GaussianState, FfError> {
    let mixed = mix(input, ancilla, config.transmittivity)?;
    let measured = homodyne_condition(&mixed, 1, config.measured_quadrature)?;
    feedforward_displace(
        &measured.state_given(outcome),
        0,
        config.fed_quadrature(),
        config.gain,
        outcome,
    )
}

/// Beamsplitter, homodyne detection and feed-forward with the default gain,
/// averaged over outcomes. The ancilla is squeezed vacuum with X⁻ variance
/// `ancilla_v_minus`.
pub fn universal_squeezer(
    input: &GaussianState,
    ancilla_v_minus: f64,
    transmittivity: f64,
) -> Result<GaussianState, FfError> {
    let config = FeedforwardConfig::new(transmittivity)?;
    let ancilla = GaussianState::squeezed_vacuum(ancilla_v_minus)?;
    apply_feedforward(input, &ancilla, &config)
}

/// Linear map of the squeezer on quadrature means: output = input·x_in +
/// ancilla·x_anc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezerTransfer {
    pub input: Matrix2<f64>,
    pub ancilla: Matrix2<f64>,
}

/// Transfer matrices of the ensemble circuit, read off by propagating unit
/// mean displacements through the engine.
pub fn squeezer_transfer(config: &FeedforwardConfig) -> Result<SqueezerTransfer, FfError> {
    let mut input = Matrix2::zeros();
    let mut ancilla = Matrix2::zeros();
    for col in 0..2 {
        let mut unit = [0.0; 2];
        unit[col] = 1.0;
        let probe = GaussianState::coherent(unit[0], unit[1]);
        let vac = GaussianState::vacuum(1);
        let a = apply_feedforward(&probe, &vac, config)?;
        let b = apply_feedforward(&vac, &probe, config)?;
        input.set_column(col, &Vector2::new(a.mean[0], a.mean[1]));
        ancilla.set_column(col, &Vector2::new(b.mean[0], b.mean[1]));
    }
    Ok(SqueezerTransfer { input, ancilla })
}

/// Sample mean and covariance of the output quadratures from direct
/// simulation: joint Gaussian draws of input and ancilla, each propagated as
/// complex amplitudes through the beamsplitter, measured, and corrected.
pub fn sample_squeezer(
    input: &GaussianState,
    ancilla: &GaussianState,
    config: &FeedforwardConfig,
    samples: usize,
    seed: u64,
) -> Result<(Vector2<f64>, Matrix2<f64>), FfError> {
    let joint = input.tensor(ancilla);
    let chol = joint
        .cov
        .clone()
        .cholesky()
        .ok_or(FfError::InvalidState(
            "joint covariance is not positive definite",
        ))?
        .l();
    let (t, r) = (
        config.transmittivity.sqrt(),
        (1.0 - config.transmittivity).sqrt(),
    );
    let chunk = 1 << 14;
    let chunks = samples.div_ceil(chunk);
    let partials: Vec<(usize, Vector2<f64>, Matrix2<f64>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let n = chunk.min(samples - c * chunk);
            let mut sum = Vector2::zeros();
            let mut outer = Matrix2::zeros();
            for _ in 0..n {
                let z = DVector::from_fn(4, |_, _| StandardNormal.sample(&mut rng));
                let x = &joint.mean + &chol * z;
                let a_in = Complex64::new(x[0], -x[1]) / 2.0;
                let a_anc = Complex64::new(x[2], -x[3]) / 2.0;
                let minus_i = Complex64::new(0.0, -1.0);
                let out = t * a_in + minus_i * r * a_anc;
                let det = minus_i * r * a_in + t * a_anc;
                let quad = |a: Complex64| [2.0 * a.re, -2.0 * a.im];
                let outcome = quad(det)[config.measured_quadrature.offset()];
                let mut y = quad(out);
                y[config.fed_quadrature().offset()] += config.gain * outcome;
                let y = Vector2::new(y[0], y[1]);
                sum += y;
                outer += y * y.transpose();
            }
            (n, sum, outer)
        })
        .collect();
    let (n, sum, outer) = partials.into_iter().fold(
        (0, Vector2::zeros(), Matrix2::zeros()),
        |(n, s, o), (m, s2, o2)| (n + m, s + s2, o + o2),
    );
    let n = n as f64;
    let mean = sum / n;
    let cov = (outer - mean * mean.transpose() * n) / (n - 1.0);
    Ok((mean, cov))
}

/// Splits a homodyne photocurrent into a slow part for locking and a fast
/// part for feed-forward with a one-pole low-pass at `crossover` (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotocurrentSplit {
    pub crossover: f64,
}

impl PhotocurrentSplit {
    /// Returns (slow, fast) with slow + fast equal to the input.
    pub fn split(&self, samples: &[f64], dt: f64) -> (Vec<f64>, Vec<f64>) {
        let alpha = 1.0 - (-self.crossover * dt).exp();
        let mut state = samples.first().copied().unwrap_or(0.0);
        let slow: Vec<f64> = samples
            .iter()
            .map(|x| {
                state += alpha * (x - state);
                state
            })
            .collect();
        let fast = samples.iter().zip(&slow).map(|(x, s)| x - s).collect();
        (slow, fast)
    }
}
