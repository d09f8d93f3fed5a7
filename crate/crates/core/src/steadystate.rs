//! Closed-form steady state of the seeded OPO, the homodyne locking error
//! signal, classical parametric gain and two-mode detuning sweeps.
//!
//! # Sign convention
//!
//! The intracavity mode obeys
//!
//! ```text
//! da/dt = -(κ + iΔ) a + χ a† + √(2κs) A_s + √(2κl) δA_l
//! A_sqz = √(2κs) a − A_s
//! ```
//!
//! With X⁺ = A + A† and X⁻ = iA − iA† this gives, for the quadratures of `a`,
//!
//! ```text
//! d/dt [x⁺]   [ −(κ−χ)    −Δ   ] [x⁺]         [X_s⁺]
//!      [x⁻] = [   Δ    −(κ+χ) ] [x⁻] + √(2κs) [X_s⁻] + ...
//! ```
//!
//! so the amplitude quadrature is parametrically amplified and the phase
//! quadrature de-amplified (squeezed). The steady state of this system is
//! exactly `X_sqz^± = 2κs[(κ±χ)X_s^± ∓ ΔX_s^∓]/(κ²−χ²+Δ²) − X_s^±`, the form
//! every other module relies on. [`drift_matrix`] is the single source of
//! this convention.

use nalgebra::Matrix2;
use num_complex::Complex64;
use thiserror::Error;

use crate::params::{OpoParams, ParamError, QuadPair, Quadrature, TwoModeField};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SteadyStateError {
    #[error("gains must be positive dB magnitudes, got amplification {amp_db} dB, de-amplification {deamp_db} dB")]
    InvalidGain { amp_db: f64, deamp_db: f64 },
    #[error("no sub-threshold parameters with kappa_s <= kappa reproduce {amp_db} dB / -{deamp_db} dB under the {model:?} gain model")]
    NoFeasibleSolution {
        amp_db: f64,
        deamp_db: f64,
        model: GainModel,
    },
    #[error("detuning grid: {0}")]
    Grid(&'static str),
    #[error(transparent)]
    Param(#[from] ParamError),
}

/// Linear drift of the intracavity quadratures `(x⁺, x⁻)`.
pub fn drift_matrix(params: &OpoParams) -> Matrix2<f64> {
    let k = params.kappa();
    let chi = params.chi;
    let d = params.detuning;
    Matrix2::new(-(k - chi), -d, d, -(k + chi))
}

/// Steady-state intracavity quadratures for a classical seed.
pub fn intracavity_quadratures(params: &OpoParams, seed_in: QuadPair) -> QuadPair {
    let k = params.kappa();
    let chi = params.chi;
    let d = params.detuning;
    let s = (2.0 * params.kappa_s).sqrt();
    let det = k * k - chi * chi + d * d;
    QuadPair::new(
        s * ((k + chi) * seed_in.x_plus - d * seed_in.x_minus) / det,
        s * ((k - chi) * seed_in.x_minus + d * seed_in.x_plus) / det,
    )
}

/// Steady-state output quadratures `X_sqz^±` for a classical seed.
pub fn output_quadratures(params: &OpoParams, seed_in: QuadPair) -> QuadPair {
    let k = params.kappa();
    let chi = params.chi;
    let d = params.detuning;
    let pre = 2.0 * params.kappa_s / (k * k - chi * chi + d * d);
    QuadPair::new(
        pre * ((k + chi) * seed_in.x_plus - d * seed_in.x_minus) - seed_in.x_plus,
        pre * ((k - chi) * seed_in.x_minus + d * seed_in.x_plus) - seed_in.x_minus,
    )
}

/// Phase-quadrature output for a real seed of amplitude `seed_amplitude`.
/// Odd in the detuning, so it serves directly as the locking error signal.
pub fn error_signal(params: &OpoParams, seed_amplitude: f64) -> f64 {
    output_quadratures(params, QuadPair::real_field(seed_amplitude)).x_minus
}

/// d(error_signal)/dΔ at Δ = 0, i.e. the discriminator slope (per rad/s).
pub fn error_slope(params: &OpoParams, seed_amplitude: f64) -> f64 {
    let k = params.kappa();
    let chi = params.chi;
    2.0 * params.kappa_s * (2.0 * seed_amplitude) / (k * k - chi * chi)
}

/// What a measured parametric gain is referenced to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainModel {
    /// Reflected amplitude relative to the incident seed.
    #[default]
    InputReferenced,
    /// Reflected amplitude relative to the pump-off reflection 2κs/κ − 1.
    UnpumpedReferenced,
}

impl std::str::FromStr for GainModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "input" | "input-referenced" => Ok(GainModel::InputReferenced),
            "unpumped" | "unpumped-referenced" => Ok(GainModel::UnpumpedReferenced),
            other => Err(format!(
                "unknown gain model `{other}` (expected input or unpumped)"
            )),
        }
    }
}

/// On-resonance amplitude reflection factor of one quadrature.
///
/// `Plus` is the amplified quadrature: g₊ = 2κs/(κ−χ) − 1; `Minus` is the
/// de-amplified one: g₋ = 2κs/(κ+χ) − 1. The detuning of `params` is ignored.
pub fn classical_gain_factor(params: &OpoParams, quadrature: Quadrature, model: GainModel) -> f64 {
    let k = params.kappa();
    let g = 2.0 * params.kappa_s / (k - quadrature.sign() * params.chi) - 1.0;
    match model {
        GainModel::InputReferenced => g,
        GainModel::UnpumpedReferenced => g / (2.0 * params.kappa_s / k - 1.0),
    }
}

/// Power gain 10·log10(g²) of one quadrature, in dB.
pub fn classical_gain_db(params: &OpoParams, quadrature: Quadrature, model: GainModel) -> f64 {
    let g = classical_gain_factor(params, quadrature, model);
    10.0 * (g * g).log10()
}

/// Dimensionless parameters recovered from a pair of gain measurements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainFit {
    pub chi_over_kappa: f64,
    pub kappa_s_over_kappa: f64,
    pub model: GainModel,
}

impl GainFit {
    /// Physical parameters for a given total linewidth κ and round trip τ.
    pub fn params(&self, kappa: f64, tau: f64) -> Result<OpoParams, ParamError> {
        let kappa_s = self.kappa_s_over_kappa * kappa;
        OpoParams::new(
            kappa_s,
            (kappa - kappa_s).max(0.0),
            self.chi_over_kappa * kappa,
            tau,
            0.0,
        )
    }
}

const FIT_SCAN_POINTS: usize = 20_000;

/// Inverts [`classical_gain_db`] for a measured amplification `amp_db` and
/// de-amplification `deamp_db` (both given as positive magnitudes).
///
/// Works in κ = 1 units with r = κs/κ and c = χ/κ. For each sign branch of
/// the amplitude factors the two gain equations reduce to one equation in r,
/// `r (1/P(r) + 1/Q(r)) = 1` with P = 2r/(1−c), Q = 2r/(1+c); its roots on
/// (0, 1] are bracketed on a grid and bisected. Positive amplitude factors
/// are preferred, then the largest κs/κ.
pub fn fit_gains(
    amp_db: f64,
    deamp_db: f64,
    model: GainModel,
) -> Result<GainFit, SteadyStateError> {
    if !(amp_db > 0.0 && deamp_db > 0.0 && amp_db.is_finite() && deamp_db.is_finite()) {
        return Err(SteadyStateError::InvalidGain { amp_db, deamp_db });
    }
    let amp = 10f64.powf(amp_db / 20.0);
    let deamp = 10f64.powf(-deamp_db / 20.0);
    let reference = |r: f64| match model {
        GainModel::InputReferenced => 1.0,
        GainModel::UnpumpedReferenced => 2.0 * r - 1.0,
    };

    let mut candidates: Vec<(u8, GainFit)> = Vec::new();
    for (rank, (s_plus, s_minus)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
        .into_iter()
        .enumerate()
    {
        let pq = |r: f64| {
            let k = reference(r);
            (1.0 + s_plus * amp * k, 1.0 + s_minus * deamp * k)
        };
        let residual = |r: f64| -> Option<f64> {
            let (p, q) = pq(r);
            (p > 0.0 && q > 0.0).then(|| r * (1.0 / p + 1.0 / q) - 1.0)
        };
        let mut roots = Vec::new();
        let mut prev: Option<(f64, f64)> = None;
        for i in 1..=FIT_SCAN_POINTS {
            let r = i as f64 / FIT_SCAN_POINTS as f64;
            let Some(f) = residual(r) else {
                prev = None;
                continue;
            };
            if f == 0.0 || (i == FIT_SCAN_POINTS && f.abs() < 1e-12) {
                roots.push(r);
            } else if let Some((r0, f0)) = prev {
                if f0 != 0.0 && f0.signum() != f.signum() {
                    if let Some(root) = bisect(&residual, r0, r, f0) {
                        roots.push(root);
                    }
                }
            }
            prev = Some((r, f));
        }
        for r in roots {
            let (p, _) = pq(r);
            let mut c = 1.0 - 2.0 * r / p;
            if c < 0.0 && c > -1e-12 {
                c = 0.0;
            }
            if !(0.0..1.0).contains(&c) {
                continue;
            }
            let fit = GainFit {
                chi_over_kappa: c,
                kappa_s_over_kappa: r,
                model,
            };
            let Ok(params) = fit.params(1.0, 1e-3) else {
                continue;
            };
            let amp_err = classical_gain_db(&params, Quadrature::Plus, model) - amp_db;
            let deamp_err = classical_gain_db(&params, Quadrature::Minus, model) + deamp_db;
            if amp_err.abs() < 1e-7 && deamp_err.abs() < 1e-7 {
                candidates.push((rank as u8, fit));
            }
        }
    }
    candidates
        .into_iter()
        .min_by(|(ra, a), (rb, b)| {
            ra.cmp(rb)
                .then(b.kappa_s_over_kappa.total_cmp(&a.kappa_s_over_kappa))
        })
        .map(|(_, fit)| fit)
        .ok_or(SteadyStateError::NoFeasibleSolution {
            amp_db,
            deamp_db,
            model,
        })
}

fn bisect(f: &impl Fn(f64) -> Option<f64>, mut lo: f64, mut hi: f64, mut f_lo: f64) -> Option<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Some(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// A uniformly sampled, strictly increasing detuning grid (rad/s).
#[derive(Debug, Clone, PartialEq)]
pub struct DetuningGrid {
    values: Vec<f64>,
}

impl DetuningGrid {
    /// `points` samples from `start` to `stop` inclusive. A single point is
    /// allowed and yields a one-sample grid at `start`.
    pub fn new(start: f64, stop: f64, points: usize) -> Result<Self, SteadyStateError> {
        if !(start.is_finite() && stop.is_finite()) {
            return Err(SteadyStateError::Grid("bounds must be finite"));
        }
        match points {
            0 => Err(SteadyStateError::Grid("at least one point is required")),
            1 => Ok(DetuningGrid {
                values: vec![start],
            }),
            n if stop > start => {
                let step = (stop - start) / (n - 1) as f64;
                Ok(DetuningGrid {
                    values: (0..n).map(|i| start + step * i as f64).collect(),
                })
            }
            _ => Err(SteadyStateError::Grid("stop must exceed start")),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Error signal and seed transmission sampled over a detuning sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTrace {
    pub detunings: Vec<f64>,
    pub error_signal: Vec<f64>,
    /// Intracavity seed power, normalised to 1 on resonance.
    pub transmission: Vec<f64>,
}

impl SweepTrace {
    /// Indices `i` such that the error signal changes sign between `i` and `i + 1`.
    pub fn zero_crossings(&self) -> Vec<usize> {
        self.error_signal
            .windows(2)
            .enumerate()
            .filter(|(_, w)| (w[0] < 0.0 && w[1] >= 0.0) || (w[0] > 0.0 && w[1] <= 0.0))
            .map(|(i, _)| i)
            .collect()
    }

    /// Indices of local transmission maxima above half the peak.
    pub fn transmission_peaks(&self) -> Vec<usize> {
        let t = &self.transmission;
        (0..t.len())
            .filter(|&i| {
                let left = if i == 0 { f64::NEG_INFINITY } else { t[i - 1] };
                let right = t.get(i + 1).copied().unwrap_or(f64::NEG_INFINITY);
                t[i] > 0.5 && t[i] >= left && t[i] > right
            })
            .collect()
    }
}

fn wrap_detuning(delta: f64, fsr_angular: f64) -> f64 {
    delta - fsr_angular * (delta / fsr_angular).round()
}

/// Homodyne DC signal at cavity detuning `delta` (seed-mode frame).
///
/// The seed output is beaten against the LO output, each computed from its
/// own cavity response: `e = 2 Im(A_x · R_y*)`, with `R_y` the LO reflection
/// factor (LO mode unpumped, resonance shifted by the field's offset). Near
/// the seed resonance `R_y ≈ −1` and `e` reduces to [`error_signal`]. Without
/// an LO in the cavity the reference is taken as `R_y = −1` throughout.
/// Both modes repeat every free spectral range.
pub fn composite_error(params: &OpoParams, field: &TwoModeField, delta: f64) -> f64 {
    let fsr = params.fsr_angular();
    let seed_params = params.with_detuning(wrap_detuning(delta, fsr));
    let a_x = output_quadratures(&seed_params, field.seed).to_amplitude();
    let r_y = if field.has_lo() {
        let lo_params = OpoParams {
            chi: 0.0,
            detuning: wrap_detuning(delta - field.lo_resonance_offset, fsr),
            ..*params
        };
        output_quadratures(&lo_params, QuadPair::real_field(1.0)).to_amplitude()
    } else {
        Complex64::new(-1.0, 0.0)
    };
    2.0 * (a_x * r_y.conj()).im
}

fn intracavity_power(params: &OpoParams, seed: QuadPair) -> f64 {
    let a = intracavity_quadratures(params, seed);
    (a.x_plus * a.x_plus + a.x_minus * a.x_minus) / 4.0
}

/// Sweeps the cavity detuning across `grid`, recording the two-mode homodyne
/// error signal and the seed transmission.
pub fn sweep(params: &OpoParams, field: &TwoModeField, grid: &DetuningGrid) -> SweepTrace {
    let fsr = params.fsr_angular();
    let peak = intracavity_power(&params.with_detuning(0.0), field.seed);
    let detunings = grid.values().to_vec();
    let error_signal = detunings
        .iter()
        .map(|&d| composite_error(params, field, d))
        .collect();
    let transmission = detunings
        .iter()
        .map(|&d| {
            if peak > 0.0 {
                intracavity_power(&params.with_detuning(wrap_detuning(d, fsr)), field.seed) / peak
            } else {
                0.0
            }
        })
        .collect();
    SweepTrace {
        detunings,
        error_signal,
        transmission,
    }
}
