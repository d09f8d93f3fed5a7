//! Analytic fluctuation spectra of the OPO output on resonance.
//!
//! Seed and loss ports carry independent unit-variance vacuum noise. The
//! output fluctuation at sideband frequency ω (relative to one longitudinal
//! resonance) is
//!
//! ```text
//! δX^± = { δX_s^± [2κs − (κ+iω) ± χ] + δX_l^± 2√(κs κl) } / [(κ+iω) ∓ χ]
//! ```
//!
//! and detection losses act as a beamsplitter: V → 1 − η(1 − V).

use num_complex::Complex64;
use thiserror::Error;

use crate::params::{Efficiency, OpoParams, Quadrature};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectraError {
    #[error("detected squeezing {detected_db} dB exceeds the attainable {ideal_db} dB")]
    Inconsistent { detected_db: f64, ideal_db: f64 },
    #[error(
        "squeezing levels must be finite non-negative dB magnitudes with a non-zero ideal level"
    )]
    InvalidLevel,
}

/// Fraction of the FSR beyond which the single-resonance model is flagged.
const VALIDITY_FRACTION: f64 = 0.1;

fn check_validity(params: &OpoParams, omega: f64) -> bool {
    let ok = omega.abs() <= VALIDITY_FRACTION * params.fsr_angular();
    if !ok {
        log::warn!(
            "sideband {omega:.3e} rad/s is not small against the free spectral range {:.3e} Hz",
            params.fsr()
        );
    }
    ok
}

/// Seed and loss transfer coefficients `(c_s, c_l)` for one quadrature.
/// The detuning of `params` is ignored (evaluated on resonance).
pub fn transfer_coefficients(
    params: &OpoParams,
    omega: f64,
    quadrature: Quadrature,
) -> (Complex64, Complex64) {
    let sgn = quadrature.sign();
    let k = Complex64::new(params.kappa(), omega);
    let denom = k - sgn * params.chi;
    let c_s = (2.0 * params.kappa_s - k + sgn * params.chi) / denom;
    let c_l = 2.0 * (params.kappa_s * params.kappa_l).sqrt() / denom;
    (c_s, c_l)
}

fn ideal_variance(params: &OpoParams, omega: f64, quadrature: Quadrature) -> f64 {
    let (c_s, c_l) = transfer_coefficients(params, omega, quadrature);
    c_s.norm_sqr() + c_l.norm_sqr()
}

/// Output quadrature variance relative to the quantum noise limit.
pub fn variance(params: &OpoParams, omega: f64, quadrature: Quadrature, eta: Efficiency) -> f64 {
    check_validity(params, omega);
    let v = ideal_variance(params, omega, quadrature);
    1.0 - eta.value() * (1.0 - v)
}

pub fn variance_db(v: f64) -> f64 {
    10.0 * v.log10()
}

pub fn db_to_variance(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Detection efficiency implied by measuring `detected_db` of squeezing when
/// `ideal_db` is attainable: η = (1 − V_det)/(1 − V_ideal).
///
/// Both arguments are squeezing magnitudes (positive dB below the QNL). For
/// 2.0 dB detected against 2.6 dB attainable this gives η ≈ 0.82; a claim of
/// more than 87% for those inputs does not follow from this loss model.
pub fn infer_efficiency(detected_db: f64, ideal_db: f64) -> Result<f64, SpectraError> {
    let (v_det, v_ideal) = levels(detected_db, ideal_db)?;
    Ok((1.0 - v_det) / (1.0 - v_ideal))
}

/// Amplitude-domain variant: η = (1 − √V_det)/(1 − √V_ideal), i.e. the
/// same ratio taken on noise amplitudes rather than variances.
pub fn infer_efficiency_amplitude(detected_db: f64, ideal_db: f64) -> Result<f64, SpectraError> {
    let (v_det, v_ideal) = levels(detected_db, ideal_db)?;
    Ok((1.0 - v_det.sqrt()) / (1.0 - v_ideal.sqrt()))
}

fn levels(detected_db: f64, ideal_db: f64) -> Result<(f64, f64), SpectraError> {
    if !(detected_db.is_finite() && ideal_db.is_finite()) || detected_db < 0.0 || ideal_db <= 0.0 {
        return Err(SpectraError::InvalidLevel);
    }
    if detected_db > ideal_db {
        return Err(SpectraError::Inconsistent {
            detected_db,
            ideal_db,
        });
    }
    Ok((db_to_variance(-detected_db), db_to_variance(-ideal_db)))
}

/// Both quadrature variances sampled over a sideband-frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTrace {
    /// Sideband frequencies ω relative to the resonance (rad/s).
    pub frequencies: Vec<f64>,
    pub variance_plus: Vec<f64>,
    pub variance_minus: Vec<f64>,
    pub efficiency: Efficiency,
    /// Absolute frequency of the resonance the sidebands refer to (Hz).
    pub reference_hz: f64,
}

impl SpectrumTrace {
    /// `reference_hz + ω/2π` for every sample.
    pub fn absolute_frequencies_hz(&self) -> Vec<f64> {
        self.frequencies
            .iter()
            .map(|w| self.reference_hz + w / std::f64::consts::TAU)
            .collect()
    }

    pub fn min_variance_minus(&self) -> Option<(usize, f64)> {
        self.variance_minus
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Samples the analytic spectrum around the first FSR resonance.
pub fn spectrum_trace(params: &OpoParams, grid: &[f64], eta: Efficiency) -> SpectrumTrace {
    let outside = grid
        .iter()
        .filter(|w| w.abs() > VALIDITY_FRACTION * params.fsr_angular())
        .count();
    if outside > 0 {
        log::warn!(
            "{outside} sideband frequencies lie outside the single-resonance validity range"
        );
    }
    let eval = |q| {
        grid.iter()
            .map(|&w| 1.0 - eta.value() * (1.0 - ideal_variance(params, w, q)))
            .collect()
    };
    SpectrumTrace {
        frequencies: grid.to_vec(),
        variance_plus: eval(Quadrature::Plus),
        variance_minus: eval(Quadrature::Minus),
        efficiency: eta,
        reference_hz: params.fsr(),
    }
}
