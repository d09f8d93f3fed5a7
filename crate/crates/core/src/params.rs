//! Domain types shared by every simulation module.
//!
//! All rates are angular frequencies in rad/s. Quadratures are normalised so
//! that vacuum fluctuations have unit variance, which puts the quantum noise
//! limit at exactly 1.
//!
//! The rotating frame is referenced to the nominal laser frequency; that
//! frequency never enters a calculation, only the detuning relative to it.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error("{name} must be non-negative, got {value}")]
    NonPositiveRate { name: &'static str, value: f64 },
    #[error("nonlinear coupling chi = {chi} is not below the total decay rate kappa = {kappa}")]
    ThresholdViolation { chi: f64, kappa: f64 },
    #[error("reflectivity {name} = {value} is outside (0, 1]")]
    NonPhysicalReflectivity { name: &'static str, value: f64 },
    #[error("power split {0} is outside (0, 1]")]
    PowerSplit(f64),
    #[error("detection efficiency {0} is outside (0, 1]")]
    Efficiency(f64),
}

/// Which quadrature of a field: amplitude (`Plus`, X⁺) or phase (`Minus`, X⁻).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quadrature {
    Plus,
    Minus,
}

impl Quadrature {
    /// +1 for the amplitude quadrature, -1 for the phase quadrature.
    pub fn sign(self) -> f64 {
        match self {
            Quadrature::Plus => 1.0,
            Quadrature::Minus => -1.0,
        }
    }

    pub fn conjugate(self) -> Self {
        match self {
            Quadrature::Plus => Quadrature::Minus,
            Quadrature::Minus => Quadrature::Plus,
        }
    }

    /// Offset of this quadrature inside a per-mode `(X⁺, X⁻)` block.
    pub fn offset(self) -> usize {
        match self {
            Quadrature::Plus => 0,
            Quadrature::Minus => 1,
        }
    }
}

/// Rates and geometry of a singly-resonant sub-threshold OPO.
///
/// Fields are public so that a candidate parameter set can be assembled and
/// then checked with [`validate`]; the constructors validate eagerly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpoParams {
    /// Decay rate through the output coupler (rad/s).
    pub kappa_s: f64,
    /// Decay rate through every other loss channel (rad/s).
    pub kappa_l: f64,
    /// Nonlinear coupling strength (rad/s).
    pub chi: f64,
    /// Cavity round-trip time (s).
    pub tau: f64,
    /// Cavity resonance minus the nominal laser frequency (rad/s).
    pub detuning: f64,
}

impl OpoParams {
    pub fn new(
        kappa_s: f64,
        kappa_l: f64,
        chi: f64,
        tau: f64,
        detuning: f64,
    ) -> Result<Self, ParamError> {
        validate(OpoParams {
            kappa_s,
            kappa_l,
            chi,
            tau,
            detuning,
        })
    }

    /// Builds the decay rates from mirror reflectivities via κᵢ = (1 − Rᵢ)/(2τ).
    pub fn from_reflectivities(
        r_s: f64,
        r_l: f64,
        chi: f64,
        tau: f64,
        detuning: f64,
    ) -> Result<Self, ParamError> {
        check_finite("tau", tau)?;
        if tau <= 0.0 {
            return Err(ParamError::NonPositiveRate {
                name: "tau",
                value: tau,
            });
        }
        for (name, r) in [("r_s", r_s), ("r_l", r_l)] {
            check_finite(name, r)?;
            if !(r > 0.0 && r <= 1.0) {
                return Err(ParamError::NonPhysicalReflectivity { name, value: r });
            }
        }
        Self::new(
            (1.0 - r_s) / (2.0 * tau),
            (1.0 - r_l) / (2.0 * tau),
            chi,
            tau,
            detuning,
        )
    }

    /// Normalised units: κ = 1 split between coupler and loss, with a round
    /// trip short enough that every reflectivity stays physical.
    pub fn normalized(kappa_s_over_kappa: f64, chi_over_kappa: f64) -> Result<Self, ParamError> {
        Self::new(
            kappa_s_over_kappa,
            1.0 - kappa_s_over_kappa,
            chi_over_kappa,
            1e-3,
            0.0,
        )
    }

    /// Total decay rate κ = κs + κl.
    pub fn kappa(&self) -> f64 {
        self.kappa_s + self.kappa_l
    }

    /// Free spectral range in Hz.
    pub fn fsr(&self) -> f64 {
        1.0 / self.tau
    }

    /// Free spectral range as an angular frequency.
    pub fn fsr_angular(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.tau
    }

    pub fn reflectivity_s(&self) -> f64 {
        1.0 - 2.0 * self.tau * self.kappa_s
    }

    pub fn reflectivity_l(&self) -> f64 {
        1.0 - 2.0 * self.tau * self.kappa_l
    }

    pub fn with_detuning(&self, detuning: f64) -> Self {
        OpoParams { detuning, ..*self }
    }

    pub fn with_chi(&self, chi: f64) -> Result<Self, ParamError> {
        validate(OpoParams { chi, ..*self })
    }
}

fn check_finite(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ParamError::NonFinite { name, value })
    }
}

/// Returns `params` unchanged iff every invariant holds.
pub fn validate(params: OpoParams) -> Result<OpoParams, ParamError> {
    let OpoParams {
        kappa_s,
        kappa_l,
        chi,
        tau,
        detuning,
    } = params;
    check_finite("kappa_s", kappa_s)?;
    check_finite("kappa_l", kappa_l)?;
    check_finite("chi", chi)?;
    check_finite("tau", tau)?;
    check_finite("detuning", detuning)?;
    for (name, value) in [("kappa_s", kappa_s), ("kappa_l", kappa_l), ("chi", chi)] {
        if value < 0.0 {
            return Err(ParamError::NonPositiveRate { name, value });
        }
    }
    if tau <= 0.0 {
        return Err(ParamError::NonPositiveRate {
            name: "tau",
            value: tau,
        });
    }
    let kappa = kappa_s + kappa_l;
    if kappa <= 0.0 {
        return Err(ParamError::NonPositiveRate {
            name: "kappa",
            value: kappa,
        });
    }
    if chi >= kappa {
        return Err(ParamError::ThresholdViolation { chi, kappa });
    }
    for (name, value) in [
        ("r_s", params.reflectivity_s()),
        ("r_l", params.reflectivity_l()),
    ] {
        if !(value > 0.0 && value <= 1.0) {
            return Err(ParamError::NonPhysicalReflectivity { name, value });
        }
    }
    Ok(params)
}

/// Free spectral range 1/τ in Hz.
pub fn fsr_of(params: &OpoParams) -> f64 {
    params.fsr()
}

/// An `(X⁺, X⁻)` quadrature pair.
///
/// With the convention X⁺ = A + A*, X⁻ = iA − iA*, the complex amplitude is
/// A = (X⁺ − iX⁻)/2, so X⁻ = −2 Im A.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadPair {
    pub x_plus: f64,
    pub x_minus: f64,
}

impl QuadPair {
    pub const ZERO: QuadPair = QuadPair {
        x_plus: 0.0,
        x_minus: 0.0,
    };

    pub fn new(x_plus: f64, x_minus: f64) -> Self {
        QuadPair { x_plus, x_minus }
    }

    /// Quadratures of a real classical field of amplitude `amplitude`.
    pub fn real_field(amplitude: f64) -> Self {
        QuadPair::new(2.0 * amplitude, 0.0)
    }

    pub fn from_amplitude(a: Complex64) -> Self {
        let i = Complex64::i();
        QuadPair {
            x_plus: (a + a.conj()).re,
            x_minus: (i * a - i * a.conj()).re,
        }
    }

    pub fn to_amplitude(self) -> Complex64 {
        Complex64::new(self.x_plus, -self.x_minus) / 2.0
    }

    pub fn get(self, q: Quadrature) -> f64 {
        match q {
            Quadrature::Plus => self.x_plus,
            Quadrature::Minus => self.x_minus,
        }
    }

    pub fn scale(self, k: f64) -> Self {
        QuadPair::new(k * self.x_plus, k * self.x_minus)
    }
}

/// Seed mode x̂ (resonant, pumped) plus a co-propagating local oscillator ŷ
/// in the orthogonal polarisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeField {
    pub seed: QuadPair,
    pub lo: QuadPair,
    /// Offset of the ŷ resonance relative to the x̂ resonance (rad/s).
    pub lo_resonance_offset: f64,
    /// Fraction of the total input power carried by the seed mode.
    pub power_split: f64,
}

impl TwoModeField {
    pub const DEFAULT_POWER_SPLIT: f64 = 0.01;

    /// Splits a real input field of amplitude `total_amplitude` between the
    /// two modes. `power_split = 1` leaves no light in ŷ; the homodyne
    /// reference is then taken to bypass the cavity.
    pub fn new(
        total_amplitude: f64,
        power_split: f64,
        lo_resonance_offset: f64,
    ) -> Result<Self, ParamError> {
        check_finite("total_amplitude", total_amplitude)?;
        check_finite("lo_resonance_offset", lo_resonance_offset)?;
        if !(power_split > 0.0 && power_split <= 1.0) {
            return Err(ParamError::PowerSplit(power_split));
        }
        Ok(TwoModeField {
            seed: QuadPair::real_field(total_amplitude * power_split.sqrt()),
            lo: QuadPair::real_field(total_amplitude * (1.0 - power_split).sqrt()),
            lo_resonance_offset,
            power_split,
        })
    }

    pub fn has_lo(&self) -> bool {
        self.power_split < 1.0
    }
}

/// Overall escape and detection efficiency η ∈ (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Efficiency(f64);

impl Efficiency {
    pub const PERFECT: Efficiency = Efficiency(1.0);

    pub fn new(eta: f64) -> Result<Self, ParamError> {
        if eta > 0.0 && eta <= 1.0 {
            Ok(Efficiency(eta))
        } else {
            Err(ParamError::Efficiency(eta))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Efficiency {
    fn default() -> Self {
        Efficiency::PERFECT
    }
}
