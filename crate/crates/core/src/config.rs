//! Run configuration: a line-oriented `key = value` format with `[section]`
//! headers, plus `section.key=value` overrides.
//!
//! ```text
//! # comment
//! [opo]
//! fsr = 199 MHz
//! kappa = 5 MHz          # κ/2π; converted to rad/s
//! amplification = 3.9 dB
//! ```
//!
//! Every key is checked against the schema; unknown sections or keys are
//! errors. Parsing only checks syntax and units. Building the physical
//! objects (which can fail on physics grounds) is a separate step.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dynamics::{DynamicsError, Integrator, SimConfig};
use crate::ffsqueezer::FfError;
use crate::lockloop::{DisturbanceSpec, LockConfig, LockError, NoiseMode, PiGains};
use crate::params::{Efficiency, OpoParams, ParamError, TwoModeField};
use crate::spectra::{db_to_variance, infer_efficiency, SpectraError};
use crate::steadystate::{fit_gains, DetuningGrid, GainFit, GainModel, SteadyStateError};
use crate::units::{parse_quantity, Dimension, Quantity, UnitError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate key `{section}.{key}`")]
    DuplicateKey {
        section: String,
        key: String,
        line: usize,
    },
    #[error("unknown section `[{0}]`")]
    UnknownSection(String),
    #[error("unknown key `{section}.{key}`")]
    UnknownKey { section: String, key: String },
    #[error("`{section}.{key}`: {source}")]
    Unit {
        section: String,
        key: String,
        source: UnitError,
    },
    #[error("`{section}.{key}`: {reason}")]
    Invalid {
        section: String,
        key: String,
        reason: String,
    },
    #[error("override `{0}` must look like section.key=value")]
    BadOverride(String),
    #[error("[{section}] {reason}")]
    Conflict { section: String, reason: String },
}

/// Errors raised while turning a syntactically valid configuration into
/// physical objects.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    SteadyState(#[from] SteadyStateError),
    #[error(transparent)]
    Spectra(#[from] SpectraError),
    #[error(transparent)]
    Lock(#[from] LockError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Squeezer(#[from] FfError),
}

const IDENT_HINT: &str = "names use lowercase letters, digits and underscores";

fn is_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub value: String,
    /// Source line, or `None` for overrides.
    pub line: Option<usize>,
}

/// Untyped configuration: sections of key/value text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfigDocument {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut doc = ConfigDocument::default();
        let mut current: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let syntax = |message: String| ConfigError::Syntax { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| syntax("unterminated section header".into()))?
                    .trim();
                if !is_ident(name) {
                    return Err(syntax(format!("bad section name `{name}`; {IDENT_HINT}")));
                }
                doc.sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| syntax("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if !is_ident(key) {
                return Err(syntax(format!("bad key `{key}`; {IDENT_HINT}")));
            }
            if value.is_empty() {
                return Err(syntax(format!("key `{key}` has no value")));
            }
            let section = current
                .clone()
                .ok_or_else(|| syntax("key outside of any [section]".into()))?;
            let slot = doc.sections.entry(section.clone()).or_default();
            if slot.contains_key(key) {
                return Err(ConfigError::DuplicateKey {
                    section,
                    key: key.to_string(),
                    line,
                });
            }
            slot.insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line: Some(line),
                },
            );
        }
        Ok(doc)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section)?.get(key)
    }

    /// Sets or replaces a value. Overrides are not line-tracked.
    pub fn set(&mut self, section: &str, key: &str, value: &str) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(
                key.to_string(),
                Entry {
                    value: value.to_string(),
                    line: None,
                },
            );
    }

    pub fn apply_override(&mut self, text: &str) -> Result<(), ConfigError> {
        let (section, key, value) = parse_override(text)?;
        self.set(&section, &key, &value);
        Ok(())
    }

    /// Canonical text: sorted `section.key = value` lines.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (section, keys) in &self.sections {
            for (key, entry) in keys {
                let _ = writeln!(out, "{section}.{key} = {}", entry.value);
            }
        }
        out
    }

    /// SHA-256 of the canonical text, as lowercase hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().fold(
            String::with_capacity(64),
            |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            },
        )
    }
}

/// Splits `section.key=value`.
pub fn parse_override(text: &str) -> Result<(String, String, String), ConfigError> {
    let bad = || ConfigError::BadOverride(text.to_string());
    let (path, value) = text.split_once('=').ok_or_else(bad)?;
    let (section, key) = path.trim().split_once('.').ok_or_else(bad)?;
    let value = value.trim();
    if !is_ident(section) || !is_ident(key) || value.is_empty() || value.contains('#') {
        return Err(bad());
    }
    Ok((section.to_string(), key.to_string(), value.to_string()))
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("run", &["seed"]),
    (
        "opo",
        &[
            "fsr",
            "kappa",
            "kappa_s",
            "kappa_l",
            "chi",
            "amplification",
            "deamplification",
            "gain_model",
            "detuning",
        ],
    ),
    (
        "detection",
        &["efficiency", "detected_squeezing", "ideal_squeezing"],
    ),
    (
        "sweep",
        &[
            "start",
            "stop",
            "points",
            "seed_amplitude",
            "power_split",
            "lo_offset",
        ],
    ),
    (
        "spectrum",
        &[
            "start",
            "stop",
            "points",
            "reference",
            "simulate",
            "dt",
            "duration",
            "segment_length",
            "overlap",
            "trials",
            "integrator",
        ],
    ),
    (
        "lock",
        &[
            "kp",
            "ki",
            "actuator_bandwidth",
            "actuator_range",
            "noise_mode",
            "dt",
            "duration",
            "seed_amplitude",
            "sinusoid_amplitude",
            "sinusoid_frequency",
            "random_walk",
            "initial_offset",
            "trials",
            "record_every",
            "two_mode",
        ],
    ),
    (
        "squeezer",
        &[
            "transmittivity",
            "ancilla_squeezing",
            "input_mean_plus",
            "input_mean_minus",
            "trajectories",
            "samples",
        ],
    ),
];

struct Reader<'a> {
    doc: &'a ConfigDocument,
    section: &'static str,
}

impl<'a> Reader<'a> {
    fn raw(&self, key: &str) -> Option<&'a str> {
        self.doc.get(self.section, key).map(|e| e.value.as_str())
    }

    fn invalid(&self, key: &str, reason: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            section: self.section.to_string(),
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    fn quantity(&self, key: &str, dim: Dimension) -> Result<Option<Quantity>, ConfigError> {
        self.raw(key)
            .map(|v| {
                parse_quantity(v, dim).map_err(|source| ConfigError::Unit {
                    section: self.section.to_string(),
                    key: key.to_string(),
                    source,
                })
            })
            .transpose()
    }

    fn quantity_or(
        &self,
        key: &str,
        dim: Dimension,
        default: &str,
    ) -> Result<Quantity, ConfigError> {
        match self.quantity(key, dim)? {
            Some(q) => Ok(q),
            None => Ok(parse_quantity(default, dim).expect("schema defaults parse")),
        }
    }

    fn number_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self
            .quantity(key, Dimension::Dimensionless)?
            .map_or(default, |q| q.value))
    }

    fn integer<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| self.invalid(key, format!("`{v}` is not a non-negative integer")))
            })
            .transpose()
    }

    fn integer_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.integer(key)?.unwrap_or(default))
    }

    fn flag_or(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(self.invalid(key, format!("`{v}` is not true or false"))),
        }
    }

    fn choice<T>(&self, key: &str, options: &[(&str, T)], default: T) -> Result<T, ConfigError>
    where
        T: Copy,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => options
                .iter()
                .find(|(name, _)| *name == v)
                .map(|(_, t)| *t)
                .ok_or_else(|| {
                    let names: Vec<_> = options.iter().map(|(n, _)| *n).collect();
                    self.invalid(key, format!("`{v}` is not one of {}", names.join(", ")))
                }),
        }
    }
}

/// How the OPO rates are specified.
#[derive(Debug, Clone, PartialEq)]
pub enum OpoSpec {
    Rates {
        kappa_s: Quantity,
        kappa_l: Quantity,
        chi: Quantity,
    },
    /// Fit κs and χ to measured gains at a given total decay rate.
    Gains {
        kappa: Quantity,
        amplification: Quantity,
        deamplification: Quantity,
        model: GainModel,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpoSection {
    pub fsr: Quantity,
    pub spec: OpoSpec,
    pub detuning: Quantity,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EfficiencySpec {
    Fixed(f64),
    /// Inferred from detected and ideal squeezing levels (dB magnitudes).
    Inferred {
        detected: Quantity,
        ideal: Quantity,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSection {
    pub start: Quantity,
    pub stop: Quantity,
    pub points: usize,
    pub seed_amplitude: f64,
    pub power_split: f64,
    pub lo_offset: Quantity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSection {
    /// Sideband offsets from the reference resonance (rad/s).
    pub start: Quantity,
    pub stop: Quantity,
    pub points: usize,
    /// Absolute frequency of the resonance the trace is taken around (Hz).
    pub reference: Option<Quantity>,
    pub simulate: bool,
    pub dt: Option<Quantity>,
    pub duration: Option<Quantity>,
    pub segment_length: usize,
    pub overlap: f64,
    pub trials: usize,
    pub integrator: Integrator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockSection {
    pub kp: Option<f64>,
    pub ki: Option<Quantity>,
    pub actuator_bandwidth: Option<Quantity>,
    pub actuator_range: Option<Quantity>,
    pub noise_mode: NoiseMode,
    pub dt: Option<Quantity>,
    pub duration: Option<Quantity>,
    pub seed_amplitude: f64,
    pub sinusoid_amplitude: Quantity,
    pub sinusoid_frequency: Quantity,
    pub random_walk: Quantity,
    pub initial_offset: Quantity,
    pub trials: usize,
    pub record_every: usize,
    pub two_mode: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqueezerSection {
    pub transmittivity: f64,
    /// Ancilla squeezing as a positive dB magnitude.
    pub ancilla_squeezing: Quantity,
    pub input_mean_plus: f64,
    pub input_mean_minus: f64,
    pub trajectories: usize,
    pub samples: usize,
}

/// Typed configuration. Physical quantities keep the unit text they were
/// written with; values are canonical (rad/s, Hz, s, dB).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub opo: OpoSection,
    pub efficiency: EfficiencySpec,
    pub sweep: SweepSection,
    pub spectrum: SpectrumSection,
    pub lock: LockSection,
    pub squeezer: SqueezerSection,
    /// SHA-256 of the effective document.
    pub hash: String,
}

fn check_known(doc: &ConfigDocument) -> Result<(), ConfigError> {
    for (section, keys) in &doc.sections {
        let Some((_, known)) = SCHEMA.iter().find(|(s, _)| s == section) else {
            return Err(ConfigError::UnknownSection(section.clone()));
        };
        if let Some(key) = keys.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(ConfigError::UnknownKey {
                section: section.clone(),
                key: key.clone(),
            });
        }
    }
    Ok(())
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_document(&ConfigDocument::parse(text)?)
    }

    /// Parses `text`, applies `section.key=value` overrides in order, then
    /// types the result.
    pub fn parse_with_overrides<S: AsRef<str>>(
        text: &str,
        overrides: &[S],
    ) -> Result<Self, ConfigError> {
        let mut doc = ConfigDocument::parse(text)?;
        for o in overrides {
            doc.apply_override(o.as_ref())?;
        }
        Self::from_document(&doc)
    }

    pub fn from_document(doc: &ConfigDocument) -> Result<Self, ConfigError> {
        check_known(doc)?;
        let reader = |section| Reader { doc, section };

        let run = reader("run");
        let seed = run.integer_or("seed", 1u64)?;

        let r = reader("opo");
        let rates = [
            r.quantity("kappa_s", Dimension::Rate)?,
            r.quantity("kappa_l", Dimension::Rate)?,
            r.quantity("chi", Dimension::Rate)?,
        ];
        let gains = [
            r.quantity("kappa", Dimension::Rate)?,
            r.quantity("amplification", Dimension::Level)?,
            r.quantity("deamplification", Dimension::Level)?,
        ];
        let model = r.choice(
            "gain_model",
            &[
                ("input", GainModel::InputReferenced),
                ("unpumped", GainModel::UnpumpedReferenced),
            ],
            GainModel::InputReferenced,
        )?;
        let conflict = |reason: &str| ConfigError::Conflict {
            section: "opo".into(),
            reason: reason.into(),
        };
        let spec = match (rates, gains) {
            ([Some(ks), kl, Some(chi)], [None, None, None]) => OpoSpec::Rates {
                kappa_s: ks,
                kappa_l: kl.unwrap_or(Quantity {
                    value: 0.0,
                    unit: "Hz".into(),
                }),
                chi,
            },
            ([None, None, None], [Some(kappa), Some(amp), Some(deamp)]) => OpoSpec::Gains {
                kappa,
                amplification: amp,
                deamplification: deamp,
                model,
            },
            _ => {
                return Err(conflict(
                    "give either kappa_s, chi (and optionally kappa_l) or \
                     kappa, amplification and deamplification",
                ))
            }
        };
        let opo = OpoSection {
            fsr: r.quantity_or("fsr", Dimension::Frequency, "199 MHz")?,
            spec,
            detuning: r.quantity_or("detuning", Dimension::Rate, "0 Hz")?,
        };
        if !(opo.fsr.value > 0.0) {
            return Err(r.invalid("fsr", "must be positive"));
        }

        let d = reader("detection");
        let efficiency = match (
            d.quantity("efficiency", Dimension::Dimensionless)?,
            d.quantity("detected_squeezing", Dimension::Level)?,
            d.quantity("ideal_squeezing", Dimension::Level)?,
        ) {
            (Some(eta), None, None) => EfficiencySpec::Fixed(eta.value),
            (None, None, None) => EfficiencySpec::Fixed(1.0),
            (None, Some(detected), ideal) => {
                let ideal = match (ideal, &opo.spec) {
                    (Some(i), _) => i,
                    (
                        None,
                        OpoSpec::Gains {
                            deamplification, ..
                        },
                    ) => deamplification.clone(),
                    (None, OpoSpec::Rates { .. }) => {
                        return Err(d.invalid(
                            "ideal_squeezing",
                            "required when the OPO is not given by its gains",
                        ))
                    }
                };
                EfficiencySpec::Inferred { detected, ideal }
            }
            _ => {
                return Err(ConfigError::Conflict {
                    section: "detection".into(),
                    reason: "give either efficiency or detected_squeezing".into(),
                })
            }
        };

        let s = reader("sweep");
        let sweep = SweepSection {
            start: s.quantity_or("start", Dimension::Rate, "-60 MHz")?,
            stop: s.quantity_or("stop", Dimension::Rate, "180 MHz")?,
            points: s.integer_or("points", 4801usize)?,
            seed_amplitude: s.number_or("seed_amplitude", 1.0)?,
            power_split: s.number_or("power_split", TwoModeField::DEFAULT_POWER_SPLIT)?,
            lo_offset: s.quantity_or("lo_offset", Dimension::Rate, "120 MHz")?,
        };

        let p = reader("spectrum");
        let spectrum = SpectrumSection {
            start: p.quantity_or("start", Dimension::Rate, "-25 MHz")?,
            stop: p.quantity_or("stop", Dimension::Rate, "25 MHz")?,
            points: p.integer_or("points", 501usize)?,
            reference: p.quantity("reference", Dimension::Frequency)?,
            simulate: p.flag_or("simulate", false)?,
            dt: p.quantity("dt", Dimension::Time)?,
            duration: p.quantity("duration", Dimension::Time)?,
            segment_length: p.integer_or("segment_length", 4096usize)?,
            overlap: p.number_or("overlap", 0.5)?,
            trials: p.integer_or("trials", 4usize)?,
            integrator: p.choice(
                "integrator",
                &[
                    ("exact", Integrator::Exact),
                    ("euler", Integrator::EulerMaruyama),
                ],
                Integrator::Exact,
            )?,
        };

        let l = reader("lock");
        let lock = LockSection {
            kp: l.quantity("kp", Dimension::Dimensionless)?.map(|q| q.value),
            ki: l.quantity("ki", Dimension::Rate)?,
            actuator_bandwidth: l.quantity("actuator_bandwidth", Dimension::Rate)?,
            actuator_range: l.quantity("actuator_range", Dimension::Rate)?,
            noise_mode: l.choice(
                "noise_mode",
                &[
                    ("qnl", NoiseMode::Qnl),
                    ("squeezed", NoiseMode::Squeezed),
                    ("noiseless", NoiseMode::Noiseless),
                ],
                NoiseMode::Squeezed,
            )?,
            dt: l.quantity("dt", Dimension::Time)?,
            duration: l.quantity("duration", Dimension::Time)?,
            seed_amplitude: l.number_or("seed_amplitude", 1e6)?,
            sinusoid_amplitude: l.quantity_or("sinusoid_amplitude", Dimension::Rate, "0 Hz")?,
            sinusoid_frequency: l.quantity_or(
                "sinusoid_frequency",
                Dimension::Frequency,
                "0 Hz",
            )?,
            random_walk: l.quantity_or("random_walk", Dimension::Diffusion, "0 rad^2/s^3")?,
            initial_offset: l.quantity_or("initial_offset", Dimension::Rate, "0 Hz")?,
            trials: l.integer_or("trials", 0usize)?,
            record_every: l.integer_or("record_every", 10usize)?,
            two_mode: l.flag_or("two_mode", false)?,
        };
        if lock.record_every == 0 {
            return Err(l.invalid("record_every", "must be at least 1"));
        }

        let q = reader("squeezer");
        let squeezer = SqueezerSection {
            transmittivity: q.number_or("transmittivity", 0.5)?,
            ancilla_squeezing: q.quantity_or("ancilla_squeezing", Dimension::Level, "6 dB")?,
            input_mean_plus: q.number_or("input_mean_plus", 0.0)?,
            input_mean_minus: q.number_or("input_mean_minus", 0.0)?,
            trajectories: q.integer_or("trajectories", 8usize)?,
            samples: q.integer_or("samples", 0usize)?,
        };

        Ok(RunConfig {
            seed,
            opo,
            efficiency,
            sweep,
            spectrum,
            lock,
            squeezer,
            hash: doc.hash(),
        })
    }

    pub fn tau(&self) -> f64 {
        1.0 / self.opo.fsr.value
    }

    /// Gain fit, when the OPO is specified by its gains.
    pub fn gain_fit(&self) -> Result<Option<GainFit>, BuildError> {
        match &self.opo.spec {
            OpoSpec::Gains {
                amplification,
                deamplification,
                model,
                ..
            } => Ok(Some(fit_gains(
                amplification.value,
                deamplification.value,
                *model,
            )?)),
            OpoSpec::Rates { .. } => Ok(None),
        }
    }

    pub fn opo_params(&self) -> Result<OpoParams, BuildError> {
        let tau = self.tau();
        let params = match &self.opo.spec {
            OpoSpec::Rates {
                kappa_s,
                kappa_l,
                chi,
            } => OpoParams::new(kappa_s.value, kappa_l.value, chi.value, tau, 0.0)?,
            OpoSpec::Gains { kappa, .. } => {
                let fit = self.gain_fit()?.expect("gain spec");
                fit.params(kappa.value, tau)?
            }
        };
        Ok(OpoParams::new(
            params.kappa_s,
            params.kappa_l,
            params.chi,
            params.tau,
            self.opo.detuning.value,
        )?)
    }

    pub fn efficiency(&self) -> Result<Efficiency, BuildError> {
        let eta = match &self.efficiency {
            EfficiencySpec::Fixed(eta) => *eta,
            EfficiencySpec::Inferred { detected, ideal } => {
                infer_efficiency(detected.value, ideal.value)?
            }
        };
        Ok(Efficiency::new(eta)?)
    }

    pub fn two_mode_field(&self) -> Result<TwoModeField, BuildError> {
        Ok(TwoModeField::new(
            // Total amplitude so that the seed carries `seed_amplitude`.
            self.sweep.seed_amplitude / self.sweep.power_split.sqrt(),
            self.sweep.power_split,
            self.sweep.lo_offset.value,
        )?)
    }

    pub fn detuning_grid(&self) -> Result<DetuningGrid, BuildError> {
        Ok(DetuningGrid::new(
            self.sweep.start.value,
            self.sweep.stop.value,
            self.sweep.points,
        )?)
    }

    /// Sideband angular frequencies for the spectrum trace.
    pub fn spectrum_grid(&self) -> Result<Vec<f64>, BuildError> {
        let grid = DetuningGrid::new(
            self.spectrum.start.value,
            self.spectrum.stop.value,
            self.spectrum.points,
        )?;
        Ok(grid.values().to_vec())
    }

    /// Absolute frequency (Hz) the spectrum is centred on; the FSR unless
    /// set explicitly.
    pub fn spectrum_reference(&self) -> f64 {
        self.spectrum
            .reference
            .as_ref()
            .map_or(self.opo.fsr.value, |q| q.value)
    }

    /// Stochastic simulation settings; dt defaults to 0.02/κ and the
    /// duration to 2¹⁸ steps.
    pub fn sim_config(&self) -> Result<SimConfig, BuildError> {
        let params = self.opo_params()?.with_detuning(0.0);
        let dt = self
            .spectrum
            .dt
            .as_ref()
            .map_or(0.02 / params.kappa(), |q| q.value);
        let duration = self
            .spectrum
            .duration
            .as_ref()
            .map_or(dt * (1u64 << 18) as f64, |q| q.value);
        let sim = SimConfig {
            dt,
            duration,
            seed_value: self.seed,
            params,
            record_decimation: 1,
            integrator: self.spectrum.integrator,
        };
        sim.validate()?;
        Ok(sim)
    }

    /// Lock loop; unset controller and timing keys take the defaults of
    /// [`LockConfig::tuned`].
    pub fn lock_config(&self) -> Result<LockConfig, BuildError> {
        let params = self.opo_params()?.with_detuning(0.0);
        let l = &self.lock;
        let mut config = LockConfig::tuned(params, l.seed_amplitude);
        if let Some(kp) = l.kp {
            config.controller.kp = kp;
        }
        let value = |q: &Option<Quantity>| q.as_ref().map(|q| q.value);
        config.controller = PiGains {
            kp: config.controller.kp,
            ki: value(&l.ki).unwrap_or(config.controller.ki),
        };
        config.actuator_bandwidth =
            value(&l.actuator_bandwidth).unwrap_or(config.actuator_bandwidth);
        config.actuator_range = value(&l.actuator_range).unwrap_or(config.actuator_range);
        config.dt = value(&l.dt).unwrap_or(config.dt);
        config.duration = value(&l.duration).unwrap_or(config.duration);
        config.noise_mode = l.noise_mode;
        config.rng_seed = self.seed;
        config.disturbance = DisturbanceSpec {
            sinusoid_amplitude: l.sinusoid_amplitude.value,
            sinusoid_frequency: l.sinusoid_frequency.value,
            random_walk_diffusion: l.random_walk.value,
            initial_offset: l.initial_offset.value,
        };
        if l.two_mode {
            let field = TwoModeField::new(
                l.seed_amplitude / self.sweep.power_split.sqrt(),
                self.sweep.power_split,
                self.sweep.lo_offset.value,
            )?;
            config.field = Some(field);
        }
        config.validate()?;
        Ok(config)
    }

    /// Ancilla X⁻ variance from its squeezing level.
    pub fn ancilla_v_minus(&self) -> f64 {
        db_to_variance(-self.squeezer.ancilla_squeezing.value.abs())
    }
}
