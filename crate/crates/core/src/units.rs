//! Quantities with units as written in run configurations.
//!
//! Values are stored in canonical units: rates in rad/s (a value given in Hz
//! is multiplied by 2π), plain frequencies in Hz, times in seconds, levels in
//! dB and diffusion constants in rad²/s³.

use std::f64::consts::TAU;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    /// Angular rate; accepts `Hz` (converted with 2π) or `rad/s`.
    Rate,
    /// Ordinary frequency in Hz.
    Frequency,
    Time,
    /// Decibels.
    Level,
    Diffusion,
    Dimensionless,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Rate => "rate (Hz or rad/s)",
            Dimension::Frequency => "frequency (Hz)",
            Dimension::Time => "time (s)",
            Dimension::Level => "level (dB)",
            Dimension::Diffusion => "diffusion (rad^2/s^3)",
            Dimension::Dimensionless => "dimensionless number",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnitError {
    #[error("empty value")]
    Empty,
    #[error("`{0}` is not a number")]
    BadNumber(String),
    #[error("`{0}` is not finite")]
    NonFinite(String),
    #[error("unit `{unit}` is not valid for a {dimension}")]
    UnknownUnit { unit: String, dimension: Dimension },
    #[error("a {0} needs an explicit unit")]
    MissingUnit(Dimension),
}

/// A parsed value in canonical units, with the unit text as written.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: String,
}

fn prefix_scale(prefix: &str, dimension: Dimension) -> Option<f64> {
    let small = matches!(dimension, Dimension::Time);
    match prefix {
        "" => Some(1.0),
        "k" => Some(1e3),
        "M" => Some(1e6),
        "G" => Some(1e9),
        "m" if small => Some(1e-3),
        "u" | "µ" if small => Some(1e-6),
        "n" if small => Some(1e-9),
        "p" if small => Some(1e-12),
        _ => None,
    }
}

fn unit_scale(unit: &str, dimension: Dimension) -> Option<f64> {
    let split = |base: &str| {
        unit.strip_suffix(base)
            .and_then(|p| prefix_scale(p, dimension))
    };
    match dimension {
        Dimension::Rate => split("Hz").map(|s| s * TAU).or_else(|| split("rad/s")),
        Dimension::Frequency => split("Hz"),
        Dimension::Time => split("s"),
        Dimension::Level => (unit == "dB").then_some(1.0),
        Dimension::Diffusion => matches!(unit, "rad^2/s^3" | "rad2/s3").then_some(1.0),
        Dimension::Dimensionless => None,
    }
}

/// Splits `text` into its numeric part and unit text.
fn split_number(text: &str) -> (&str, &str) {
    let mut prev = None;
    let mut end = text.len();
    for (i, c) in text.char_indices() {
        let sign_ok = matches!(c, '+' | '-') && (i == 0 || matches!(prev, Some('e' | 'E')));
        if !(c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E') || sign_ok) {
            end = i;
            break;
        }
        prev = Some(c);
    }
    (&text[..end], text[end..].trim())
}

pub fn parse_quantity(text: &str, dimension: Dimension) -> Result<Quantity, UnitError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(UnitError::Empty);
    }
    let (number, unit) = split_number(text);
    let value: f64 = number
        .parse()
        .map_err(|_| UnitError::BadNumber(text.to_string()))?;
    if !value.is_finite() {
        return Err(UnitError::NonFinite(text.to_string()));
    }
    let scale = if unit.is_empty() {
        match dimension {
            Dimension::Dimensionless => 1.0,
            _ => return Err(UnitError::MissingUnit(dimension)),
        }
    } else {
        unit_scale(unit, dimension).ok_or_else(|| UnitError::UnknownUnit {
            unit: unit.to_string(),
            dimension,
        })?
    };
    let value = value * scale;
    if !value.is_finite() {
        return Err(UnitError::NonFinite(text.to_string()));
    }
    Ok(Quantity {
        value,
        unit: unit.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(text: &str, d: Dimension) -> f64 {
        parse_quantity(text, d).unwrap().value
    }

    #[test]
    fn conversions() {
        assert!((q("6.0 MHz", Dimension::Rate) - TAU * 6e6).abs() < 1e-6);
        assert_eq!(q("2.5 rad/s", Dimension::Rate), 2.5);
        assert_eq!(q("3 krad/s", Dimension::Rate), 3e3);
        assert_eq!(q("199MHz", Dimension::Frequency), 199e6);
        assert_eq!(q("1.5 GHz", Dimension::Frequency), 1.5e9);
        assert_eq!(q("5 ns", Dimension::Time), 5e-9);
        assert_eq!(q("2 ms", Dimension::Time), 2e-3);
        assert_eq!(q("-2.6 dB", Dimension::Level), -2.6);
        assert_eq!(q("1e-3", Dimension::Dimensionless), 1e-3);
        assert_eq!(q("-1.5E+2", Dimension::Dimensionless), -150.0);
        assert_eq!(q("4 rad^2/s^3", Dimension::Diffusion), 4.0);
        assert_eq!(
            parse_quantity("6 MHz", Dimension::Rate).unwrap().unit,
            "MHz"
        );
    }

    #[test]
    fn rejections() {
        use UnitError::*;
        let e = |t: &str, d| parse_quantity(t, d).unwrap_err();
        assert_eq!(e("", Dimension::Rate), Empty);
        assert!(matches!(e("abc", Dimension::Rate), BadNumber(_)));
        assert!(matches!(e("1e999 Hz", Dimension::Rate), NonFinite(_)));
        assert!(matches!(e("inf", Dimension::Dimensionless), BadNumber(_)));
        assert!(matches!(e("6 MHz", Dimension::Time), UnknownUnit { .. }));
        assert!(matches!(e("6 mHz", Dimension::Rate), UnknownUnit { .. }));
        assert!(matches!(e("6", Dimension::Rate), MissingUnit(_)));
        assert!(matches!(
            e("6 dB", Dimension::Dimensionless),
            UnknownUnit { .. }
        ));
        assert!(matches!(e("1.2.3 Hz", Dimension::Rate), BadNumber(_)));
    }

    proptest! {
        #[test]
        fn never_panics(s in "\\PC*") {
            for d in [Dimension::Rate, Dimension::Time, Dimension::Level, Dimension::Dimensionless] {
                let _ = parse_quantity(&s, d);
            }
        }

        #[test]
        fn formatted_values_round_trip(v in -1e12f64..1e12) {
            let text = format!("{v:e} Hz");
            prop_assert_eq!(q(&text, Dimension::Frequency), v);
        }
    }
}
