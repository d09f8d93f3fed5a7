//! Deterministic CSV emission.

use std::fmt::Write as _;

/// Formats like C's `%.12e`: twelve fractional digits and a signed exponent
/// of at least two digits.
pub fn sci(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    let s = format!("{x:.12e}");
    let (mantissa, exponent) = s.split_once('e').expect("exponent present");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    let sign = if exponent < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exponent.unsigned_abs())
}

/// Provenance written at the top of every CSV.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    fn lines(&self) -> Vec<String> {
        vec![
            format!("homolock {}", env!("CARGO_PKG_VERSION")),
            format!("command: {}", self.command),
            format!("config_sha256: {}", self.config_hash),
            format!("seed: {}", self.seed),
        ]
    }
}

/// Columns of numbers with `#` comment lines above the header row.
#[derive(Debug, Clone)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
    notes: Vec<String>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        self.notes.push(text.into());
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn render(&self, provenance: &Provenance) -> String {
        let mut out = String::new();
        for line in provenance.lines().iter().chain(&self.notes) {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(out, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| sci(x)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}
