//! Welch-averaged periodograms.
//!
//! Densities are normalised per sample: a white sequence of variance σ²
//! estimates to a flat σ² at every frequency. Only the non-negative half of
//! the spectrum is returned and it is not folded, so the value is directly
//! the two-sided density in units of the sample variance.

use std::f64::consts::TAU;

use rustfft::{num_complex::Complex, FftPlanner};
use thiserror::Error;

pub const MIN_SEGMENTS: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PsdError {
    #[error("segment length {segment} must be between 2 and the series length {len}")]
    SegmentLength { segment: usize, len: usize },
    #[error("overlap {0} is outside [0, 0.9]")]
    Overlap(f64),
    #[error("only {found} segments fit; at least {MIN_SEGMENTS} are required")]
    TooFewSegments { found: usize },
    #[error("sample interval must be positive and finite, got {0}")]
    SampleInterval(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    /// Bin centres as angular frequencies (rad/s), from 0 to Nyquist.
    pub frequencies: Vec<f64>,
    pub density: Vec<f64>,
    pub segments: usize,
}

/// Periodic Hann window.
pub fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 * (1.0 - (TAU * n as f64 / len as f64).cos()))
        .collect()
}

/// Number of segments Welch averaging will use.
pub fn segment_count(len: usize, segment_length: usize, overlap: f64) -> usize {
    if segment_length == 0 || segment_length > len {
        return 0;
    }
    let step = segment_step(segment_length, overlap);
    (len - segment_length) / step + 1
}

fn segment_step(segment_length: usize, overlap: f64) -> usize {
    ((segment_length as f64 * (1.0 - overlap)).round() as usize).max(1)
}

pub fn welch(
    samples: &[f64],
    sample_interval: f64,
    segment_length: usize,
    overlap: f64,
) -> Result<Psd, PsdError> {
    if !(sample_interval > 0.0 && sample_interval.is_finite()) {
        return Err(PsdError::SampleInterval(sample_interval));
    }
    if !(0.0..=0.9).contains(&overlap) {
        return Err(PsdError::Overlap(overlap));
    }
    if segment_length < 2 || segment_length > samples.len() {
        return Err(PsdError::SegmentLength {
            segment: segment_length,
            len: samples.len(),
        });
    }
    let segments = segment_count(samples.len(), segment_length, overlap);
    if segments < MIN_SEGMENTS {
        return Err(PsdError::TooFewSegments { found: segments });
    }

    let window = hann(segment_length);
    let power: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(segment_length);
    let bins = segment_length / 2 + 1;
    let step = segment_step(segment_length, overlap);
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex::new(0.0, 0.0); segment_length];
    for s in 0..segments {
        let chunk = &samples[s * step..s * step + segment_length];
        for ((b, x), w) in buf.iter_mut().zip(chunk).zip(&window) {
            *b = Complex::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let norm = 1.0 / (power * segments as f64);
    let df = TAU / (segment_length as f64 * sample_interval);
    Ok(Psd {
        frequencies: (0..bins).map(|k| k as f64 * df).collect(),
        density: acc.into_iter().map(|a| a * norm).collect(),
        segments,
    })
}
