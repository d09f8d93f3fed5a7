//! Simulation of a homodyne-locked, sub-threshold optical parametric
//! oscillator.
//!
//! A single phase-quadrature homodyne measurement of the OPO output serves
//! two purposes at once: its DC part is a bipolar error signal for locking
//! the cavity to the laser, and its fluctuations are the squeezed output.
//! The crate models both halves and what can be built on them:
//!
//! - [`params`]: shared domain types and validation.
//! - [`steadystate`]: classical outputs, error signal, gains, detuning sweeps.
//! - [`spectra`]: analytic squeezing spectra and detection efficiency.
//! - [`dynamics`] and [`psd`]: stochastic time-domain oracle and Welch spectra.
//! - [`lockloop`]: closed-loop frequency lock with a squeezed discriminator.
//! - [`ffsqueezer`]: Gaussian feed-forward universal squeezer.
//! - [`config`] and [`units`]: the `key = value` run-configuration format.

// `!(x > 0.0)` style checks deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dynamics;
pub mod ffsqueezer;
pub mod lockloop;
pub mod params;
pub mod psd;
pub mod spectra;
pub mod steadystate;
pub mod units;

pub use params::{Efficiency, OpoParams, ParamError, QuadPair, Quadrature, TwoModeField};
