//! Fast invariant checks runnable from the command line.

use homolock::config::RunConfig;
use homolock::dynamics::integrate_mean;
use homolock::ffsqueezer::{
    squeezer_transfer, universal_squeezer, FeedforwardConfig, GaussianState,
};
use homolock::spectra::{infer_efficiency, variance};
use homolock::steadystate::{classical_gain_db, fit_gains, output_quadratures, sweep, GainModel};
use homolock::{Efficiency, OpoParams, QuadPair, Quadrature};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::commands::FIG2_CONFIG;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, tolerance: f64) -> Check {
    Check {
        name,
        passed: worst <= tolerance,
        detail: format!("worst {worst:.3e}, tolerance {tolerance:.1e}"),
    }
}

fn omega_grid(kappa: f64) -> impl Iterator<Item = f64> {
    (0..200).map(move |i| i as f64 * 0.05 * kappa)
}

fn random_params(rng: &mut StdRng, chi_fraction: f64, lossless: bool) -> OpoParams {
    let kappa_s = rng.random_range(0.2..2.0);
    let kappa_l = if lossless {
        0.0
    } else {
        rng.random_range(0.0..1.0)
    };
    let chi = chi_fraction * rng.random_range(0.0..0.95) * (kappa_s + kappa_l);
    OpoParams::new(kappa_s, kappa_l, chi, 1e-3, 0.0).expect("sub-threshold draw")
}

fn vacuum_normalisation(rng: &mut StdRng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let p = random_params(rng, 0.0, false);
        let eta = Efficiency::new(rng.random_range(0.1..=1.0)).expect("valid efficiency");
        for w in omega_grid(p.kappa()) {
            for q in [Quadrature::Plus, Quadrature::Minus] {
                worst = worst.max((variance(&p, w, q, eta) - 1.0).abs());
            }
        }
    }
    check("vacuum spectra equal one without gain", worst, 1e-12)
}

fn purity(rng: &mut StdRng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let p = random_params(rng, 1.0, true);
        for w in omega_grid(p.kappa()) {
            let plus = variance(&p, w, Quadrature::Plus, Efficiency::PERFECT);
            let minus = variance(&p, w, Quadrature::Minus, Efficiency::PERFECT);
            worst = worst.max((plus * minus - 1.0).abs());
        }
    }
    check("lossless spectra are minimum uncertainty", worst, 1e-12)
}

fn steady_state(rng: &mut StdRng) -> Check {
    let mut worst = 0.0f64;
    for _ in 0..25 {
        let p = random_params(rng, 1.0, false).with_detuning(rng.random_range(-1.0..1.0));
        let seed = QuadPair::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let expected = output_quadratures(&p, seed);
        let t_end = 60.0 / homolock::dynamics::slowest_decay_rate(&p);
        match integrate_mean(&p, seed, t_end) {
            Ok(got) => {
                let scale = expected.x_plus.hypot(expected.x_minus);
                let err = (got.x_plus - expected.x_plus).hypot(got.x_minus - expected.x_minus);
                worst = worst.max(err / scale);
            }
            Err(_) => worst = f64::INFINITY,
        }
    }
    check("integrated mean field matches steady state", worst, 1e-8)
}

fn gains() -> Check {
    let worst = match fit_gains(3.9, 2.6, GainModel::InputReferenced) {
        Ok(fit) => {
            let p = fit.params(1.0, 1e-3).expect("fitted parameters are valid");
            let amp = classical_gain_db(&p, Quadrature::Plus, fit.model);
            let deamp = classical_gain_db(&p, Quadrature::Minus, fit.model);
            (amp - 3.9).abs().max((deamp + 2.6).abs())
        }
        Err(_) => f64::INFINITY,
    };
    check("gain fit reproduces 3.9/2.6 dB", worst, 1e-6)
}

fn efficiency() -> Check {
    let worst = infer_efficiency(2.0, 2.6).map_or(f64::INFINITY, |eta| (eta - 0.82).abs());
    check("efficiency from 2.0 dB of 2.6 dB", worst, 0.01)
}

fn default_sweep() -> Check {
    let outcome = RunConfig::parse(FIG2_CONFIG).ok().and_then(|c| {
        let trace = sweep(
            &c.opo_params().ok()?,
            &c.two_mode_field().ok()?,
            &c.detuning_grid().ok()?,
        );
        let crossings = trace.zero_crossings();
        let slope = |i: usize| (trace.error_signal[i + 1] - trace.error_signal[i]).signum();
        Some(crossings.len() == 2 && slope(crossings[0]) != slope(crossings[1]))
    });
    Check {
        name: "default sweep has two opposite-slope crossings",
        passed: outcome == Some(true),
        detail: format!("{outcome:?}"),
    }
}

fn squeezer() -> Check {
    let mut worst = 0.0f64;
    for t in [0.1, 0.5, 0.9] {
        let transfer = FeedforwardConfig::new(t).and_then(|c| squeezer_transfer(&c));
        match transfer {
            Ok(tr) => {
                worst = worst
                    .max(tr.ancilla[(1, 1)].abs())
                    .max(tr.ancilla[(1, 0)].abs())
                    .max((tr.input[(1, 1)] - 1.0 / t.sqrt()).abs());
            }
            Err(_) => worst = f64::INFINITY,
        }
        let physical = universal_squeezer(&GaussianState::vacuum(1), 0.25, t)
            .map(|s| s.is_physical())
            .unwrap_or(false);
        if !physical {
            worst = f64::INFINITY;
        }
    }
    check("feed-forward cancels the ancilla in X-", worst, 1e-12)
}

/// Runs every check with a fixed RNG seed.
pub fn run_checks() -> Vec<Check> {
    let mut rng = StdRng::seed_from_u64(0x5eed);
    vec![
        vacuum_normalisation(&mut rng),
        purity(&mut rng),
        steady_state(&mut rng),
        gains(),
        efficiency(),
        default_sweep(),
        squeezer(),
    ]
}
