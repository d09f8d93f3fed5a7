//! Acceptance criteria, one test per criterion. Each prints a single
//! `criterion N ... PASS|FAIL` line (written past the output capture) and
//! then asserts. Expected values come from closed forms evaluated here,
//! independently of the library routes under test.

use std::f64::consts::TAU;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use homolock::config::RunConfig;
use homolock::dynamics::{averaged_psd, integrate_mean, slowest_decay_rate, Integrator, SimConfig};
use homolock::ffsqueezer::{
    apply_feedforward, sample_squeezer, squeezer_transfer, FeedforwardConfig, GaussianState,
};
use homolock::lockloop::{
    residual_noise_comparison, simulate_lock, DisturbanceSpec, LockConfig, NoiseMode,
};
use homolock::spectra::{infer_efficiency, spectrum_trace, variance, variance_db};
use homolock::steadystate::{classical_gain_db, fit_gains, sweep, GainModel, SteadyStateError};
use homolock::{Efficiency, OpoParams, QuadPair, Quadrature};
use homolock_cli::commands::{FIG2_CONFIG, FIG3_CONFIG};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const QNL_TOL: f64 = 1e-12;
const PURITY_TOL: f64 = 1e-12;
const OMEGA_POINTS: usize = 1000;
const PARAM_DRAWS: usize = 100;
const STEADY_STATE_REL_TOL: f64 = 1e-8;
const STEADY_STATE_SETS: usize = 1000;
const PSD_REL_TOL: f64 = 0.05;
const PSD_SETS: usize = 10;
const PSD_MIN_SEGMENTS: usize = 256;
const PSD_MAX_OMEGA_OVER_KAPPA: f64 = 3.0;
const GAIN_TOL_DB: f64 = 1e-6;
const AMPLIFICATION_DB: f64 = 3.9;
const DEAMPLIFICATION_DB: f64 = 2.6;
const DETECTED_DB: f64 = 2.0;
const EFFICIENCY_TARGET: f64 = 0.82;
const EFFICIENCY_TOL: f64 = 0.01;
const QUOTED_EFFICIENCY_PERCENT: &str = "87%";
const FIG3_TARGET_DB: f64 = -2.0;
const FIG3_TOL_DB: f64 = 0.3;
const FIG3_FSR_HZ: f64 = 199e6;
const DISCRIMINATOR_TRIALS: usize = 50;
const SQUEEZED_RATIO: f64 = 1.0 / 3.0;
const SQUEEZED_RATIO_REL_TOL: f64 = 0.10;
const QNL_RATIO_REL_TOL: f64 = 0.03;
const SUPPRESSION_MAX: f64 = 0.10;
const SUPPRESSION_MATCH_REL_TOL: f64 = 0.20;
const SQUEEZER_COEFF_TOL: f64 = 1e-12;
const SQUEEZER_MC_REL_TOL: f64 = 0.02;
const SQUEEZER_MC_SAMPLES: usize = 1 << 20;

fn report(criterion: u32, title: &str, passed: bool, detail: &str, started: Instant) {
    let verdict = if passed { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "criterion {criterion:>2} {verdict} {title}: {detail} [{:.2} s]",
        started.elapsed().as_secs_f64()
    );
}

fn random_params(rng: &mut ChaCha8Rng, chi_fraction: f64, lossless: bool) -> OpoParams {
    let kappa_s = rng.random_range(0.1..3.0);
    let kappa_l = if lossless {
        0.0
    } else {
        rng.random_range(0.0..2.0)
    };
    let chi = chi_fraction * rng.random_range(0.0..0.95) * (kappa_s + kappa_l);
    OpoParams::new(kappa_s, kappa_l, chi, 1e-3, 0.0).unwrap()
}

/// Closed-form output quadrature variance on resonance.
fn variance_oracle(kappa_s: f64, kappa: f64, chi: f64, omega: f64, eta: f64, q: Quadrature) -> f64 {
    let decay = match q {
        Quadrature::Plus => kappa - chi,
        Quadrature::Minus => kappa + chi,
    };
    let sign = match q {
        Quadrature::Plus => 1.0,
        Quadrature::Minus => -1.0,
    };
    1.0 + sign * eta * 4.0 * kappa_s * chi / (decay * decay + omega * omega)
}

#[test]
fn criterion_01_qnl_normalisation() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..PARAM_DRAWS {
        let p = random_params(&mut rng, 0.0, false);
        let eta = Efficiency::new(rng.random_range(0.05..=1.0)).unwrap();
        for i in 0..OMEGA_POINTS {
            let w = 10.0 * p.kappa() * i as f64 / (OMEGA_POINTS - 1) as f64;
            for q in [Quadrature::Plus, Quadrature::Minus] {
                worst = worst.max((variance(&p, w, q, eta) - 1.0).abs());
            }
        }
    }
    let passed = worst <= QNL_TOL;
    report(
        1,
        "QNL normalisation",
        passed,
        &format!("max |V-1| = {worst:.2e} (tol {QNL_TOL:.0e})"),
        started,
    );
    assert!(passed);
}

#[test]
fn criterion_02_purity_product() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..PARAM_DRAWS {
        let p = random_params(&mut rng, 1.0, true);
        for i in 0..OMEGA_POINTS {
            let w = 10.0 * p.kappa() * i as f64 / (OMEGA_POINTS - 1) as f64;
            let plus = variance(&p, w, Quadrature::Plus, Efficiency::PERFECT);
            let minus = variance(&p, w, Quadrature::Minus, Efficiency::PERFECT);
            worst = worst.max((plus * minus - 1.0).abs());
        }
    }
    let passed = worst <= PURITY_TOL;
    report(
        2,
        "purity product",
        passed,
        &format!("max |V+V- - 1| = {worst:.2e} (tol {PURITY_TOL:.0e})"),
        started,
    );
    assert!(passed);
}

/// Steady state of da/dt = -(κ+iΔ)a + χa* + √(2κs)A solved with complex
/// algebra, then reflected: A_out = √(2κs)a − A.
fn steady_output_oracle(p: &OpoParams, seed: QuadPair) -> QuadPair {
    let a_in = Complex64::new(seed.x_plus, -seed.x_minus) / 2.0;
    let (k, d, chi) = (p.kappa(), p.detuning, p.chi);
    let s = (2.0 * p.kappa_s).sqrt();
    let a = s * (a_in * Complex64::new(k, -d) + chi * a_in.conj()) / (k * k + d * d - chi * chi);
    let out = s * a - a_in;
    QuadPair::new(2.0 * out.re, -2.0 * out.im)
}

#[test]
fn criterion_03_steady_state_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..STEADY_STATE_SETS {
        let p = random_params(&mut rng, 1.0, false);
        let p = p.with_detuning(rng.random_range(-2.0..2.0) * p.kappa());
        let seed = QuadPair::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let expected = steady_output_oracle(&p, seed);
        let got = integrate_mean(&p, seed, 40.0 / slowest_decay_rate(&p)).unwrap();
        let err = (got.x_plus - expected.x_plus).hypot(got.x_minus - expected.x_minus);
        worst = worst.max(err / expected.x_plus.hypot(expected.x_minus));
    }
    let passed = worst <= STEADY_STATE_REL_TOL;
    report(
        3,
        "steady-state oracle",
        passed,
        &format!("max relative error {worst:.2e} (tol {STEADY_STATE_REL_TOL:.0e})"),
        started,
    );
    assert!(passed);
}

#[test]
fn criterion_04_spectrum_oracle() {
    let started = Instant::now();
    // (κs, κl, χ) with κ = 1.
    let sets: [(f64, f64, f64); PSD_SETS] = [
        (1.0, 0.0, 0.0),
        (1.0, 0.0, 0.8),
        (1.0, 0.0, 0.5),
        (0.7, 0.3, 0.8),
        (0.5, 0.5, 0.3),
        (0.9, 0.1, 0.6),
        (0.3, 0.7, 0.7),
        (0.8, 0.2, 0.1),
        (0.6, 0.4, 0.45),
        (0.95, 0.05, 0.2),
    ];
    let segment_length = 4096;
    let trials = 16;
    let mut worst = 0.0f64;
    let mut min_segments = usize::MAX;
    for (k, &(ks, kl, chi)) in sets.iter().enumerate() {
        let params = OpoParams::new(ks, kl, chi, 1e-3, 0.0).unwrap();
        let dt = 0.05;
        let config = SimConfig {
            dt,
            duration: dt * (1u64 << 20) as f64,
            seed_value: 400 + k as u64,
            params,
            record_decimation: 1,
            integrator: Integrator::Exact,
        };
        let psd = averaged_psd(&config, trials, segment_length, 0.5).unwrap();
        let per_trial = (config.steps() - segment_length) / (segment_length / 2) + 1;
        min_segments = min_segments.min(per_trial * trials);
        for (i, &w) in psd.frequencies.iter().enumerate() {
            if w > PSD_MAX_OMEGA_OVER_KAPPA {
                break;
            }
            for (q, sim) in [
                (Quadrature::Plus, psd.variance_plus[i]),
                (Quadrature::Minus, psd.variance_minus[i]),
            ] {
                let theory = variance_oracle(ks, 1.0, chi, w, 1.0, q);
                worst = worst.max((sim / theory - 1.0).abs());
            }
        }
    }
    let passed = worst <= PSD_REL_TOL && min_segments >= PSD_MIN_SEGMENTS;
    report(
        4,
        "spectrum oracle",
        passed,
        &format!(
            "max pointwise deviation {:.2}% for omega <= {PSD_MAX_OMEGA_OVER_KAPPA} kappa over {PSD_SETS} sets, {min_segments} segments (tol {:.0}%)",
            100.0 * worst,
            100.0 * PSD_REL_TOL
        ),
        started,
    );
    assert!(passed);
}

/// Brute-force search for (κs/κ, χ/κ) matching both gains under the
/// pump-off reference; returns the smallest worst-case gain error in dB.
fn unpumped_best_error(amp_db: f64, deamp_db: f64) -> f64 {
    let mut best = f64::INFINITY;
    let n = 800;
    for i in 1..=n {
        let r = i as f64 / n as f64;
        let reference = 2.0 * r - 1.0;
        if reference == 0.0 {
            continue;
        }
        for j in 0..n {
            let c = 0.999 * j as f64 / n as f64;
            let gp = (2.0 * r / (1.0 - c) - 1.0) / reference;
            let gm = (2.0 * r / (1.0 + c) - 1.0) / reference;
            let e = (20.0 * gp.abs().log10() - amp_db)
                .abs()
                .max((20.0 * gm.abs().log10() + deamp_db).abs());
            if e.is_finite() {
                best = best.min(e);
            }
        }
    }
    best
}

#[test]
fn criterion_05_measured_gains() {
    let started = Instant::now();
    let fit = fit_gains(
        AMPLIFICATION_DB,
        DEAMPLIFICATION_DB,
        GainModel::InputReferenced,
    )
    .unwrap();
    let p = fit.params(1.0, 1e-3).unwrap();
    // Independent regeneration: g± = 2κs/(κ∓χ) − 1.
    let r = p.kappa_s / p.kappa();
    let c = p.chi / p.kappa();
    let amp = 20.0 * (2.0 * r / (1.0 - c) - 1.0).abs().log10();
    let deamp = -20.0 * (2.0 * r / (1.0 + c) - 1.0).abs().log10();
    let err = (amp - AMPLIFICATION_DB)
        .abs()
        .max((deamp - DEAMPLIFICATION_DB).abs());
    let lib_err = (classical_gain_db(&p, Quadrature::Plus, fit.model) - AMPLIFICATION_DB)
        .abs()
        .max((classical_gain_db(&p, Quadrature::Minus, fit.model) + DEAMPLIFICATION_DB).abs());

    let alternate = fit_gains(
        AMPLIFICATION_DB,
        DEAMPLIFICATION_DB,
        GainModel::UnpumpedReferenced,
    );
    let alternate_infeasible =
        matches!(alternate, Err(SteadyStateError::NoFeasibleSolution { .. }));
    let brute = unpumped_best_error(AMPLIFICATION_DB, DEAMPLIFICATION_DB);
    let passed =
        err <= GAIN_TOL_DB && lib_err <= GAIN_TOL_DB && alternate_infeasible && brute > 0.1;
    report(
        5,
        "measured gains",
        passed,
        &format!(
            "kappa_s/kappa = {r:.6}, chi/kappa = {c:.6}, regenerated error {err:.1e} dB; \
             pump-off-referenced model: no feasible solution (grid best {brute:.2} dB)"
        ),
        started,
    );
    assert!(passed);
}

fn read_readme() -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md");
    std::fs::read_to_string(path).unwrap_or_default()
}

#[test]
fn criterion_06_efficiency_inference() {
    let started = Instant::now();
    let eta = infer_efficiency(DETECTED_DB, DEAMPLIFICATION_DB).unwrap();
    let oracle =
        (1.0 - 10f64.powf(-DETECTED_DB / 10.0)) / (1.0 - 10f64.powf(-DEAMPLIFICATION_DB / 10.0));
    let value_ok =
        (eta - EFFICIENCY_TARGET).abs() <= EFFICIENCY_TOL && (eta - oracle).abs() < 1e-12;

    let readme_ok = read_readme().contains(QUOTED_EFFICIENCY_PERCENT);
    let dir = tempfile::tempdir().unwrap();
    let fig3 = dir.path().join("fig3.cfg");
    std::fs::write(&fig3, FIG3_CONFIG).unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_homolock"))
        .args(["spectrum", "--config"])
        .arg(&fig3)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&output.stdout);
    let csv = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap_or_default();
    let cli_ok = output.status.success()
        && stdout.contains(QUOTED_EFFICIENCY_PERCENT)
        && csv
            .lines()
            .any(|l| l.starts_with('#') && l.contains(QUOTED_EFFICIENCY_PERCENT));
    let passed = value_ok && readme_ok && cli_ok;
    report(
        6,
        "efficiency inference",
        passed,
        &format!("eta = {eta:.6} (target {EFFICIENCY_TARGET} ± {EFFICIENCY_TOL}); README contrast {readme_ok}; CLI caveat {cli_ok}"),
        started,
    );
    assert!(passed);
}

#[test]
fn criterion_07_two_mode_sweep() {
    let started = Instant::now();
    let config = RunConfig::parse(FIG2_CONFIG).unwrap();
    let params = config.opo_params().unwrap();
    let trace = sweep(
        &params,
        &config.two_mode_field().unwrap(),
        &config.detuning_grid().unwrap(),
    );
    let crossings = trace.zero_crossings();
    let slope = |i: usize| (trace.error_signal[i + 1] - trace.error_signal[i]).signum();
    let opposite = crossings.len() == 2 && slope(crossings[0]) == -slope(crossings[1]);

    let fsr = params.fsr_angular();
    let step = trace.detunings[1] - trace.detunings[0];
    let peaks = trace.transmission_peaks();
    let at_seed_resonance = |d: f64| {
        let nearest = (d / fsr).round() * fsr;
        (d - nearest).abs() <= step
    };
    let peaks_ok =
        !peaks.is_empty() && peaks.iter().all(|&i| at_seed_resonance(trace.detunings[i]));
    let passed = opposite && peaks_ok;
    report(
        7,
        "two-mode sweep",
        passed,
        &format!(
            "{} zero crossings with slope signs {:?}; transmission peaks at {:?} MHz",
            crossings.len(),
            crossings.iter().map(|&i| slope(i)).collect::<Vec<_>>(),
            peaks
                .iter()
                .map(|&i| trace.detunings[i] / TAU / 1e6)
                .collect::<Vec<_>>()
        ),
        started,
    );
    assert!(passed);
}

#[test]
fn criterion_08_squeezing_spectrum() {
    let started = Instant::now();
    let config = RunConfig::parse(FIG3_CONFIG).unwrap();
    let params = config.opo_params().unwrap();
    let eta = infer_efficiency(DETECTED_DB, DEAMPLIFICATION_DB).unwrap();
    let grid = config.spectrum_grid().unwrap();
    let mut trace = spectrum_trace(&params, &grid, Efficiency::new(eta).unwrap());
    trace.reference_hz = config.spectrum_reference();
    let (idx, v_min) = trace.min_variance_minus().unwrap();
    let min_db = variance_db(v_min);
    let at_dc = grid[idx].abs() <= (grid[1] - grid[0]).abs();
    let near_fsr = (trace.absolute_frequencies_hz()[idx] - FIG3_FSR_HZ).abs() < 1e6;

    // Same minimum from the closed form, and the best any efficiency ≤ 1
    // could give with these gains.
    let (ks, k, chi) = (params.kappa_s, params.kappa(), params.chi);
    let oracle_db = variance_db(variance_oracle(ks, k, chi, 0.0, eta, Quadrature::Minus));
    let lossless_db = variance_db(variance_oracle(ks, k, chi, 0.0, 1.0, Quadrature::Minus));
    assert!((oracle_db - min_db).abs() < 1e-9);

    let passed = at_dc && near_fsr && (min_db - FIG3_TARGET_DB).abs() <= FIG3_TOL_DB;
    report(
        8,
        "squeezing spectrum minimum",
        passed,
        &format!(
            "minimum {min_db:.3} dB at {:.3} MHz from {:.1} MHz (target {FIG3_TARGET_DB} ± {FIG3_TOL_DB} dB); \
             eta = 1 would give {lossless_db:.3} dB, so the target is out of reach with these gains",
            grid[idx] / TAU / 1e6,
            FIG3_FSR_HZ / 1e6
        ),
        started,
    );
    assert!(passed);
}

fn discriminator_config(chi: f64) -> LockConfig {
    let params = OpoParams::new(1.0, 0.0, chi, 1e-3, 0.0).unwrap();
    let mut config = LockConfig::tuned(params, 1e3);
    config.rng_seed = 9;
    config
}

#[test]
fn criterion_09_sub_qnl_discriminator() {
    let started = Instant::now();
    let squeezed =
        residual_noise_comparison(&discriminator_config(0.5), DISCRIMINATOR_TRIALS).unwrap();
    let unsqueezed =
        residual_noise_comparison(&discriminator_config(0.0), DISCRIMINATOR_TRIALS).unwrap();
    // Noise-dominated: residual well inside the linear range of the error.
    let linear = squeezed.qnl.mean < 0.01;
    let ok_squeezed = (squeezed.ratio / SQUEEZED_RATIO - 1.0).abs() <= SQUEEZED_RATIO_REL_TOL;
    let ok_qnl = (unsqueezed.ratio - 1.0).abs() <= QNL_RATIO_REL_TOL;
    let passed = linear && ok_squeezed && ok_qnl;
    report(
        9,
        "sub-QNL discriminator",
        passed,
        &format!(
            "ratio {:.4} ± {:.4} at chi = 0.5 kappa (target 1/3 ± 10%), {:.4} ± {:.4} at chi = 0 (target 1 ± 3%), {DISCRIMINATOR_TRIALS} trials",
            squeezed.ratio, squeezed.ratio_std_error, unsqueezed.ratio, unsqueezed.ratio_std_error
        ),
        started,
    );
    assert!(passed);
}

#[test]
fn criterion_10_lock_acquisition() {
    let started = Instant::now();
    let params = OpoParams::new(0.8, 0.2, 0.5, 1e-3, 0.0).unwrap();
    let k = params.kappa();

    let mut acquire = LockConfig::tuned(params, 1.0);
    acquire.noise_mode = NoiseMode::Noiseless;
    acquire.disturbance = DisturbanceSpec {
        initial_offset: 0.5 * k,
        ..DisturbanceSpec::default()
    };
    let acquisition = simulate_lock(&acquire).unwrap().metrics.acquisition_time;

    // Ten disturbance periods in the second half of the run.
    let mut reject = LockConfig::tuned(params, 1.0);
    reject.noise_mode = NoiseMode::Noiseless;
    reject.duration = 2e5 / k;
    let window = reject.duration / 2.0;
    let frequency_hz = 10.0 / window;
    reject.disturbance = DisturbanceSpec {
        sinusoid_amplitude: 0.05 * k,
        sinusoid_frequency: frequency_hz,
        ..DisturbanceSpec::default()
    };
    let metrics = simulate_lock(&reject).unwrap().metrics;
    let measured = metrics.rms_detuning_locked / metrics.rms_detuning_open_loop;

    // |1/(1+L)| with L = (kp + ki/s)·ω_a/(s + ω_a).
    let s = Complex64::new(0.0, TAU * frequency_hz);
    let pi = reject.controller.kp + reject.controller.ki / s;
    let lag = reject.actuator_bandwidth / (s + reject.actuator_bandwidth);
    let predicted = 1.0 / (1.0 + pi * lag).norm();

    let passed = acquisition.is_some()
        && measured <= SUPPRESSION_MAX
        && (measured / predicted - 1.0).abs() <= SUPPRESSION_MATCH_REL_TOL;
    report(
        10,
        "lock acquisition",
        passed,
        &format!(
            "acquired at {:?} kappa^-1; suppression {measured:.4} vs linear prediction {predicted:.4} at {:.2e} kappa",
            acquisition.map(|t| t * k),
            TAU * frequency_hz / k
        ),
        started,
    );
    assert!(passed);
}

#[test]
fn criterion_11_universal_squeezer() {
    let started = Instant::now();
    let mut worst_ancilla = 0.0f64;
    let mut worst_gain = 0.0f64;
    let mut worst_mc = 0.0f64;
    for (k, t) in [0.1, 0.5, 0.9].into_iter().enumerate() {
        let ff = FeedforwardConfig::new(t).unwrap();
        assert!((ff.gain + ((1.0 - t) / t).sqrt()).abs() < 1e-15);
        let tr = squeezer_transfer(&ff).unwrap();
        worst_ancilla = worst_ancilla.max(tr.ancilla[(1, 1)].abs());
        worst_gain = worst_gain.max((tr.input[(1, 1)] - 1.0 / t.sqrt()).abs());

        let input = GaussianState::coherent(0.7, -1.3);
        let ancilla = GaussianState::squeezed_vacuum(0.2).unwrap();
        let algebra = apply_feedforward(&input, &ancilla, &ff).unwrap();
        let (mean, cov) =
            sample_squeezer(&input, &ancilla, &ff, SQUEEZER_MC_SAMPLES, 100 + k as u64).unwrap();
        for i in 0..2 {
            worst_mc = worst_mc.max((cov[(i, i)] / algebra.cov()[(i, i)] - 1.0).abs());
            let scale = algebra.cov()[(i, i)].sqrt();
            worst_mc = worst_mc.max((mean[i] - algebra.mean()[i]).abs() / scale);
        }
    }
    let passed = worst_ancilla <= SQUEEZER_COEFF_TOL
        && worst_gain <= SQUEEZER_COEFF_TOL
        && worst_mc <= SQUEEZER_MC_REL_TOL;
    report(
        11,
        "universal squeezer",
        passed,
        &format!(
            "ancilla X- weight {worst_ancilla:.1e}, X- gain error {worst_gain:.1e}, Monte Carlo deviation {:.2}%",
            100.0 * worst_mc
        ),
        started,
    );
    assert!(passed);
}

fn run_cli(args: &[&str], config: &Path, out: &Path) -> (Vec<u8>, Vec<(String, Vec<u8>)>) {
    let output = Command::new(env!("CARGO_BIN_EXE_homolock"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--svg")
        .env("NO_COLOR", "1")
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(out)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    (output.stdout, files)
}

#[test]
fn criterion_12_reproducibility() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    std::fs::write(
        &config,
        format!(
            "{FIG3_CONFIG}\
             simulate = true\n\
             duration = 0.5 ms\n\
             dt = 1.5 ns\n\
             segment_length = 1024\n\
             trials = 3\n\
             [sweep]\n\
             lo_offset = 120 MHz\n\
             [lock]\n\
             noise_mode = squeezed\n\
             initial_offset = 1 MHz\n\
             random_walk = 1e12 rad^2/s^3\n\
             trials = 4\n\
             [squeezer]\n\
             samples = 65536\n\
             trajectories = 16\n"
        ),
    )
    .unwrap();
    let mut mismatched = Vec::new();
    for command in ["sweep", "spectrum", "lock", "squeezer"] {
        let first = dir.path().join(format!("{command}-a"));
        let second = dir.path().join(format!("{command}-b"));
        let a = run_cli(&[command, "--seed", "42"], &config, &first);
        let b = run_cli(&[command, "--seed", "42"], &config, &second);
        if a != b || a.1.is_empty() {
            mismatched.push(command);
        }
    }
    let selftest = |_: ()| {
        Command::new(env!("CARGO_BIN_EXE_homolock"))
            .arg("selftest")
            .env("NO_COLOR", "1")
            .output()
            .unwrap()
    };
    let (s1, s2) = (selftest(()), selftest(()));
    if s1.stdout != s2.stdout || !s1.status.success() {
        mismatched.push("selftest");
    }
    let passed = mismatched.is_empty();
    report(
        12,
        "reproducibility",
        passed,
        &format!("sweep, spectrum, lock, squeezer, selftest; differing: {mismatched:?}"),
        started,
    );
    assert!(passed);
}
