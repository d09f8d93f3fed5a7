//! Subcommand implementations. Each writes its CSV (and optional SVG) into
//! the output directory and returns a one-line summary.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use homolock::config::{BuildError, ConfigDocument, EfficiencySpec, RunConfig};
use homolock::dynamics::{averaged_psd, trial_rng};
use homolock::ffsqueezer::{
    apply_feedforward, apply_feedforward_trajectory, beamsplitter, homodyne_condition,
    sample_squeezer, squeezer_transfer, FeedforwardConfig, GaussianState,
};
use homolock::lockloop::{crossover_frequency, residual_noise_comparison, simulate_lock};
use homolock::spectra::{spectrum_trace, variance, variance_db};
use homolock::steadystate::sweep;
use homolock::{Efficiency, Quadrature};
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::output::{Provenance, Table};
use crate::svg::{Plot, Series};

pub const FIG2_CONFIG: &str = include_str!("../configs/paper_fig2.cfg");
pub const FIG3_CONFIG: &str = include_str!("../configs/paper_fig3.cfg");

/// Efficiency above which the quoted detection figures would be needed.
const QUOTED_EFFICIENCY: f64 = 0.87;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(#[from] homolock::config::ConfigError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("physics error: {0}")]
    Build(#[from] BuildError),
    #[error("{0} self-test check(s) failed")]
    SelfTest(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Build(_) => 2,
            CliError::SelfTest(_) => 3,
        }
    }
}

fn physics<E: Into<BuildError>>(e: E) -> CliError {
    CliError::Build(e.into())
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Invocation {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub svg: bool,
    pub seed: Option<u64>,
    pub overrides: Vec<String>,
}

impl Invocation {
    /// Reads the config file (or the bundled two-mode default), then applies
    /// `--seed` and `--set` overrides in that order.
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let text = match &self.config {
            Some(path) => fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.clone(),
                source,
            })?,
            None => FIG2_CONFIG.to_string(),
        };
        let mut doc = ConfigDocument::parse(&text)?;
        if let Some(seed) = self.seed {
            doc.set("run", "seed", &seed.to_string());
        }
        for o in &self.overrides {
            doc.apply_override(o)?;
        }
        Ok(RunConfig::from_document(&doc)?)
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CliError::Io { path, source }
        };
        fs::create_dir_all(&self.out).map_err(io(&self.out))?;
        let path = self.out.join(name);
        fs::write(&path, contents).map_err(io(&path))?;
        Ok(path)
    }

    fn emit(
        &self,
        stem: &str,
        table: &Table,
        provenance: &Provenance,
        plot: impl FnOnce() -> Plot,
    ) -> Result<(), CliError> {
        self.write(&format!("{stem}.csv"), &table.render(provenance))?;
        if self.svg {
            self.write(&format!("{stem}.svg"), &plot().render())?;
        }
        Ok(())
    }
}

fn provenance(command: &'static str, config: &RunConfig) -> Provenance {
    Provenance {
        command,
        config_hash: config.hash.clone(),
        seed: config.seed,
    }
}

fn hz(rate: f64) -> f64 {
    rate / TAU
}

fn mhz(rate: f64) -> f64 {
    rate / TAU / 1e6
}

/// Two-mode homodyne error signal and seed transmission over a detuning
/// sweep.
pub fn cmd_sweep(inv: &Invocation) -> Result<String, CliError> {
    let config = inv.load()?;
    let params = config.opo_params()?;
    let field = config.two_mode_field()?;
    let grid = config.detuning_grid()?;
    let trace = sweep(&params, &field, &grid);

    let crossings = trace.zero_crossings();
    let slopes: Vec<&str> = crossings
        .iter()
        .map(|&i| {
            if trace.error_signal[i + 1] > trace.error_signal[i] {
                "+"
            } else {
                "-"
            }
        })
        .collect();
    let peaks: Vec<String> = trace
        .transmission_peaks()
        .iter()
        .map(|&i| format!("{:.3}", mhz(trace.detunings[i])))
        .collect();

    let mut table = Table::new(&["detuning_hz", "error_signal", "transmission"]);
    table
        .note(format!("kappa_s_hz: {}", hz(params.kappa_s)))
        .note(format!("kappa_l_hz: {}", hz(params.kappa_l)))
        .note(format!("chi_hz: {}", hz(params.chi)))
        .note(format!("lo_offset_hz: {}", hz(field.lo_resonance_offset)))
        .note(format!("power_split: {}", field.power_split));
    for i in 0..trace.detunings.len() {
        table.push(vec![
            hz(trace.detunings[i]),
            trace.error_signal[i],
            trace.transmission[i],
        ]);
    }
    inv.emit("sweep", &table, &provenance("sweep", &config), || Plot {
        title: "Homodyne error signal".into(),
        x_label: "detuning (MHz)".into(),
        y_label: "signal (arb.)".into(),
        x: trace.detunings.iter().map(|&d| mhz(d)).collect(),
        series: vec![
            Series {
                label: "error signal".into(),
                y: trace.error_signal.clone(),
            },
            Series {
                label: "seed transmission".into(),
                y: trace.transmission.clone(),
            },
        ],
    })?;
    Ok(format!(
        "sweep: {} points, {} zero crossings (slopes {}), transmission peaks at [{}] MHz",
        trace.detunings.len(),
        crossings.len(),
        slopes.join(""),
        peaks.join(", ")
    ))
}

fn efficiency_notes(config: &RunConfig, eta: Efficiency) -> Vec<String> {
    let source = match &config.efficiency {
        EfficiencySpec::Fixed(_) => "as configured".to_string(),
        EfficiencySpec::Inferred { detected, ideal } => format!(
            "inferred from {} dB detected against {} dB ideal via V_det = 1 - eta (1 - V_ideal)",
            detected.value, ideal.value
        ),
    };
    let mut notes = vec![format!("efficiency: {:.6} ({source})", eta.value())];
    if let EfficiencySpec::Inferred { .. } = config.efficiency {
        notes.push(format!(
            "efficiency caveat: a detection efficiency above {:.0}% is not consistent with these \
             levels under this loss model; the value is an open question",
            QUOTED_EFFICIENCY * 100.0
        ));
    }
    notes
}

/// Analytic quadrature variance spectra, and optionally the Welch estimate
/// from the stochastic simulation.
pub fn cmd_spectrum(inv: &Invocation) -> Result<String, CliError> {
    let config = inv.load()?;
    let params = config.opo_params()?.with_detuning(0.0);
    let eta = config.efficiency()?;
    let grid = config.spectrum_grid()?;
    let mut trace = spectrum_trace(&params, &grid, eta);
    trace.reference_hz = config.spectrum_reference();
    let notes = efficiency_notes(&config, eta);

    let mut table = Table::new(&[
        "offset_hz",
        "frequency_hz",
        "variance_plus",
        "variance_minus",
        "variance_plus_db",
        "variance_minus_db",
    ]);
    for n in &notes {
        table.note(n.clone());
    }
    let absolute = trace.absolute_frequencies_hz();
    for i in 0..grid.len() {
        table.push(vec![
            hz(grid[i]),
            absolute[i],
            trace.variance_plus[i],
            trace.variance_minus[i],
            variance_db(trace.variance_plus[i]),
            variance_db(trace.variance_minus[i]),
        ]);
    }
    let db = |v: &[f64]| v.iter().map(|&x| variance_db(x)).collect::<Vec<_>>();
    inv.emit("spectrum", &table, &provenance("spectrum", &config), || {
        Plot {
            title: "Quadrature noise relative to vacuum".into(),
            x_label: "sideband offset (MHz)".into(),
            y_label: "variance (dB)".into(),
            x: grid.iter().map(|&w| mhz(w)).collect(),
            series: vec![
                Series {
                    label: "X+".into(),
                    y: db(&trace.variance_plus),
                },
                Series {
                    label: "X-".into(),
                    y: db(&trace.variance_minus),
                },
            ],
        }
    })?;

    let mut summary = match trace.min_variance_minus() {
        Some((i, v)) => format!(
            "spectrum: {} points, min X- {:+.3} dB at {:.3} MHz ({:.3} MHz absolute), efficiency {:.3}",
            grid.len(),
            variance_db(v),
            mhz(grid[i]),
            absolute[i] / 1e6,
            eta.value()
        ),
        None => format!("spectrum: {} points", grid.len()),
    };
    if config.spectrum.simulate {
        summary.push_str(&simulate_spectrum(inv, &config)?);
    }
    if notes.len() > 1 {
        summary.push_str(&format!(
            "; note: quoted efficiency >{:.0}% does not follow from these levels",
            QUOTED_EFFICIENCY * 100.0
        ));
    }
    Ok(summary)
}

fn simulate_spectrum(inv: &Invocation, config: &RunConfig) -> Result<String, CliError> {
    let sim = config.sim_config()?;
    let s = &config.spectrum;
    let psd = averaged_psd(&sim, s.trials, s.segment_length, s.overlap).map_err(physics)?;
    let mut table = Table::new(&[
        "frequency_hz",
        "psd_plus",
        "psd_minus",
        "theory_plus",
        "theory_minus",
    ]);
    table.note(format!(
        "welch: {} trials, segment {} samples, overlap {}, dt {} s",
        s.trials, s.segment_length, s.overlap, sim.dt
    ));
    let mut worst = 0.0f64;
    for (i, &w) in psd.frequencies.iter().enumerate() {
        let plus = variance(&sim.params, w, Quadrature::Plus, Efficiency::PERFECT);
        let minus = variance(&sim.params, w, Quadrature::Minus, Efficiency::PERFECT);
        if w <= 3.0 * sim.params.kappa() {
            worst = worst
                .max((psd.variance_plus[i] / plus - 1.0).abs())
                .max((psd.variance_minus[i] / minus - 1.0).abs());
        }
        table.push(vec![
            hz(w),
            psd.variance_plus[i],
            psd.variance_minus[i],
            plus,
            minus,
        ]);
    }
    let freqs: Vec<f64> = psd.frequencies.iter().map(|&w| mhz(w)).collect();
    inv.emit(
        "spectrum_sim",
        &table,
        &provenance("spectrum", config),
        || Plot {
            title: "Simulated output spectra".into(),
            x_label: "frequency (MHz)".into(),
            y_label: "PSD / vacuum".into(),
            x: freqs,
            series: vec![
                Series {
                    label: "X+ simulated".into(),
                    y: psd.variance_plus.clone(),
                },
                Series {
                    label: "X- simulated".into(),
                    y: psd.variance_minus.clone(),
                },
            ],
        },
    )?;
    Ok(format!(
        "; simulated PSD max deviation {:.2}% below 3 kappa",
        100.0 * worst
    ))
}

/// Closed-loop lock simulation, plus an optional squeezed/QNL comparison.
pub fn cmd_lock(inv: &Invocation) -> Result<String, CliError> {
    let config = inv.load()?;
    let lock = config.lock_config()?;
    let result = simulate_lock(&lock).map_err(physics)?;
    let every = config.lock.record_every;
    let kappa = lock.params.kappa();

    let mut table = Table::new(&[
        "time_s",
        "detuning_hz",
        "error_signal",
        "control_hz",
        "disturbance_hz",
    ]);
    table
        .note(format!("noise_mode: {}", config.lock.noise_mode))
        .note(format!("kp: {}", lock.controller.kp))
        .note(format!("ki_per_s: {}", lock.controller.ki))
        .note(format!(
            "actuator_bandwidth_hz: {}",
            hz(lock.actuator_bandwidth)
        ))
        .note(format!("dt_s: {}", lock.dt))
        .note(format!("record_every: {every}"));
    if let Some(w) = crossover_frequency(&lock) {
        table.note(format!("crossover_hz: {}", hz(w)));
    }
    for i in (0..result.t.len()).step_by(every) {
        table.push(vec![
            result.t[i],
            hz(result.detuning[i]),
            result.error[i],
            hz(result.control[i]),
            hz(result.disturbance[i]),
        ]);
    }
    let stride: Vec<usize> = (0..result.t.len()).step_by(every).collect();
    inv.emit("lock", &table, &provenance("lock", &config), || Plot {
        title: "Locked detuning".into(),
        x_label: "time (s)".into(),
        y_label: "detuning / kappa".into(),
        x: stride.iter().map(|&i| result.t[i]).collect(),
        series: vec![
            Series {
                label: "residual".into(),
                y: stride.iter().map(|&i| result.detuning[i] / kappa).collect(),
            },
            Series {
                label: "disturbance".into(),
                y: stride
                    .iter()
                    .map(|&i| result.disturbance[i] / kappa)
                    .collect(),
            },
        ],
    })?;

    let m = &result.metrics;
    let mut columns = vec![
        "rms_detuning_hz",
        "rms_open_loop_hz",
        "acquisition_time_s",
        "in_lock_fraction",
    ];
    let mut row = vec![
        hz(m.rms_detuning_locked),
        hz(m.rms_detuning_open_loop),
        m.acquisition_time.unwrap_or(f64::NAN),
        m.in_lock_fraction,
    ];
    let mut summary = format!(
        "lock: rms residual {:.4e} kappa (open loop {:.4e} kappa), acquisition {}, in-lock {:.3}",
        m.rms_detuning_locked / kappa,
        m.rms_detuning_open_loop / kappa,
        m.acquisition_time
            .map_or("never".to_string(), |t| format!("{t:.3e} s")),
        m.in_lock_fraction
    );
    if config.lock.trials > 0 {
        let cmp = residual_noise_comparison(&lock, config.lock.trials).map_err(physics)?;
        columns.extend([
            "trials",
            "squeezed_rms_hz",
            "qnl_rms_hz",
            "ratio",
            "ratio_std_error",
        ]);
        row.extend([
            config.lock.trials as f64,
            hz(cmp.squeezed.mean),
            hz(cmp.qnl.mean),
            cmp.ratio,
            cmp.ratio_std_error,
        ]);
        summary.push_str(&format!(
            "; squeezed/QNL residual {:.4} ± {:.4} over {} trials",
            cmp.ratio, cmp.ratio_std_error, config.lock.trials
        ));
    }
    let mut metrics = Table::new(&columns);
    metrics.push(row);
    inv.write(
        "lock_summary.csv",
        &metrics.render(&provenance("lock", &config)),
    )?;
    Ok(summary)
}

/// Feed-forward squeezer: ensemble output, transfer coefficients, sampled
/// trajectories and an optional Monte Carlo cross-check.
pub fn cmd_squeezer(inv: &Invocation) -> Result<String, CliError> {
    let config = inv.load()?;
    let q = &config.squeezer;
    let ff = FeedforwardConfig::new(q.transmittivity).map_err(physics)?;
    let input = GaussianState::coherent(q.input_mean_plus, q.input_mean_minus);
    let v_minus = config.ancilla_v_minus();
    let ancilla = GaussianState::squeezed_vacuum(v_minus).map_err(physics)?;
    let out = apply_feedforward(&input, &ancilla, &ff).map_err(physics)?;
    let transfer = squeezer_transfer(&ff).map_err(physics)?;

    let mut columns = vec![
        "transmittivity",
        "gain",
        "ancilla_v_minus",
        "mean_plus",
        "mean_minus",
        "var_plus",
        "var_minus",
        "cov_plus_minus",
        "input_pp",
        "input_pm",
        "input_mp",
        "input_mm",
        "ancilla_pp",
        "ancilla_pm",
        "ancilla_mp",
        "ancilla_mm",
    ];
    let (mean, cov) = (out.mean(), out.cov());
    let (ti, ta) = (transfer.input, transfer.ancilla);
    let mut row = vec![
        ff.transmittivity,
        ff.gain,
        v_minus,
        mean[0],
        mean[1],
        cov[(0, 0)],
        cov[(1, 1)],
        cov[(0, 1)],
        ti[(0, 0)],
        ti[(0, 1)],
        ti[(1, 0)],
        ti[(1, 1)],
        ta[(0, 0)],
        ta[(0, 1)],
        ta[(1, 0)],
        ta[(1, 1)],
    ];
    let mut summary = format!(
        "squeezer: T {:.3}, g {:.6}, X- gain {:.6}, ancilla X- weight {:.1e}, output var (+ {:.4}, - {:.4})",
        ff.transmittivity,
        ff.gain,
        ti[(1, 1)],
        ta[(1, 1)].abs(),
        cov[(0, 0)],
        cov[(1, 1)]
    );
    if q.samples > 0 {
        let (mc_mean, mc_cov) =
            sample_squeezer(&input, &ancilla, &ff, q.samples, config.seed).map_err(physics)?;
        columns.extend([
            "mc_mean_plus",
            "mc_mean_minus",
            "mc_var_plus",
            "mc_var_minus",
            "mc_cov_plus_minus",
        ]);
        row.extend([
            mc_mean[0],
            mc_mean[1],
            mc_cov[(0, 0)],
            mc_cov[(1, 1)],
            mc_cov[(0, 1)],
        ]);
        summary.push_str(&format!(
            "; sampled var (+ {:.4}, - {:.4}) from {} draws",
            mc_cov[(0, 0)],
            mc_cov[(1, 1)],
            q.samples
        ));
    }
    let mut table = Table::new(&columns);
    table.push(row);
    inv.write(
        "squeezer.csv",
        &table.render(&provenance("squeezer", &config)),
    )?;

    if q.trajectories > 0 {
        let mixed =
            beamsplitter(&input.tensor(&ancilla), (0, 1), ff.transmittivity).map_err(physics)?;
        let outcome = homodyne_condition(&mixed, 1, ff.measured_quadrature)
            .map_err(physics)?
            .outcome;
        let dist = Normal::new(outcome.mean, outcome.variance.sqrt())
            .expect("outcome variance is finite and non-negative");
        let mut traj = Table::new(&["trajectory", "outcome", "mean_plus", "mean_minus"]);
        for k in 0..q.trajectories {
            let mut rng = trial_rng(config.seed, k as u64);
            let x = dist.sample(&mut rng);
            let state = apply_feedforward_trajectory(&input, &ancilla, &ff, x).map_err(physics)?;
            traj.push(vec![k as f64, x, state.mean()[0], state.mean()[1]]);
        }
        let conditional =
            apply_feedforward_trajectory(&input, &ancilla, &ff, 0.0).map_err(physics)?;
        traj.note(format!(
            "conditional output variances: plus {}, minus {}",
            conditional.cov()[(0, 0)],
            conditional.cov()[(1, 1)]
        ));
        inv.write(
            "squeezer_trajectories.csv",
            &traj.render(&provenance("squeezer", &config)),
        )?;
    }
    Ok(summary)
}
