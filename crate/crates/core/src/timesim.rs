//! Time-domain integrator coupling the two intracavity field amplitudes to
//! the mirror's mechanical motion.
//!
//! Each field obeys the single-pole cavity equation
//!
//! ```text
//! da_i/dt = (i δ_i(t) − γ) a_i + γ √(G I₀ᵢ),   δ_i(t) = δ_i⁰ + (dδ/dL)·x(t)
//! ```
//!
//! normalized so that |a_i|² is circulating power in watts: the on-resonance
//! steady state is the resonant-gain power G·I₀ (enforced by the
//! frozen-mirror test). The mirror follows
//!
//! ```text
//! M ẍ = −M Ω_m² x − M Γ_m ẋ + (2/c)(|a₁|² + |a₂|²) − F_dc + F_th + F_drive
//! ```
//!
//! where F_dc is the static radiation force at x = 0 (the dc pressure is
//! balanced externally; only its fluctuations act). Interference between the
//! fields beats at the free spectral range, far above the mechanical band,
//! and is dropped. Both fields see the same length-induced detuning shift and
//! the same laser frequency noise (the subcarrier is derived from the same
//! laser). Deterministic terms advance with classical fourth-order
//! Runge–Kutta; stochastic increments are sampled once per step and held
//! constant through the stages (per-step force scale √(PSD/(2·dt)), the
//! two-sided white-noise convention).
//!
//! Linearizing the field equation about the detuned steady state reproduces
//! the frequency-domain stiffness and damping coefficients exactly; the
//! numeric transfer function here is the dynamic oracle that checks this.

use std::io::{self, Write};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{num_complex::Complex as FftComplex, FftPlanner};
use thiserror::Error;

use crate::config::{ExperimentConfig, ExternalDrive};
use crate::model::SPEED_OF_LIGHT;
use crate::response::{self, BodeData, TransferPoint};
use crate::stability;
use crate::thermal::SpectrumSeries;

/// Full description of one time-domain run.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig<'a> {
    pub experiment: &'a ExperimentConfig,
    /// Integrator step [s]; must resolve the cavity pole (γ·dt < 0.2) unless
    /// running adiabatically.
    pub time_step: f64,
    /// Run length [s]; at least 100 steps.
    pub duration: f64,
    pub seed: u64,
    pub thermal_noise: bool,
    /// Laser frequency-noise ASD [Hz/√Hz], common additive detuning noise.
    pub frequency_noise_asd: f64,
    pub external_drive: Option<ExternalDrive>,
    /// Slave the fields to the instantaneous Lorentzian (no cavity delay, so
    /// no optical damping); valid only well below the cavity pole.
    pub adiabatic_mode: bool,
    /// Initial mirror displacement [m].
    pub initial_displacement: f64,
    /// Record every n-th step.
    pub sample_every: usize,
}

impl<'a> SimConfig<'a> {
    /// Take the run parameters from the experiment's `[sim]` section.
    pub fn from_experiment(experiment: &'a ExperimentConfig) -> Self {
        let sim = &experiment.sim;
        SimConfig {
            experiment,
            time_step: sim.time_step,
            duration: sim.duration,
            seed: sim.seed,
            thermal_noise: sim.thermal_noise,
            frequency_noise_asd: sim.frequency_noise_asd,
            external_drive: sim.external_drive,
            adiabatic_mode: sim.adiabatic_mode,
            initial_displacement: sim.initial_displacement,
            sample_every: sim.sample_every,
        }
    }
}

/// Instantaneous dynamical state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    /// Mirror displacement (cavity elongation) [m].
    pub position: f64,
    /// Mirror velocity [m/s].
    pub velocity: f64,
    /// Intracavity field amplitudes, |a|² in watts; carrier first.
    pub field_amplitudes: [Complex64; 2],
}

/// One recorded sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub time: f64,
    pub position: f64,
    pub velocity: f64,
    pub field_amplitudes: [Complex64; 2],
    /// Instantaneous radiation force (2/c)·(|a₁|²+|a₂|²) [N].
    pub radiation_force: f64,
}

/// Uniformly sampled time series of the state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Time between recorded samples [s].
    pub sample_interval: f64,
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn positions(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.position).collect()
    }

    /// CSV `time_s,x_m,v_m_per_s,p_circ_1_w,p_circ_2_w,f_rad_n`; `downsample`
    /// keeps every n-th row.
    pub fn to_csv(&self, writer: &mut impl Write, downsample: usize) -> io::Result<()> {
        let step = downsample.max(1);
        writeln!(writer, "time_s,x_m,v_m_per_s,p_circ_1_w,p_circ_2_w,f_rad_n")?;
        for sample in self.samples.iter().step_by(step) {
            writeln!(
                writer,
                "{},{},{},{},{},{}",
                sample.time,
                sample.position,
                sample.velocity,
                sample.field_amplitudes[0].norm_sqr(),
                sample.field_amplitudes[1].norm_sqr(),
                sample.radiation_force
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("time step {dt} s does not resolve the cavity pole: γ·dt = {gamma_dt} must stay below 0.2")]
    TimeStepTooCoarse { dt: f64, gamma_dt: f64 },
    #[error("time step must be positive (got {dt} s)")]
    NonPositiveTimeStep { dt: f64 },
    #[error("duration {duration} s is shorter than 100 time steps ({dt} s each)")]
    DurationTooShort { duration: f64, dt: f64 },
    #[error("instability: |x| = {position} m exceeded the divergence guard at t = {time} s")]
    Divergence { time: f64, position: f64 },
    #[error("steady state not reached at {frequency_hz} Hz within the allotted duration")]
    NonConvergence { frequency_hz: f64 },
    #[error("drive at {frequency_hz} Hz is not in the linear regime: halving the amplitude moved the response by {deviation}")]
    LinearityViolation { frequency_hz: f64, deviation: f64 },
    #[error("transfer function requires a stable configuration: {reason}")]
    UnstableConfiguration { reason: String },
    #[error("envelope fit is poor (R² = {r_squared}) with a significant trend ({rate} 1/s)")]
    PoorFit { rate: f64, r_squared: f64 },
    #[error("trajectory has too few oscillation cycles for an envelope fit ({peaks} envelope peaks, need {needed})")]
    InsufficientCycles { peaks: usize, needed: usize },
    #[error("trajectory too short for a spectrum: {samples} samples, need at least {needed}")]
    InsufficientLength { samples: usize, needed: usize },
}

/// Divergence guard: abort once |x| exceeds 10³ wavelengths.
const GUARD_WAVELENGTHS: f64 = 1e3;

#[derive(Debug, Clone, Copy)]
struct Derivative {
    dx: f64,
    dv: f64,
    da: [Complex64; 2],
}

#[derive(Debug, Clone, Copy)]
struct StageState {
    x: f64,
    v: f64,
    a: [Complex64; 2],
}

impl StageState {
    fn advanced(&self, d: &Derivative, h: f64) -> StageState {
        StageState {
            x: self.x + h * d.dx,
            v: self.v + h * d.dv,
            a: [self.a[0] + h * d.da[0], self.a[1] + h * d.da[1]],
        }
    }
}

/// Stepwise integrator; construct with [`Simulator::new`], then [`step`] or
/// drive a whole run with [`run`].
///
/// [`step`]: Simulator::step
pub struct Simulator {
    dt: f64,
    gamma: f64,
    detuning_per_length: f64,
    delta0: [f64; 2],
    drive_amp: [f64; 2],
    mass: f64,
    omega_m_sq: f64,
    gamma_m: f64,
    f_dc: f64,
    guard: f64,
    thermal_sigma: f64,
    freq_noise_sigma: f64,
    external_drive: Option<(f64, f64)>,
    adiabatic: bool,
    sample_thermal: bool,
    rng: ChaCha8Rng,
    state: SimState,
    time: f64,
}

impl Simulator {
    pub fn new(config: &SimConfig<'_>) -> Result<Self, SimError> {
        Self::with_stream(config, 0)
    }

    /// Independent runs (sweep points, seeds of an ensemble) take their noise
    /// from streams derived from (seed, run index), so concurrent execution
    /// cannot change results.
    pub fn with_stream(config: &SimConfig<'_>, run_index: u64) -> Result<Self, SimError> {
        let exp = config.experiment;
        let derived = exp.derived_cavity();
        let gamma = derived.linewidth_hwhm;
        let dt = config.time_step;
        if !(dt > 0.0) {
            return Err(SimError::NonPositiveTimeStep { dt });
        }
        if !config.adiabatic_mode && gamma * dt >= 0.2 {
            return Err(SimError::TimeStepTooCoarse {
                dt,
                gamma_dt: gamma * dt,
            });
        }
        if config.duration < 100.0 * dt {
            return Err(SimError::DurationTooShort {
                duration: config.duration,
                dt,
            });
        }

        let fields = [exp.carrier, exp.subcarrier];
        let delta0 = [
            fields[0].detuning * gamma,
            fields[1].detuning * gamma,
        ];
        let drive_amp = [
            gamma * (derived.resonant_gain * fields[0].input_power).sqrt(),
            gamma * (derived.resonant_gain * fields[1].input_power).sqrt(),
        ];
        let f_dc: f64 = fields
            .iter()
            .map(|f| 2.0 * crate::model::intracavity_power(f, &derived) / SPEED_OF_LIGHT)
            .sum();

        let mass = exp.reduced_mass();
        let thermal_sigma = if config.thermal_noise {
            let psd = crate::thermal::thermal_force_psd(&exp.bath, &exp.mirrors, mass);
            (psd / (2.0 * dt)).sqrt()
        } else {
            0.0
        };
        let freq_noise_sigma = if config.frequency_noise_asd > 0.0 {
            // ASD in Hz/√Hz enters the detuning in rad/s
            std::f64::consts::TAU * config.frequency_noise_asd * (1.0 / (2.0 * dt)).sqrt()
        } else {
            0.0
        };

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(run_index);

        let x0 = config.initial_displacement;
        let state = SimState {
            position: x0,
            velocity: 0.0,
            field_amplitudes: std::array::from_fn(|i| {
                steady_field(
                    drive_amp[i],
                    gamma,
                    delta0[i] + derived.detuning_per_length * x0,
                )
            }),
        };

        Ok(Simulator {
            dt,
            gamma,
            detuning_per_length: derived.detuning_per_length,
            delta0,
            drive_amp,
            mass,
            omega_m_sq: exp.mirrors.natural_frequency * exp.mirrors.natural_frequency,
            gamma_m: exp.mirrors.mechanical_damping(),
            f_dc,
            guard: GUARD_WAVELENGTHS * exp.cavity.wavelength,
            thermal_sigma,
            freq_noise_sigma,
            external_drive: config
                .external_drive
                .map(|d| (d.amplitude, std::f64::consts::TAU * d.frequency)),
            adiabatic: config.adiabatic_mode,
            sample_thermal: config.thermal_noise,
            rng,
            state,
            time: 0.0,
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut SimState {
        &mut self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    fn slaved_fields(&self, x: f64, freq_noise: f64) -> [Complex64; 2] {
        std::array::from_fn(|i| {
            steady_field(
                self.drive_amp[i],
                self.gamma,
                self.delta0[i] + self.detuning_per_length * x + freq_noise,
            )
        })
    }

    fn derivative(
        &self,
        s: &StageState,
        t: f64,
        thermal_force: f64,
        freq_noise: f64,
    ) -> Derivative {
        let (da, power) = if self.adiabatic {
            let a = self.slaved_fields(s.x, freq_noise);
            (
                [Complex64::new(0.0, 0.0); 2],
                a[0].norm_sqr() + a[1].norm_sqr(),
            )
        } else {
            let mut da = [Complex64::new(0.0, 0.0); 2];
            for i in 0..2 {
                let delta = self.delta0[i] + self.detuning_per_length * s.x + freq_noise;
                da[i] = Complex64::new(-self.gamma, delta) * s.a[i] + self.drive_amp[i];
            }
            (da, s.a[0].norm_sqr() + s.a[1].norm_sqr())
        };

        let mut force = -self.mass * self.omega_m_sq * s.x - self.mass * self.gamma_m * s.v
            + 2.0 * power / SPEED_OF_LIGHT
            - self.f_dc
            + thermal_force;
        if let Some((amp, omega)) = self.external_drive {
            force += amp * (omega * t).sin();
        }

        Derivative {
            dx: s.v,
            dv: force / self.mass,
            da,
        }
    }

    /// Advance the state by one time step.
    pub fn step(&mut self) -> Result<(), SimError> {
        let thermal_force = if self.sample_thermal {
            self.thermal_sigma * StandardNormal.sample(&mut self.rng)
        } else {
            0.0
        };
        let freq_noise = if self.freq_noise_sigma > 0.0 {
            self.freq_noise_sigma * StandardNormal.sample(&mut self.rng)
        } else {
            0.0
        };

        let dt = self.dt;
        let t = self.time;
        let y = StageState {
            x: self.state.position,
            v: self.state.velocity,
            a: self.state.field_amplitudes,
        };
        let k1 = self.derivative(&y, t, thermal_force, freq_noise);
        let k2 = self.derivative(&y.advanced(&k1, 0.5 * dt), t + 0.5 * dt, thermal_force, freq_noise);
        let k3 = self.derivative(&y.advanced(&k2, 0.5 * dt), t + 0.5 * dt, thermal_force, freq_noise);
        let k4 = self.derivative(&y.advanced(&k3, dt), t + dt, thermal_force, freq_noise);

        let sixth = dt / 6.0;
        self.state.position = y.x + sixth * (k1.dx + 2.0 * (k2.dx + k3.dx) + k4.dx);
        self.state.velocity = y.v + sixth * (k1.dv + 2.0 * (k2.dv + k3.dv) + k4.dv);
        if self.adiabatic {
            self.state.field_amplitudes = self.slaved_fields(self.state.position, freq_noise);
        } else {
            for i in 0..2 {
                self.state.field_amplitudes[i] =
                    y.a[i] + sixth * (k1.da[i] + 2.0 * (k2.da[i] + k3.da[i]) + k4.da[i]);
            }
        }
        self.time = t + dt;

        if self.state.position.abs() > self.guard {
            return Err(SimError::Divergence {
                time: self.time,
                position: self.state.position,
            });
        }
        Ok(())
    }

    fn sample(&self) -> TrajectorySample {
        let a = self.state.field_amplitudes;
        TrajectorySample {
            time: self.time,
            position: self.state.position,
            velocity: self.state.velocity,
            field_amplitudes: a,
            radiation_force: 2.0 * (a[0].norm_sqr() + a[1].norm_sqr()) / SPEED_OF_LIGHT,
        }
    }
}

fn steady_field(drive_amp: f64, gamma: f64, delta: f64) -> Complex64 {
    drive_amp * Complex64::new(gamma, -delta).inv()
}

/// Run a full simulation, recording every `sample_every`-th step.
pub fn run(config: &SimConfig<'_>) -> Result<Trajectory, SimError> {
    run_with_stream(config, 0)
}

/// [`run`] with an explicit noise-stream index; see [`Simulator::with_stream`].
pub fn run_with_stream(config: &SimConfig<'_>, run_index: u64) -> Result<Trajectory, SimError> {
    let mut sim = Simulator::with_stream(config, run_index)?;
    let steps = (config.duration / config.time_step).round() as usize;
    let every = config.sample_every.max(1);
    let mut samples = Vec::with_capacity(steps / every);
    for k in 1..=steps {
        sim.step()?;
        if k % every == 0 {
            samples.push(sim.sample());
        }
    }
    Ok(Trajectory {
        sample_interval: config.time_step * every as f64,
        samples,
    })
}

/// Exponential envelope fit of an oscillating trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFit {
    /// Envelope rate [1/s]: positive grows, negative decays. A clean ring
    /// with characteristic roots σ ± iΩ reports σ.
    pub rate: f64,
    /// Standard error of the fitted rate [1/s].
    pub stderr: f64,
    /// Coefficient of determination of the log-envelope line.
    pub r_squared: f64,
}

const MIN_ENVELOPE_PEAKS: usize = 20; // two per cycle over ten cycles

/// Fit the oscillation envelope (|x| at its local maxima) to an exponential
/// and return the rate.
///
/// A poor fit (R² < 0.9) is an error only when the trend is statistically
/// significant; a stationary noise-driven record legitimately returns a rate
/// near zero with a large relative uncertainty.
pub fn estimate_growth_rate(trajectory: &Trajectory) -> Result<GrowthFit, SimError> {
    let samples = &trajectory.samples;
    let mut times = Vec::new();
    let mut log_amplitudes = Vec::new();
    for w in samples.windows(3) {
        let (prev, here, next) = (w[0].position.abs(), w[1].position.abs(), w[2].position.abs());
        if here > prev && here > next && here > 0.0 {
            times.push(w[1].time);
            log_amplitudes.push(here.ln());
        }
    }
    if times.len() < MIN_ENVELOPE_PEAKS {
        return Err(SimError::InsufficientCycles {
            peaks: times.len(),
            needed: MIN_ENVELOPE_PEAKS,
        });
    }

    let n = times.len() as f64;
    let t_mean = times.iter().sum::<f64>() / n;
    let y_mean = log_amplitudes.iter().sum::<f64>() / n;
    let mut s_tt = 0.0;
    let mut s_ty = 0.0;
    let mut s_yy = 0.0;
    for (t, y) in times.iter().zip(&log_amplitudes) {
        let dt = t - t_mean;
        let dy = y - y_mean;
        s_tt += dt * dt;
        s_ty += dt * dy;
        s_yy += dy * dy;
    }
    let rate = s_ty / s_tt;
    let intercept = y_mean - rate * t_mean;
    let ss_res = (s_yy - rate * s_ty).max(0.0);
    let r_squared = if s_yy > 0.0 { 1.0 - ss_res / s_yy } else { 1.0 };

    // Envelope peaks of a narrowband record are serially correlated, which
    // makes the naive regression error optimistic; inflate it by the Bartlett
    // factor from the lag-1 residual autocorrelation.
    let residual =
        |i: usize| -> f64 { log_amplitudes[i] - (intercept + rate * times[i]) };
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 1..times.len() {
        num += residual(i) * residual(i - 1);
        den += residual(i) * residual(i);
    }
    den += residual(0) * residual(0);
    let rho = if den > 0.0 { (num / den).clamp(0.0, 0.99) } else { 0.0 };
    let inflation = ((1.0 + rho) / (1.0 - rho)).sqrt();
    let stderr = (ss_res / (n - 2.0) / s_tt).sqrt() * inflation;

    if r_squared < 0.9 && rate.abs() > 2.0 * stderr {
        return Err(SimError::PoorFit { rate, r_squared });
    }
    Ok(GrowthFit {
        rate,
        stderr,
        r_squared,
    })
}

const DEMOD_RELATIVE_TOLERANCE: f64 = 1e-3;

/// Measure the displacement-per-force transfer function by driving the
/// simulated mirror with a small sinusoidal force at each frequency, waiting
/// out the transient, and demodulating the steady-state response.
///
/// Requires a stable configuration (the eigenvalue check must pass); noise is
/// off. The drive amplitude is chosen to keep the response deep in the linear
/// regime and the measurement is repeated at half amplitude: if the extracted
/// response moves by more than 0.1% the point is rejected.
pub fn numeric_transfer_function(
    experiment: &ExperimentConfig,
    frequencies_hz: &[f64],
) -> Result<BodeData, SimError> {
    let search = stability::find_omega_eff(experiment).map_err(|e| {
        SimError::UnstableConfiguration {
            reason: e.to_string(),
        }
    })?;
    let eigen = stability::eigen_check(experiment).map_err(|e| SimError::UnstableConfiguration {
        reason: e.to_string(),
    })?;
    if !eigen.stable {
        return Err(SimError::UnstableConfiguration {
            reason: format!(
                "effective damping is {} 1/s at the resonance",
                search.resonance.gamma_eff
            ),
        });
    }

    // the ring-in envelope decays at Γ_eff/2
    let settle = 24.0 / search.resonance.gamma_eff;
    let derived = experiment.derived_cavity();
    // keep the drive amplitude at 2% of the length scale that detunes the
    // cavity by one linewidth
    let target_amplitude = 0.02 * derived.linewidth_hwhm / derived.detuning_per_length;

    let mut freqs: Vec<f64> = frequencies_hz.to_vec();
    freqs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    freqs.dedup();

    let mut points = Vec::with_capacity(freqs.len());
    for &f in &freqs {
        let omega = std::f64::consts::TAU * f;
        let h_scale = response::susceptibility(experiment, omega).norm();
        let f0 = target_amplitude / h_scale;

        let h_full = demodulate(experiment, f, f0, settle)?;
        let h_half = demodulate(experiment, f, 0.5 * f0, settle)?;
        let deviation = (h_half - h_full).norm() / h_full.norm();
        if deviation > DEMOD_RELATIVE_TOLERANCE {
            return Err(SimError::LinearityViolation {
                frequency_hz: f,
                deviation,
            });
        }

        let phase = h_full.arg();
        points.push(TransferPoint {
            frequency: omega,
            magnitude: h_full.norm(),
            phase: if phase <= -std::f64::consts::PI {
                phase + std::f64::consts::TAU
            } else {
                phase
            },
        });
    }
    Ok(BodeData {
        points,
        fingerprint: experiment.fingerprint(),
    })
}

/// Drive at `f` Hz with amplitude `f0` N, settle, then demodulate two
/// consecutive windows; they must agree to 0.1% or the point has not
/// converged.
fn demodulate(
    experiment: &ExperimentConfig,
    f: f64,
    f0: f64,
    mut settle: f64,
) -> Result<Complex64, SimError> {
    let omega = std::f64::consts::TAU * f;
    let period = 1.0 / f;
    let dt = experiment.sim.time_step;
    let n_periods = (0.006 * f).ceil().max(4.0);
    let window = n_periods * period;
    let window_steps = (window / dt).round().max(8.0) as usize;

    for _attempt in 0..2 {
        let duration = settle + 2.0 * window + 2.0 * dt;
        let config = SimConfig {
            experiment,
            time_step: dt,
            duration,
            seed: 0,
            thermal_noise: false,
            frequency_noise_asd: 0.0,
            external_drive: Some(ExternalDrive {
                amplitude: f0,
                frequency: f,
            }),
            adiabatic_mode: false,
            initial_displacement: 0.0,
            sample_every: 1,
        };
        let mut sim = Simulator::new(&config)?;
        let settle_steps = (settle / dt).ceil() as usize;
        for _ in 0..settle_steps {
            sim.step()?;
        }

        let mut windows = [Complex64::new(0.0, 0.0); 2];
        for slot in &mut windows {
            let mut in_phase = 0.0;
            let mut quadrature = 0.0;
            for _ in 0..window_steps {
                sim.step()?;
                let t = sim.time();
                let x = sim.state().position;
                in_phase += x * (omega * t).sin();
                quadrature += x * (omega * t).cos();
            }
            let span = window_steps as f64 * dt;
            *slot = Complex64::new(in_phase, quadrature) * (2.0 * dt / (span * f0));
        }

        let drift = (windows[1] - windows[0]).norm() / windows[1].norm();
        if drift <= DEMOD_RELATIVE_TOLERANCE {
            return Ok(windows[1]);
        }
        settle *= 3.0;
    }
    Err(SimError::NonConvergence { frequency_hz: f })
}

/// Welch-averaged single-sided amplitude spectral density of the mirror
/// position, normalized so that ∫ASD²·df equals the signal variance.
///
/// Segment length is chosen so the record holds at least 100 resolution
/// bandwidths (Hann window, 50% overlap).
pub fn synth_spectrum(trajectory: &Trajectory) -> Result<SpectrumSeries, SimError> {
    let positions = trajectory.positions();
    let n = positions.len();
    // largest power of two ≤ n/100, so the record holds ≥ 100 resolution bandwidths
    let budget = n / 100;
    let nperseg = if budget.is_power_of_two() {
        budget
    } else {
        budget.next_power_of_two() / 2
    };
    const MIN_SEGMENT: usize = 64;
    if nperseg < MIN_SEGMENT {
        return Err(SimError::InsufficientLength {
            samples: n,
            needed: MIN_SEGMENT * 100,
        });
    }
    let fs = 1.0 / trajectory.sample_interval;

    let mean = positions.iter().sum::<f64>() / n as f64;
    let window: Vec<f64> = (0..nperseg)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::TAU * i as f64 / nperseg as f64).cos()))
        .collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(nperseg);
    let hop = nperseg / 2;
    let n_bins = nperseg / 2 + 1;
    let mut psd = vec![0.0f64; n_bins];
    let mut buffer = vec![FftComplex::new(0.0, 0.0); nperseg];
    let mut segments = 0usize;
    let mut offset = 0usize;
    while offset + nperseg <= n {
        for (i, slot) in buffer.iter_mut().enumerate() {
            *slot = FftComplex::new((positions[offset + i] - mean) * window[i], 0.0);
        }
        fft.process(&mut buffer);
        for (k, value) in buffer.iter().take(n_bins).enumerate() {
            let one_sided = if k == 0 || k == n_bins - 1 { 1.0 } else { 2.0 };
            psd[k] += one_sided * value.norm_sqr() / (fs * window_power);
        }
        segments += 1;
        offset += hop;
    }

    let points = psd
        .iter()
        .enumerate()
        .map(|(k, p)| (k as f64 * fs / nperseg as f64, (p / segments as f64).sqrt()))
        .collect();
    Ok(SpectrumSeries::new(points).expect("welch grid is valid by construction"))
}
