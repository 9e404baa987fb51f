//! Validated experiment configuration: aggregate of the physical description,
//! TOML parsing/serialization with shipped defaults, and the four standard
//! operating points used throughout the test and oracle suites.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{
    self, BathState, CavityGeometry, DerivedCavity, FieldDrive, FieldLabel, MirrorMechanics,
    ParamError,
};

/// A sinusoidal external force applied to the mirror.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExternalDrive {
    /// Force amplitude [N].
    pub amplitude: f64,
    /// Drive frequency [Hz].
    pub frequency: f64,
}

/// Default integrator settings carried by the configuration; the time-domain
/// module copies these into its own run description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimDefaults {
    /// Integrator time step [s].
    pub time_step: f64,
    /// Run length [s].
    pub duration: f64,
    /// RNG seed for the noise streams.
    pub seed: u64,
    /// Apply the thermal Langevin force.
    pub thermal_noise: bool,
    /// Laser frequency-noise amplitude spectral density [Hz/√Hz], common to
    /// both fields.
    pub frequency_noise_asd: f64,
    pub external_drive: Option<ExternalDrive>,
    /// Slave the fields to the instantaneous Lorentzian instead of
    /// integrating the cavity pole.
    pub adiabatic_mode: bool,
    /// Initial mirror displacement [m] (kick for ringdown studies).
    pub initial_displacement: f64,
    /// Record every n-th integrator step into the trajectory.
    pub sample_every: usize,
}

impl Default for SimDefaults {
    fn default() -> Self {
        Self {
            time_step: 1e-6,
            duration: 0.05,
            seed: 42,
            thermal_noise: false,
            frequency_noise_asd: 0.0,
            external_drive: None,
            adiabatic_mode: false,
            initial_displacement: 0.0,
            sample_every: 1,
        }
    }
}

/// Full physical description of one experiment: cavity geometry, mirror
/// mechanics, the two optical fields, thermal bath, beam spot and integrator
/// defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub cavity: CavityGeometry,
    pub mirrors: MirrorMechanics,
    pub carrier: FieldDrive,
    pub subcarrier: FieldDrive,
    pub bath: BathState,
    pub sim: SimDefaults,
    /// Beam spot area on the mirror [m²] (for the equivalent Young's modulus).
    pub spot_area: f64,
    /// Optional total laser power budget [W]; when set, the two field powers
    /// must not exceed it.
    pub total_laser_power: Option<f64>,
}

impl ExperimentConfig {
    pub fn derived_cavity(&self) -> DerivedCavity {
        model::derive_cavity(&self.cavity)
    }

    pub fn reduced_mass(&self) -> f64 {
        model::reduced_mass(&self.mirrors)
    }

    /// Copy with both field powers set to zero (the "no optical spring"
    /// reference system).
    pub fn without_optical_power(&self) -> Self {
        let mut cfg = self.clone();
        cfg.carrier.input_power = 0.0;
        cfg.subcarrier.input_power = 0.0;
        cfg
    }

    /// Copy with the two detunings replaced (used by detuning-plane sweeps).
    pub fn with_detunings(&self, carrier: f64, subcarrier: f64) -> Self {
        let mut cfg = self.clone();
        cfg.carrier.detuning = carrier;
        cfg.subcarrier.detuning = subcarrier;
        cfg
    }

    /// Short content hash of the resolved configuration, used to tag derived
    /// data products with their provenance.
    pub fn fingerprint(&self) -> String {
        let toml = self.to_toml_string();
        let digest = Sha256::digest(toml.as_bytes());
        let mut out = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    /// Serialize back to the TOML schema accepted by [`parse_config`].
    pub fn to_toml_string(&self) -> String {
        let raw = RawConfig::from(self);
        toml::to_string_pretty(&raw).expect("config serialization cannot fail")
    }
}

impl Default for ExperimentConfig {
    /// The shipped default configuration is the stable two-field operating
    /// point, preset [`Preset::D`].
    fn default() -> Self {
        preset(Preset::D)
    }
}

/// The four standard operating points (carrier detuning, subcarrier detuning,
/// in units of γ): a = (0.5, 0), b = (3, 0.5), c = (3, 0), d = (3, −0.3).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    A,
    B,
    C,
    D,
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Preset::A),
            "b" => Ok(Preset::B),
            "c" => Ok(Preset::C),
            "d" => Ok(Preset::D),
            other => Err(format!("unknown preset `{other}` (expected a, b, c or d)")),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Preset::A => "a",
            Preset::B => "b",
            Preset::C => "c",
            Preset::D => "d",
        };
        f.write_str(s)
    }
}

// Input powers are calibration constants: preset (a) puts the trap resonance
// near 5.3 kHz with a dc rigidity of 1.8e6 N/m; presets (b)-(d) share the
// carrier power that places the preset-(c) resonance at 2178 Hz. The
// subcarrier always carries 1/20 of the carrier power.
const PRESET_A_CARRIER_W: f64 = 2.85;
const PRESET_BCD_CARRIER_W: f64 = 3.129;

/// Build one of the standard operating points on top of the shipped physical
/// defaults (L = 0.9 m, 𝒯ᵢ = 8×10⁻⁴, λ₀ = 1064 nm, 1 g / 250 g mirrors,
/// Ω_m = 2π×172 Hz, Q_m = 3200, T = 293 K).
pub fn preset(which: Preset) -> ExperimentConfig {
    let (carrier_power, carrier_detuning, subcarrier_detuning) = match which {
        Preset::A => (PRESET_A_CARRIER_W, 0.5, 0.0),
        Preset::B => (PRESET_BCD_CARRIER_W, 3.0, 0.5),
        Preset::C => (PRESET_BCD_CARRIER_W, 3.0, 0.0),
        Preset::D => (PRESET_BCD_CARRIER_W, 3.0, -0.3),
    };
    ExperimentConfig {
        cavity: CavityGeometry::new(0.9, 8e-4, 1.064e-6).expect("valid default cavity"),
        mirrors: MirrorMechanics::new(1e-3, 0.25, std::f64::consts::TAU * 172.0, 3200.0)
            .expect("valid default mirrors"),
        carrier: FieldDrive::new(carrier_power, carrier_detuning, FieldLabel::Carrier)
            .expect("valid default carrier"),
        subcarrier: FieldDrive::new(
            carrier_power / 20.0,
            subcarrier_detuning,
            FieldLabel::Subcarrier,
        )
        .expect("valid default subcarrier"),
        bath: BathState::new(293.0).expect("valid default bath"),
        sim: SimDefaults::default(),
        spot_area: 1.5e-6,
        total_laser_power: None,
    }
}

/// Configuration loading/validation failure.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {path}: {message}")]
    Validation { path: String, message: String },
}

fn validation(section: &str, err: ParamError) -> ConfigError {
    let message = err.to_string();
    // The parameter name leads the message; move it into the path.
    let message = message
        .strip_prefix(err.name())
        .map(|rest| rest.trim_start().to_string())
        .unwrap_or(message);
    ConfigError::Validation {
        path: format!("{section}.{}", err.name()),
        message,
    }
}

/// Parse and validate a TOML configuration file. Missing sections and fields
/// take the shipped defaults.
pub fn parse_config(path: impl AsRef<Path>) -> Result<ExperimentConfig, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text)
}

/// Parse and validate configuration text (TOML).
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text)?;
    raw.validate()
}

// ---------------------------------------------------------------------------
// Raw TOML schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawConfig {
    #[serde(default)]
    cavity: RawCavity,
    #[serde(default)]
    mirrors: RawMirrors,
    #[serde(default = "RawField::default_carrier")]
    carrier: RawField,
    #[serde(default = "RawField::default_subcarrier")]
    subcarrier: RawField,
    #[serde(default)]
    bath: RawBath,
    #[serde(default)]
    spot: RawSpot,
    #[serde(default)]
    sim: RawSim,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    total_laser_power_w: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawCavity {
    #[serde(default = "defaults::length_m")]
    length_m: f64,
    #[serde(default = "defaults::input_transmission")]
    input_transmission: f64,
    #[serde(default = "defaults::wavelength_m")]
    wavelength_m: f64,
}

impl Default for RawCavity {
    fn default() -> Self {
        Self {
            length_m: defaults::length_m(),
            input_transmission: defaults::input_transmission(),
            wavelength_m: defaults::wavelength_m(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawMirrors {
    #[serde(default = "defaults::end_mass_kg")]
    end_mass_kg: f64,
    #[serde(default = "defaults::input_mass_kg")]
    input_mass_kg: f64,
    #[serde(default = "defaults::natural_frequency_hz")]
    natural_frequency_hz: f64,
    #[serde(default = "defaults::quality_factor")]
    quality_factor: f64,
}

impl Default for RawMirrors {
    fn default() -> Self {
        Self {
            end_mass_kg: defaults::end_mass_kg(),
            input_mass_kg: defaults::input_mass_kg(),
            natural_frequency_hz: defaults::natural_frequency_hz(),
            quality_factor: defaults::quality_factor(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawField {
    input_power_w: f64,
    detuning_over_gamma: f64,
}

impl RawField {
    fn default_carrier() -> Self {
        Self {
            input_power_w: PRESET_BCD_CARRIER_W,
            detuning_over_gamma: 3.0,
        }
    }

    fn default_subcarrier() -> Self {
        Self {
            input_power_w: PRESET_BCD_CARRIER_W / 20.0,
            detuning_over_gamma: -0.3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawBath {
    #[serde(default = "defaults::temperature_k")]
    temperature_k: f64,
}

impl Default for RawBath {
    fn default() -> Self {
        Self {
            temperature_k: defaults::temperature_k(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawSpot {
    #[serde(default = "defaults::spot_area_m2")]
    area_m2: f64,
}

impl Default for RawSpot {
    fn default() -> Self {
        Self {
            area_m2: defaults::spot_area_m2(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawSim {
    #[serde(default = "defaults::time_step_s")]
    time_step_s: f64,
    #[serde(default = "defaults::duration_s")]
    duration_s: f64,
    #[serde(default = "defaults::seed")]
    seed: u64,
    #[serde(default)]
    thermal_noise: bool,
    #[serde(default)]
    frequency_noise_asd_hz_rthz: f64,
    #[serde(default)]
    adiabatic_mode: bool,
    #[serde(default)]
    initial_displacement_m: f64,
    #[serde(default = "defaults::sample_every")]
    sample_every: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    drive_amplitude_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    drive_frequency_hz: Option<f64>,
}

impl Default for RawSim {
    fn default() -> Self {
        Self {
            time_step_s: defaults::time_step_s(),
            duration_s: defaults::duration_s(),
            seed: defaults::seed(),
            thermal_noise: false,
            frequency_noise_asd_hz_rthz: 0.0,
            adiabatic_mode: false,
            initial_displacement_m: 0.0,
            sample_every: defaults::sample_every(),
            drive_amplitude_n: None,
            drive_frequency_hz: None,
        }
    }
}

mod defaults {
    pub fn length_m() -> f64 {
        0.9
    }
    pub fn input_transmission() -> f64 {
        8e-4
    }
    pub fn wavelength_m() -> f64 {
        1.064e-6
    }
    pub fn end_mass_kg() -> f64 {
        1e-3
    }
    pub fn input_mass_kg() -> f64 {
        0.25
    }
    pub fn natural_frequency_hz() -> f64 {
        172.0
    }
    pub fn quality_factor() -> f64 {
        3200.0
    }
    pub fn temperature_k() -> f64 {
        293.0
    }
    pub fn spot_area_m2() -> f64 {
        1.5e-6
    }
    pub fn time_step_s() -> f64 {
        1e-6
    }
    pub fn duration_s() -> f64 {
        0.05
    }
    pub fn seed() -> u64 {
        42
    }
    pub fn sample_every() -> usize {
        1
    }
}

impl RawConfig {
    fn validate(self) -> Result<ExperimentConfig, ConfigError> {
        let cavity = CavityGeometry::new(
            self.cavity.length_m,
            self.cavity.input_transmission,
            self.cavity.wavelength_m,
        )
        .map_err(|e| validation("cavity", e))?;
        let mirrors = MirrorMechanics::new(
            self.mirrors.end_mass_kg,
            self.mirrors.input_mass_kg,
            std::f64::consts::TAU * self.mirrors.natural_frequency_hz,
            self.mirrors.quality_factor,
        )
        .map_err(|e| validation("mirrors", e))?;
        let carrier = FieldDrive::new(
            self.carrier.input_power_w,
            self.carrier.detuning_over_gamma,
            FieldLabel::Carrier,
        )
        .map_err(|e| validation("carrier", e))?;
        let subcarrier = FieldDrive::new(
            self.subcarrier.input_power_w,
            self.subcarrier.detuning_over_gamma,
            FieldLabel::Subcarrier,
        )
        .map_err(|e| validation("subcarrier", e))?;
        let bath =
            BathState::new(self.bath.temperature_k).map_err(|e| validation("bath", e))?;

        if !(self.spot.area_m2.is_finite() && self.spot.area_m2 > 0.0) {
            return Err(ConfigError::Validation {
                path: "spot.area_m2".into(),
                message: format!("must be positive (got {})", self.spot.area_m2),
            });
        }
        if !(self.sim.time_step_s.is_finite() && self.sim.time_step_s > 0.0) {
            return Err(ConfigError::Validation {
                path: "sim.time_step_s".into(),
                message: format!("must be positive (got {})", self.sim.time_step_s),
            });
        }
        if !(self.sim.duration_s.is_finite() && self.sim.duration_s > 0.0) {
            return Err(ConfigError::Validation {
                path: "sim.duration_s".into(),
                message: format!("must be positive (got {})", self.sim.duration_s),
            });
        }
        if self.sim.sample_every == 0 {
            return Err(ConfigError::Validation {
                path: "sim.sample_every".into(),
                message: "must be at least 1".into(),
            });
        }
        if self.sim.frequency_noise_asd_hz_rthz < 0.0
            || !self.sim.frequency_noise_asd_hz_rthz.is_finite()
        {
            return Err(ConfigError::Validation {
                path: "sim.frequency_noise_asd_hz_rthz".into(),
                message: format!(
                    "must be non-negative (got {})",
                    self.sim.frequency_noise_asd_hz_rthz
                ),
            });
        }
        let external_drive = match (self.sim.drive_amplitude_n, self.sim.drive_frequency_hz) {
            (None, None) => None,
            (Some(a), Some(f)) => {
                if !(f.is_finite() && f > 0.0) {
                    return Err(ConfigError::Validation {
                        path: "sim.drive_frequency_hz".into(),
                        message: format!("must be positive (got {f})"),
                    });
                }
                if !a.is_finite() {
                    return Err(ConfigError::Validation {
                        path: "sim.drive_amplitude_n".into(),
                        message: format!("must be finite (got {a})"),
                    });
                }
                Some(ExternalDrive {
                    amplitude: a,
                    frequency: f,
                })
            }
            _ => {
                return Err(ConfigError::Validation {
                    path: "sim.drive_amplitude_n".into(),
                    message: "drive_amplitude_n and drive_frequency_hz must be set together"
                        .into(),
                });
            }
        };

        if let Some(total) = self.total_laser_power_w {
            if carrier.input_power + subcarrier.input_power > total {
                return Err(ConfigError::Validation {
                    path: "total_laser_power_w".into(),
                    message: format!(
                        "field powers {} W + {} W exceed the total budget {} W",
                        carrier.input_power, subcarrier.input_power, total
                    ),
                });
            }
        }

        Ok(ExperimentConfig {
            cavity,
            mirrors,
            carrier,
            subcarrier,
            bath,
            sim: SimDefaults {
                time_step: self.sim.time_step_s,
                duration: self.sim.duration_s,
                seed: self.sim.seed,
                thermal_noise: self.sim.thermal_noise,
                frequency_noise_asd: self.sim.frequency_noise_asd_hz_rthz,
                external_drive,
                adiabatic_mode: self.sim.adiabatic_mode,
                initial_displacement: self.sim.initial_displacement_m,
                sample_every: self.sim.sample_every,
            },
            spot_area: self.spot.area_m2,
            total_laser_power: self.total_laser_power_w,
        })
    }
}

impl From<&ExperimentConfig> for RawConfig {
    fn from(cfg: &ExperimentConfig) -> Self {
        RawConfig {
            cavity: RawCavity {
                length_m: cfg.cavity.length,
                input_transmission: cfg.cavity.input_transmission,
                wavelength_m: cfg.cavity.wavelength,
            },
            mirrors: RawMirrors {
                end_mass_kg: cfg.mirrors.end_mass,
                input_mass_kg: cfg.mirrors.input_mass,
                natural_frequency_hz: cfg.mirrors.natural_frequency / std::f64::consts::TAU,
                quality_factor: cfg.mirrors.quality_factor,
            },
            carrier: RawField {
                input_power_w: cfg.carrier.input_power,
                detuning_over_gamma: cfg.carrier.detuning,
            },
            subcarrier: RawField {
                input_power_w: cfg.subcarrier.input_power,
                detuning_over_gamma: cfg.subcarrier.detuning,
            },
            bath: RawBath {
                temperature_k: cfg.bath.temperature,
            },
            spot: RawSpot {
                area_m2: cfg.spot_area,
            },
            sim: RawSim {
                time_step_s: cfg.sim.time_step,
                duration_s: cfg.sim.duration,
                seed: cfg.sim.seed,
                thermal_noise: cfg.sim.thermal_noise,
                frequency_noise_asd_hz_rthz: cfg.sim.frequency_noise_asd,
                adiabatic_mode: cfg.sim.adiabatic_mode,
                initial_displacement_m: cfg.sim.initial_displacement,
                sample_every: cfg.sim.sample_every,
                drive_amplitude_n: cfg.sim.external_drive.map(|d| d.amplitude),
                drive_frequency_hz: cfg.sim.external_drive.map(|d| d.frequency),
            },
            total_laser_power_w: cfg.total_laser_power,
        }
    }
}
