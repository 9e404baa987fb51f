//! Physical parameters of the trapped-mirror experiment and the cavity
//! quantities derived from them, plus the static (adiabatic) intracavity
//! power and radiation-pressure force used by the oracle suite and the
//! time-domain integrator.
//!
//! All detunings are stored dimensionlessly as δ/γ; conversion to rad/s
//! happens only at module boundaries (via [`DerivedCavity::linewidth_hwhm`]).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in vacuum [m/s] (CODATA, 6 significant figures).
pub const SPEED_OF_LIGHT: f64 = 2.99792e8;

/// Boltzmann constant [J/K] (CODATA, 6 significant figures).
pub const BOLTZMANN_CONSTANT: f64 = 1.38065e-23;

/// Reduced Planck constant [J·s] (CODATA, 6 significant figures).
pub const REDUCED_PLANCK_CONSTANT: f64 = 1.05457e-34;

/// A parameter violated its domain during construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{name} must be positive (got {value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be non-negative (got {value})")]
    Negative { name: &'static str, value: f64 },
    #[error("{name} must lie strictly between {lo} and {hi} (got {value})")]
    OutOfRange {
        name: &'static str,
        lo: f64,
        hi: f64,
        value: f64,
    },
    #[error("{name} must be finite (got {value})")]
    NonFinite { name: &'static str, value: f64 },
}

impl ParamError {
    /// Name of the offending parameter (used to build config paths).
    pub fn name(&self) -> &'static str {
        match self {
            ParamError::NonPositive { name, .. }
            | ParamError::Negative { name, .. }
            | ParamError::OutOfRange { name, .. }
            | ParamError::NonFinite { name, .. } => name,
        }
    }
}

fn require_positive(name: &'static str, value: f64) -> Result<f64, ParamError> {
    if !value.is_finite() {
        return Err(ParamError::NonFinite { name, value });
    }
    if value <= 0.0 {
        return Err(ParamError::NonPositive { name, value });
    }
    Ok(value)
}

fn require_non_negative(name: &'static str, value: f64) -> Result<f64, ParamError> {
    if !value.is_finite() {
        return Err(ParamError::NonFinite { name, value });
    }
    if value < 0.0 {
        return Err(ParamError::Negative { name, value });
    }
    Ok(value)
}

/// Fixed geometry of the Fabry–Perot cavity.
///
/// The input-mirror power transmission is the only loss channel modeled;
/// linewidth, resonant gain and free spectral range are always derived from
/// it (never entered directly), so a configuration cannot be internally
/// inconsistent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityGeometry {
    /// Cavity length [m].
    pub length: f64,
    /// Power transmission of the input mirror (dimensionless).
    pub input_transmission: f64,
    /// Laser wavelength [m].
    pub wavelength: f64,
}

impl CavityGeometry {
    pub fn new(length: f64, input_transmission: f64, wavelength: f64) -> Result<Self, ParamError> {
        require_positive("length_m", length)?;
        if !input_transmission.is_finite() {
            return Err(ParamError::NonFinite {
                name: "input_transmission",
                value: input_transmission,
            });
        }
        if input_transmission <= 0.0 || input_transmission >= 1.0 {
            return Err(ParamError::OutOfRange {
                name: "input_transmission",
                lo: 0.0,
                hi: 1.0,
                value: input_transmission,
            });
        }
        require_positive("wavelength_m", wavelength)?;
        Ok(Self {
            length,
            input_transmission,
            wavelength,
        })
    }
}

/// Cavity response quantities derived from [`CavityGeometry`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedCavity {
    /// Resonance half width at half maximum γ [rad/s], 𝒯ᵢ·c/(4L).
    pub linewidth_hwhm: f64,
    /// Free spectral range c/(2L) [Hz].
    pub free_spectral_range: f64,
    /// Circulating-to-input power ratio on resonance, 4/𝒯ᵢ.
    pub resonant_gain: f64,
    /// Detuning shift per unit cavity elongation, dδ/dL [rad/s per m].
    ///
    /// Each longitudinal resonance sits at ω_q = qπc/L, so elongating the
    /// cavity by dL moves the resonance by dω_q = −ω_q·dL/L. For a fixed
    /// laser frequency ω ≈ 2πc/λ₀ the detuning δ = ω − ω_q therefore grows
    /// by (2πc/(λ₀L))·dL.
    pub detuning_per_length: f64,
}

/// Derive linewidth, FSR, resonant gain and the detuning-per-length factor.
pub fn derive_cavity(geometry: &CavityGeometry) -> DerivedCavity {
    let l = geometry.length;
    let ti = geometry.input_transmission;
    DerivedCavity {
        linewidth_hwhm: ti * SPEED_OF_LIGHT / (4.0 * l),
        free_spectral_range: SPEED_OF_LIGHT / (2.0 * l),
        resonant_gain: 4.0 / ti,
        detuning_per_length: 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT
            / (geometry.wavelength * l),
    }
}

/// Mechanical parameters of the two cavity mirrors.
///
/// The viscous damping rate Γ_m = Ω_m/Q_m is exposed as a method so that the
/// relation Γ_m·Q_m = Ω_m holds by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorMechanics {
    /// Mass of the light end mirror [kg].
    pub end_mass: f64,
    /// Mass of the heavy input mirror [kg].
    pub input_mass: f64,
    /// Natural angular frequency of the relevant mechanical mode Ω_m [rad/s].
    pub natural_frequency: f64,
    /// Mechanical quality factor Q_m.
    pub quality_factor: f64,
}

impl MirrorMechanics {
    pub fn new(
        end_mass: f64,
        input_mass: f64,
        natural_frequency: f64,
        quality_factor: f64,
    ) -> Result<Self, ParamError> {
        require_positive("end_mass_kg", end_mass)?;
        require_positive("input_mass_kg", input_mass)?;
        require_positive("natural_frequency_hz", natural_frequency)?;
        require_positive("quality_factor", quality_factor)?;
        Ok(Self {
            end_mass,
            input_mass,
            natural_frequency,
            quality_factor,
        })
    }

    /// Mechanical damping rate Γ_m = Ω_m/Q_m [1/s].
    pub fn mechanical_damping(&self) -> f64 {
        self.natural_frequency / self.quality_factor
    }
}

/// Which of the two injected fields a drive describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldLabel {
    Carrier,
    Subcarrier,
}

/// One injected laser field: input power and detuning (in units of γ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldDrive {
    /// Input power I₀ [W].
    pub input_power: f64,
    /// Detuning from cavity resonance, δ/γ (dimensionless; positive = blue).
    pub detuning: f64,
    pub label: FieldLabel,
}

impl FieldDrive {
    pub fn new(input_power: f64, detuning: f64, label: FieldLabel) -> Result<Self, ParamError> {
        require_non_negative("input_power_w", input_power)?;
        if !detuning.is_finite() {
            return Err(ParamError::NonFinite {
                name: "detuning_over_gamma",
                value: detuning,
            });
        }
        Ok(Self {
            input_power,
            detuning,
            label,
        })
    }
}

/// Thermal bath seen by the mirror suspension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathState {
    /// Bath temperature T [K].
    pub temperature: f64,
}

impl BathState {
    pub fn new(temperature: f64) -> Result<Self, ParamError> {
        require_non_negative("temperature_k", temperature)?;
        Ok(Self { temperature })
    }
}

/// Reduced mass m₁m₂/(m₁+m₂) of the two mirrors [kg], governing their
/// relative motion.
pub fn reduced_mass(mech: &MirrorMechanics) -> f64 {
    mech.end_mass * mech.input_mass / (mech.end_mass + mech.input_mass)
}

/// Static circulating power of a detuned field [W]: the Lorentzian resonance
/// `resonant_gain·I₀/(1 + (δ/γ)²)`.
pub fn intracavity_power(field: &FieldDrive, derived: &DerivedCavity) -> f64 {
    let x = field.detuning;
    derived.resonant_gain * field.input_power / (1.0 + x * x)
}

/// Radiation-pressure force of a circulating power on a perfectly reflecting
/// mirror at normal incidence: 2P/c [N].
pub fn radiation_force(circulating_power: f64) -> f64 {
    debug_assert!(circulating_power >= 0.0);
    2.0 * circulating_power / SPEED_OF_LIGHT
}
