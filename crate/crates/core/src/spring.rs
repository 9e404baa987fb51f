//! Optical spring and damping coefficients of the detuned cavity fields.
//!
//! A field detuned by δ from resonance makes the circulating power — and with
//! it the radiation pressure — linearly dependent on cavity length, which
//! acts as a spring of stiffness K. The cavity pole delays that response on
//! the time scale γ⁻¹, which (i) rolls the stiffness off at high frequency
//! and (ii) adds a velocity-proportional force with coefficient Γ.
//!
//! With u = Ω/γ, x = δ/γ and B = 1 + x² − u²:
//!
//! ```text
//! K(Ω) = K₀ · B / (B² + 4u²)
//! K₀   = 128π I₀ x / (𝒯ᵢ² c λ₀ (1 + x²))
//! Γ(Ω) = 2 K₀ / (M γ (B² + 4u²))        [= 2K(Ω)/(MγB) wherever B ≠ 0]
//! ```
//!
//! Sign convention: positive K is restoring, positive Γ is *anti*-damping.
//! The equation of motion used downstream is
//! `M ẍ = −M Ω_m² x − M Γ_m ẋ − K_tot x + M Γ_tot ẋ + F_ext`,
//! so a lone blue-detuned field (K > 0, Γ > 0) is dynamically unstable.
//!
//! The two fields are separated by one free spectral range (~10⁸ Hz), far
//! above any mechanical frequency, so their beat-note forces time-average to
//! zero and the coefficients superpose linearly.

use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::model::{self, DerivedCavity, FieldDrive, FieldLabel, SPEED_OF_LIGHT};

/// Optical stiffness and damping at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpringCoefficients {
    /// Optical stiffness K [N/m]; positive restores.
    pub stiffness: f64,
    /// Optical damping coefficient Γ [1/s]; positive anti-damps.
    pub damping: f64,
    /// Frequency Ω at which the coefficients were evaluated [rad/s].
    pub frequency: f64,
}

impl std::ops::Add for SpringCoefficients {
    type Output = SpringCoefficients;

    fn add(self, other: SpringCoefficients) -> SpringCoefficients {
        SpringCoefficients {
            stiffness: self.stiffness + other.stiffness,
            damping: self.damping + other.damping,
            frequency: self.frequency,
        }
    }
}

/// Everything one field needs to evaluate its spring coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSpringInput {
    pub field: FieldDrive,
    pub derived: DerivedCavity,
    /// Reduced mass M of the two mirrors [kg].
    pub reduced_mass: f64,
    /// Laser wavelength λ₀ [m].
    pub wavelength: f64,
    /// Input-mirror power transmission 𝒯ᵢ.
    pub input_transmission: f64,
}

impl FieldSpringInput {
    /// Extract the named field from a full experiment configuration.
    pub fn from_config(cfg: &ExperimentConfig, label: FieldLabel) -> Self {
        let field = match label {
            FieldLabel::Carrier => cfg.carrier,
            FieldLabel::Subcarrier => cfg.subcarrier,
        };
        FieldSpringInput {
            field,
            derived: cfg.derived_cavity(),
            reduced_mass: cfg.reduced_mass(),
            wavelength: cfg.cavity.wavelength,
            input_transmission: cfg.cavity.input_transmission,
        }
    }
}

/// Both fields of a configuration, carrier first.
pub fn both_fields(cfg: &ExperimentConfig) -> [FieldSpringInput; 2] {
    [
        FieldSpringInput::from_config(cfg, FieldLabel::Carrier),
        FieldSpringInput::from_config(cfg, FieldLabel::Subcarrier),
    ]
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpringError {
    #[error("fields do not share the same cavity parameters and cannot be combined")]
    MismatchedCavity,
    #[error("combine requires at least one field")]
    NoFields,
}

/// Zero-frequency spring constant K₀ = (2/c)·dP/dL of one field [N/m].
///
/// Odd in the detuning: blue detuning (x > 0) restores, red anti-restores.
pub fn k0(input: &FieldSpringInput) -> f64 {
    let x = input.field.detuning;
    let ti = input.input_transmission;
    128.0 * std::f64::consts::PI * input.field.input_power * x
        / (ti * ti * SPEED_OF_LIGHT * input.wavelength * (1.0 + x * x))
}

/// Spring constant K(Ω) of one field [N/m].
///
/// Even in Ω. Vanishes where B = 1 + x² − u² does, and falls off as
/// K₀·(Ω/γ)⁻² in magnitude for Ω ≫ γ.
pub fn k_at(input: &FieldSpringInput, omega: f64) -> f64 {
    let u = omega / input.derived.linewidth_hwhm;
    let x = input.field.detuning;
    let b = 1.0 + x * x - u * u;
    k0(input) * b / (b * b + 4.0 * u * u)
}

/// Damping coefficient Γ(Ω) of one field [1/s]; positive anti-damps.
///
/// Evaluated through the regularized closed form 2K₀/(Mγ(B² + 4u²)), which
/// equals 2K(Ω)/(MγB) wherever B ≠ 0 and extends it continuously through the
/// B = 0 line. Always shares sign with K₀.
pub fn gamma_at(input: &FieldSpringInput, omega: f64) -> f64 {
    let gamma = input.derived.linewidth_hwhm;
    let u = omega / gamma;
    let x = input.field.detuning;
    let b = 1.0 + x * x - u * u;
    2.0 * k0(input) / (input.reduced_mass * gamma * (b * b + 4.0 * u * u))
}

/// Low-frequency damping-per-stiffness ratio Γ/K = (2/(Mγ))/(1 + x²).
///
/// Valid in the Ω ≪ γ regime (the caller's responsibility). A field with
/// larger detuning resonates less strongly, responds faster, and therefore
/// trades less damping for the same stiffness.
pub fn damping_per_stiffness(input: &FieldSpringInput) -> f64 {
    let x = input.field.detuning;
    (2.0 / (input.reduced_mass * input.derived.linewidth_hwhm)) / (1.0 + x * x)
}

/// Linear superposition of several fields' coefficients at one frequency.
///
/// All fields must share the same cavity (identical derived quantities,
/// reduced mass, wavelength and input transmission).
pub fn combine(
    fields: &[FieldSpringInput],
    omega: f64,
) -> Result<SpringCoefficients, SpringError> {
    let first = fields.first().ok_or(SpringError::NoFields)?;
    for f in &fields[1..] {
        let matches = f.derived == first.derived
            && f.reduced_mass == first.reduced_mass
            && f.wavelength == first.wavelength
            && f.input_transmission == first.input_transmission;
        if !matches {
            return Err(SpringError::MismatchedCavity);
        }
    }
    let mut stiffness = 0.0;
    let mut damping = 0.0;
    for f in fields {
        stiffness += k_at(f, omega);
        damping += gamma_at(f, omega);
    }
    Ok(SpringCoefficients {
        stiffness,
        damping,
        frequency: omega,
    })
}

/// Combined coefficients of a configuration's two fields; infallible because
/// both fields come from the same cavity.
pub fn combined_for_config(cfg: &ExperimentConfig, omega: f64) -> SpringCoefficients {
    combine(&both_fields(cfg), omega).expect("fields from one config share the cavity")
}
