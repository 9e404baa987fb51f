//! Simulator and analysis toolkit for a two-field ("double optical spring")
//! detuned-cavity optomechanical trap.
//!
//! A Fabry–Perot cavity driven by two laser fields with independently chosen
//! detunings exerts radiation-pressure forces on its mirrors that act as a
//! frequency-dependent stiffness and viscosity. This crate computes those
//! coefficients, classifies detuning configurations by stability, synthesizes
//! mechanical transfer functions, does the optical-cooling bookkeeping
//! (effective temperature, occupation number, band-limited RMS), and
//! cross-validates everything against a time-domain integrator of the coupled
//! cavity-field + mirror dynamics.
//!
//! Module map:
//! - [`model`] — physical parameters, derived cavity quantities, static
//!   (adiabatic) intracavity power and radiation force.
//! - [`config`] — validated experiment configuration, TOML I/O, presets.
//! - [`spring`] — optical spring constant K(Ω) and damping Γ(Ω) per field,
//!   and their superposition.
//! - [`stability`] — region taxonomy, detuning-plane maps, the shifted
//!   resonance Ω_eff, and a small-signal eigenvalue check.
//! - [`response`] — displacement-per-force transfer functions, resonance
//!   extraction, equivalent Young's modulus.
//! - [`thermal`] — thermal force spectrum, effective temperature, occupation
//!   number, band-limited RMS, frequency-noise calibration.
//! - [`timesim`] — stochastic time-domain integrator; the independent oracle
//!   for the frequency-domain results.

pub mod config;
pub mod model;
pub mod response;
pub mod spring;
pub mod stability;
pub mod thermal;
pub mod timesim;

pub use config::{ExperimentConfig, Preset};
pub use model::{BathState, CavityGeometry, DerivedCavity, FieldDrive, MirrorMechanics};
pub use spring::SpringCoefficients;
pub use stability::{EffectiveResonance, RegionLabel, StabilityMap};
