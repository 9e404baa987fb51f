//! Stability taxonomy of detuning configurations, detuning-plane maps, the
//! shifted optomechanical resonance Ω_eff, and a small-signal eigenvalue
//! check that includes the mechanical terms.
//!
//! Region labels follow the optical-only sign taxonomy at a fixed observation
//! frequency: stable means K > 0 with Γ < 0 (restoring and damped). The
//! mechanical restoring force and suspension damping enter only through
//! [`eigen_check`], which freezes the frequency-dependent coefficients at the
//! solved resonance (quasi-static approximation); the exact delay dynamics
//! are validated empirically by the time-domain module.

use std::io::{self, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::spring::{self, SpringCoefficients};

/// Sign taxonomy of the combined optical coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionLabel {
    /// K > 0, Γ < 0: restoring and damped.
    Stable,
    /// K < 0, Γ > 0.
    AntiStable,
    /// K < 0, Γ < 0.
    StaticallyUnstable,
    /// K > 0, Γ > 0: restoring but anti-damped.
    DynamicallyUnstable,
}

impl RegionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegionLabel::Stable => "stable",
            RegionLabel::AntiStable => "anti_stable",
            RegionLabel::StaticallyUnstable => "statically_unstable",
            RegionLabel::DynamicallyUnstable => "dynamically_unstable",
        }
    }
}

/// Classify a coefficient pair by sign. Exactly-zero coefficients sit on the
/// measure-zero region boundaries and return `None` (degenerate) instead of a
/// forced label.
pub fn classify(k: f64, gamma: f64) -> Option<RegionLabel> {
    if k == 0.0 || gamma == 0.0 {
        return None;
    }
    Some(match (k > 0.0, gamma > 0.0) {
        (true, false) => RegionLabel::Stable,
        (false, true) => RegionLabel::AntiStable,
        (false, false) => RegionLabel::StaticallyUnstable,
        (true, true) => RegionLabel::DynamicallyUnstable,
    })
}

/// One cell of a detuning-plane stability map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapCell {
    /// Carrier detuning δ_C/γ.
    pub carrier_detuning: f64,
    /// Subcarrier detuning δ_SC/γ.
    pub subcarrier_detuning: f64,
    /// Combined optical stiffness at the observation frequency [N/m].
    pub stiffness: f64,
    /// Combined optical damping at the observation frequency [1/s].
    pub damping: f64,
    /// Sign-taxonomy label; `None` marks a degenerate (zero-coefficient) cell.
    pub label: Option<RegionLabel>,
    /// Cell lies on the cold-damping locus (δ_SC = 0, δ_C < 0), where the
    /// subcarrier provides no optical force and the red-detuned carrier
    /// supplies viscosity alone.
    pub cold_damping: bool,
}

/// Rectangular grid of [`MapCell`] over (δ_C/γ, δ_SC/γ).
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityMap {
    /// Carrier-detuning axis values (ascending).
    pub carrier_detunings: Vec<f64>,
    /// Subcarrier-detuning axis values (ascending); always contains 0 when
    /// the requested range straddles it, so the cold-damping locus is present.
    pub subcarrier_detunings: Vec<f64>,
    /// Cells in row-major order: carrier index outer, subcarrier index inner.
    pub cells: Vec<MapCell>,
    /// Observation frequency Ω at which every cell was evaluated [rad/s].
    pub observation_frequency: f64,
    /// Carrier-to-subcarrier input power ratio held fixed across the grid.
    pub power_ratio: f64,
}

impl StabilityMap {
    pub fn cell(&self, carrier_index: usize, subcarrier_index: usize) -> &MapCell {
        &self.cells[carrier_index * self.subcarrier_detunings.len() + subcarrier_index]
    }

    /// Index of the cell whose detunings are closest to the given pair.
    pub fn nearest_cell_index(&self, carrier: f64, subcarrier: f64) -> (usize, usize) {
        let ic = nearest_index(&self.carrier_detunings, carrier);
        let isc = nearest_index(&self.subcarrier_detunings, subcarrier);
        (ic, isc)
    }

    /// Serialize as CSV with the fixed header
    /// `delta_c_over_gamma,delta_sc_over_gamma,k_total_n_per_m,gamma_total_per_s,label`.
    pub fn to_csv(&self, writer: &mut impl Write) -> io::Result<()> {
        writeln!(
            writer,
            "delta_c_over_gamma,delta_sc_over_gamma,k_total_n_per_m,gamma_total_per_s,label"
        )?;
        for cell in &self.cells {
            writeln!(
                writer,
                "{},{},{},{},{}",
                cell.carrier_detuning,
                cell.subcarrier_detuning,
                cell.stiffness,
                cell.damping,
                cell.label.map_or("degenerate", |l| l.as_str())
            )?;
        }
        Ok(())
    }
}

fn nearest_index(values: &[f64], target: f64) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, v) in values.iter().enumerate() {
        let d = (v - target).abs();
        if d < best_dist {
            best_dist = d;
            best = i;
        }
    }
    best
}

/// Effective resonance parameters of the optomechanical mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveResonance {
    /// Resonant angular frequency Ω_eff [rad/s].
    pub omega_eff: f64,
    /// Net decay rate Γ_eff = Γ_m − Γ_tot(Ω_eff) [1/s]; positive decays,
    /// negative grows.
    pub gamma_eff: f64,
    /// Quality factor Ω_eff/Γ_eff (negative for growing configurations).
    pub q_eff: f64,
}

/// Result of the Ω_eff search: the primary (lowest) root plus every crossing
/// found in the bracket.
#[derive(Debug, Clone, PartialEq)]
pub struct ResonanceSearch {
    pub resonance: EffectiveResonance,
    /// All roots of Ω² = Ω_m² + K_tot(Ω)/M in the bracket, ascending.
    pub roots: Vec<f64>,
    /// |Ω² − Ω_m² − K_tot(Ω)/M| at the returned root [rad²/s²].
    pub residual: f64,
}

/// Small-signal stability verdict from the characteristic roots of
/// `s² + (Γ_m − Γ_tot(Ω_eff))·s + Ω_m² + K_tot(Ω_eff)/M = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenCheck {
    /// Both roots have negative real part.
    pub stable: bool,
    /// The two characteristic roots [1/s].
    pub decay_rates: [Complex64; 2],
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("no resonance crossing in the search bracket [{lo} rad/s, {hi} rad/s]")]
    NoCrossing { lo: f64, hi: f64 },
    #[error("detuning range is empty: lo {lo} must be below hi {hi}")]
    EmptyRange { lo: f64, hi: f64 },
    #[error("grid must have at least 2 points per axis (got {got})")]
    GridTooSmall { got: usize },
    #[error("degenerate search bracket: mechanical frequency {omega_m} rad/s is not below 10γ = {hi} rad/s")]
    DegenerateBracket { omega_m: f64, hi: f64 },
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}

/// Evaluate the combined optical coefficients over a rectangular grid of
/// (carrier, subcarrier) detunings at a fixed observation frequency, holding
/// both input powers (hence the power ratio) at the configured values.
pub fn map_detuning_plane(
    cfg: &ExperimentConfig,
    carrier_range: (f64, f64),
    subcarrier_range: (f64, f64),
    grid: (usize, usize),
    omega_obs: f64,
) -> Result<StabilityMap, StabilityError> {
    let (nc, nsc) = grid;
    if nc < 2 || nsc < 2 {
        return Err(StabilityError::GridTooSmall { got: nc.min(nsc) });
    }
    for (lo, hi) in [carrier_range, subcarrier_range] {
        if !(lo < hi) {
            return Err(StabilityError::EmptyRange { lo, hi });
        }
    }

    let carrier_detunings = linspace(carrier_range.0, carrier_range.1, nc);
    let mut subcarrier_detunings = linspace(subcarrier_range.0, subcarrier_range.1, nsc);
    // keep the cold-damping locus on the grid
    if subcarrier_range.0 < 0.0
        && subcarrier_range.1 > 0.0
        && !subcarrier_detunings.contains(&0.0)
    {
        let pos = subcarrier_detunings.partition_point(|&v| v < 0.0);
        subcarrier_detunings.insert(pos, 0.0);
    }

    let mut cells = Vec::with_capacity(carrier_detunings.len() * subcarrier_detunings.len());
    for &dc in &carrier_detunings {
        for &dsc in &subcarrier_detunings {
            let local = cfg.with_detunings(dc, dsc);
            let coeffs = spring::combined_for_config(&local, omega_obs);
            cells.push(MapCell {
                carrier_detuning: dc,
                subcarrier_detuning: dsc,
                stiffness: coeffs.stiffness,
                damping: coeffs.damping,
                label: classify(coeffs.stiffness, coeffs.damping),
                cold_damping: dsc == 0.0 && dc < 0.0,
            });
        }
    }

    Ok(StabilityMap {
        carrier_detunings,
        subcarrier_detunings,
        cells,
        observation_frequency: omega_obs,
        power_ratio: cfg.carrier.input_power / cfg.subcarrier.input_power,
    })
}

/// Residual of the resonance condition Ω² = Ω_m² + K_tot(Ω)/M.
fn resonance_mismatch(cfg: &ExperimentConfig, omega: f64) -> f64 {
    let coeffs = spring::combined_for_config(cfg, omega);
    omega * omega
        - cfg.mirrors.natural_frequency * cfg.mirrors.natural_frequency
        - coeffs.stiffness / cfg.reduced_mass()
}

const BRACKET_SCAN_POINTS: usize = 800;

/// Solve Ω² = Ω_m² + K_tot(Ω)/M for the shifted optomechanical resonance by a
/// log-spaced bracket scan over [Ω_m, 10γ] followed by bisection.
///
/// Returns every crossing found; the reported resonance is the lowest one
/// (the continuation of the mechanical mode as optical power rises). Its
/// damping is Γ_eff = Γ_m − Γ_tot(Ω_eff) under the anti-damping sign
/// convention, so positive Γ_eff means net decay.
pub fn find_omega_eff(cfg: &ExperimentConfig) -> Result<ResonanceSearch, StabilityError> {
    let omega_m = cfg.mirrors.natural_frequency;
    let hi = 10.0 * cfg.derived_cavity().linewidth_hwhm;
    if omega_m >= hi {
        return Err(StabilityError::DegenerateBracket { omega_m, hi });
    }

    let log_lo = omega_m.ln();
    let log_hi = hi.ln();
    let mut roots: Vec<f64> = Vec::new();
    let mut prev_omega = omega_m;
    let mut prev_g = resonance_mismatch(cfg, omega_m);
    if prev_g == 0.0 {
        roots.push(omega_m);
    }
    for i in 1..BRACKET_SCAN_POINTS {
        let t = i as f64 / (BRACKET_SCAN_POINTS - 1) as f64;
        let omega = (log_lo + t * (log_hi - log_lo)).exp();
        let g = resonance_mismatch(cfg, omega);
        if g == 0.0 {
            roots.push(omega);
        } else if prev_g != 0.0 && prev_g.signum() != g.signum() {
            roots.push(bisect(cfg, prev_omega, omega, prev_g));
        }
        prev_omega = omega;
        prev_g = g;
    }

    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs());
    let &omega_eff = roots.first().ok_or(StabilityError::NoCrossing {
        lo: omega_m,
        hi,
    })?;

    let gamma_tot = spring::combined_for_config(cfg, omega_eff).damping;
    let gamma_eff = cfg.mirrors.mechanical_damping() - gamma_tot;
    Ok(ResonanceSearch {
        resonance: EffectiveResonance {
            omega_eff,
            gamma_eff,
            q_eff: omega_eff / gamma_eff,
        },
        residual: resonance_mismatch(cfg, omega_eff).abs(),
        roots,
    })
}

fn bisect(cfg: &ExperimentConfig, mut lo: f64, mut hi: f64, g_lo: f64) -> f64 {
    let sign_lo = g_lo.signum();
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = resonance_mismatch(cfg, mid);
        if g_mid == 0.0 {
            return mid;
        }
        if g_mid.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Small-signal eigenvalue check at the solved resonance: evaluates the
/// characteristic roots of `s² + (Γ_m − Γ_tot(Ω_eff))s + Ω_m² + K_tot(Ω_eff)/M`
/// with the optical coefficients frozen at Ω_eff.
pub fn eigen_check(cfg: &ExperimentConfig) -> Result<EigenCheck, StabilityError> {
    let search = find_omega_eff(cfg)?;
    let omega_eff = search.resonance.omega_eff;
    let coeffs = spring::combined_for_config(cfg, omega_eff);
    let omega_m = cfg.mirrors.natural_frequency;

    let b = cfg.mirrors.mechanical_damping() - coeffs.damping;
    let c = omega_m * omega_m + coeffs.stiffness / cfg.reduced_mass();

    let discriminant = Complex64::new(b * b - 4.0 * c, 0.0).sqrt();
    let roots = [
        (Complex64::new(-b, 0.0) + discriminant) * 0.5,
        (Complex64::new(-b, 0.0) - discriminant) * 0.5,
    ];
    Ok(EigenCheck {
        stable: roots.iter().all(|r| r.re < 0.0),
        decay_rates: roots,
    })
}

/// Convenience: combined optical coefficients of a configuration at Ω.
pub fn coefficients_at(cfg: &ExperimentConfig, omega: f64) -> SpringCoefficients {
    spring::combined_for_config(cfg, omega)
}
