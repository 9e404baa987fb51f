//! Optical-cooling bookkeeping: thermal force spectrum, effective temperature,
//! occupation number, band-limited RMS displacement, and the laser
//! frequency-noise calibration conversion.

use std::io::{self, BufRead, Write};

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    BathState, CavityGeometry, MirrorMechanics, BOLTZMANN_CONSTANT, REDUCED_PLANCK_CONSTANT,
    SPEED_OF_LIGHT,
};
use crate::stability::EffectiveResonance;

/// Single-sided amplitude spectral density of displacement versus frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSeries {
    /// (frequency [Hz], ASD [m/√Hz]) pairs, frequencies strictly increasing.
    points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThermalError {
    #[error("effective damping must be positive for a temperature (got {gamma_eff} 1/s; unstable configuration)")]
    UnstableConfiguration { gamma_eff: f64 },
    #[error("band [{f_lo} Hz, {f_hi} Hz] is empty or outside the spectrum span [{span_lo} Hz, {span_hi} Hz]")]
    BandOutsideData {
        f_lo: f64,
        f_hi: f64,
        span_lo: f64,
        span_hi: f64,
    },
    #[error("total stiffness must be positive for equipartition (got {k} N/m)")]
    NonPositiveStiffness { k: f64 },
    #[error("spectrum needs at least two points")]
    TooShort,
    #[error("spectrum frequencies must be strictly increasing (violated at index {index})")]
    NotIncreasing { index: usize },
    #[error("spectral density must be non-negative (got {value} at index {index})")]
    NegativeDensity { index: usize, value: f64 },
    #[error("malformed spectrum CSV at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("spectrum CSV I/O: {0}")]
    Io(String),
}

impl SpectrumSeries {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, ThermalError> {
        if points.len() < 2 {
            return Err(ThermalError::TooShort);
        }
        for i in 1..points.len() {
            if !(points[i].0 > points[i - 1].0) {
                return Err(ThermalError::NotIncreasing { index: i });
            }
        }
        for (i, &(_, asd)) in points.iter().enumerate() {
            if !(asd >= 0.0) {
                return Err(ThermalError::NegativeDensity {
                    index: i,
                    value: asd,
                });
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn span(&self) -> (f64, f64) {
        (self.points[0].0, self.points[self.points.len() - 1].0)
    }

    /// Read a `frequency_hz,asd_m_per_rthz` CSV.
    pub fn from_csv(reader: impl BufRead) -> Result<Self, ThermalError> {
        let mut points = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| ThermalError::Io(e.to_string()))?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if i == 0 {
                if trimmed != "frequency_hz,asd_m_per_rthz" {
                    return Err(ThermalError::Csv {
                        line: 1,
                        message: format!(
                            "expected header `frequency_hz,asd_m_per_rthz`, got `{trimmed}`"
                        ),
                    });
                }
                continue;
            }
            let mut fields = trimmed.split(',');
            let parse = |s: Option<&str>, what: &str| -> Result<f64, ThermalError> {
                s.ok_or_else(|| ThermalError::Csv {
                    line: i + 1,
                    message: format!("missing {what}"),
                })?
                .trim()
                .parse::<f64>()
                .map_err(|e| ThermalError::Csv {
                    line: i + 1,
                    message: format!("bad {what}: {e}"),
                })
            };
            let f = parse(fields.next(), "frequency")?;
            let asd = parse(fields.next(), "asd")?;
            points.push((f, asd));
        }
        Self::new(points)
    }

    /// Write the `frequency_hz,asd_m_per_rthz` CSV.
    pub fn to_csv(&self, writer: &mut impl Write) -> io::Result<()> {
        writeln!(writer, "frequency_hz,asd_m_per_rthz")?;
        for (f, asd) in &self.points {
            writeln!(writer, "{f},{asd}")?;
        }
        Ok(())
    }
}

/// Summary of the cooling bookkeeping for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermalSummary {
    /// Effective mode temperature [K].
    pub t_eff_k: f64,
    /// Mean phonon occupation of the mode.
    pub occupation: f64,
    /// RMS displacement over the integration band [m].
    pub x_rms_m: f64,
    /// Integration band [Hz].
    pub band_hz: (f64, f64),
}

/// Single-sided thermal (Langevin) force power spectral density
/// S_F = 4·k_B·T·M·Γ_m [N²/Hz] driving the suspension mode.
///
/// This is the fluctuation–dissipation form for velocity damping; it is not
/// altered by the optical forces.
pub fn thermal_force_psd(bath: &BathState, mech: &MirrorMechanics, reduced_mass: f64) -> f64 {
    4.0 * BOLTZMANN_CONSTANT * bath.temperature * reduced_mass * mech.mechanical_damping()
}

/// Effective temperature from the damping ratio: T_eff = T·Γ_m/Γ_eff, equal
/// to T·(Ω_m/Ω_eff)(Q_eff/Q_m).
///
/// Requires Γ_eff > 0; an anti-damped mode has no equilibrium temperature.
pub fn t_eff_from_damping(
    temperature: f64,
    mech: &MirrorMechanics,
    resonance: &EffectiveResonance,
) -> Result<f64, ThermalError> {
    if !(resonance.gamma_eff > 0.0) {
        return Err(ThermalError::UnstableConfiguration {
            gamma_eff: resonance.gamma_eff,
        });
    }
    Ok(temperature * mech.mechanical_damping() / resonance.gamma_eff)
}

/// Mean phonon occupation N = k_B·T_eff/(ħ·Ω_eff).
pub fn occupation(t_eff: f64, omega_eff: f64) -> f64 {
    debug_assert!(omega_eff > 0.0);
    BOLTZMANN_CONSTANT * t_eff / (REDUCED_PLANCK_CONSTANT * omega_eff)
}

/// Band-limited RMS displacement √(∫ ASD² df) over [f_lo, f_hi] by the
/// trapezoidal rule, with linear interpolation at the band edges.
pub fn x_rms_band(spectrum: &SpectrumSeries, f_lo: f64, f_hi: f64) -> Result<f64, ThermalError> {
    let (span_lo, span_hi) = spectrum.span();
    if !(f_lo < f_hi) || f_lo < span_lo || f_hi > span_hi {
        return Err(ThermalError::BandOutsideData {
            f_lo,
            f_hi,
            span_lo,
            span_hi,
        });
    }
    let pts = spectrum.points();
    let psd_at = |f: f64| -> f64 {
        let j = pts.partition_point(|&(pf, _)| pf < f).clamp(1, pts.len() - 1);
        let (f0, a0) = pts[j - 1];
        let (f1, a1) = pts[j];
        let t = (f - f0) / (f1 - f0);
        let asd = a0 + t * (a1 - a0);
        asd * asd
    };

    let mut integral = 0.0;
    let mut prev_f = f_lo;
    let mut prev_psd = psd_at(f_lo);
    for &(f, asd) in pts.iter().filter(|&&(f, _)| f > f_lo && f < f_hi) {
        let psd = asd * asd;
        integral += 0.5 * (prev_psd + psd) * (f - prev_f);
        prev_f = f;
        prev_psd = psd;
    }
    let end_psd = psd_at(f_hi);
    integral += 0.5 * (prev_psd + end_psd) * (f_hi - prev_f);
    Ok(integral.sqrt())
}

/// Effective temperature from equipartition, ½·K·x_rms² = ½·k_B·T_eff.
///
/// The caller supplies the trap stiffness at the operating point (the
/// convention here is K_tot evaluated at Ω_eff, since the optical stiffness
/// is frequency dependent).
pub fn t_eff_from_rms(k_total: f64, x_rms: f64) -> Result<f64, ThermalError> {
    if !(k_total > 0.0) {
        return Err(ThermalError::NonPositiveStiffness { k: k_total });
    }
    Ok(k_total * x_rms * x_rms / BOLTZMANN_CONSTANT)
}

/// Displacement equivalent of a laser frequency excursion: a frequency shift
/// δν moves the operating point like a length change x = L·δν/ν = L·λ₀·δν/c.
/// Used to calibrate measured spectra against an injected frequency
/// modulation of known amplitude.
pub fn frequency_noise_to_displacement(geometry: &CavityGeometry, delta_nu: f64) -> f64 {
    debug_assert!(delta_nu >= 0.0);
    geometry.length * geometry.wavelength * delta_nu / SPEED_OF_LIGHT
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{preset, Preset};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn paper_mechanics() -> MirrorMechanics {
        preset(Preset::D).mirrors
    }

    #[test]
    fn thermal_force_psd_examples() {
        let mech = paper_mechanics();
        let m = crate::model::reduced_mass(&mech);

        let cold = BathState::new(0.0).unwrap();
        assert_eq!(thermal_force_psd(&cold, &mech, m), 0.0);

        // 4·k_B·293 K·0.996 g·0.338 s⁻¹
        let ambient = BathState::new(293.0).unwrap();
        assert_relative_eq!(
            thermal_force_psd(&ambient, &mech, m),
            5.443e-24,
            max_relative = 1e-3
        );

        let doubled = BathState::new(586.0).unwrap();
        assert_eq!(
            thermal_force_psd(&doubled, &mech, m),
            2.0 * thermal_force_psd(&ambient, &mech, m)
        );
    }

    #[test]
    fn t_eff_from_damping_examples() {
        let mech = paper_mechanics();
        let gm = mech.mechanical_damping();

        let identity = EffectiveResonance {
            omega_eff: mech.natural_frequency,
            gamma_eff: gm,
            q_eff: mech.quality_factor,
        };
        assert_relative_eq!(
            t_eff_from_damping(293.0, &mech, &identity).unwrap(),
            293.0,
            max_relative = 1e-12
        );

        // the coldest reported operating point: Γ_eff ≈ 124 s⁻¹ gives 0.8 K
        let cold = EffectiveResonance {
            omega_eff: std::f64::consts::TAU * 2000.0,
            gamma_eff: 124.0,
            q_eff: std::f64::consts::TAU * 2000.0 / 124.0,
        };
        assert_relative_eq!(
            t_eff_from_damping(293.0, &mech, &cold).unwrap(),
            0.7987,
            max_relative = 1e-3
        );

        let unstable = EffectiveResonance {
            omega_eff: 1.0,
            gamma_eff: -1.0,
            q_eff: -1.0,
        };
        assert!(t_eff_from_damping(293.0, &mech, &unstable).is_err());
    }

    proptest! {
        #[test]
        fn both_forms_of_the_effective_temperature_agree(
            omega_eff in 1e2f64..1e6,
            gamma_eff in 1e-3f64..1e4,
        ) {
            let mech = paper_mechanics();
            let resonance = EffectiveResonance {
                omega_eff,
                gamma_eff,
                q_eff: omega_eff / gamma_eff,
            };
            let direct = t_eff_from_damping(293.0, &mech, &resonance).unwrap();
            // T·(Ω_m/Ω_eff)·(Q_eff/Q_m)
            let via_q = 293.0 * (mech.natural_frequency / omega_eff)
                * (resonance.q_eff / mech.quality_factor);
            prop_assert!((direct - via_q).abs() <= 1e-12 * direct.abs());
        }

        #[test]
        fn occupation_is_scale_invariant(t in 1e-3f64..1e3, omega in 1.0f64..1e6, a in 1e-3f64..1e3) {
            let n1 = occupation(t, omega);
            let n2 = occupation(a * t, a * omega);
            prop_assert!((n1 - n2).abs() <= 1e-12 * n1.abs());
        }
    }

    #[test]
    fn occupation_examples() {
        assert_eq!(occupation(0.0, 1.0), 0.0);
        let n_ambient = occupation(293.0, std::f64::consts::TAU * 172.0);
        assert_relative_eq!(n_ambient, 3.5495e10, max_relative = 1e-3);

        // reduction from (293 K, 172 Hz) to (0.8 K, ~1.9 kHz band)
        for f_eff in [1500.0, 1900.0, 2300.0] {
            let n_cold = occupation(0.8, std::f64::consts::TAU * f_eff);
            let reduction = n_ambient / n_cold;
            assert!(
                (2e3..5e3).contains(&reduction),
                "f_eff = {f_eff}: reduction = {reduction}"
            );
        }
    }

    #[test]
    fn x_rms_of_flat_spectrum_is_analytic() {
        let a = 3e-15;
        let points: Vec<(f64, f64)> = (0..101).map(|i| (100.0 + 10.0 * i as f64, a)).collect();
        let spectrum = SpectrumSeries::new(points).unwrap();
        let rms = x_rms_band(&spectrum, 200.0, 900.0).unwrap();
        assert_relative_eq!(rms, a * 700f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn two_point_spectrum_is_the_exact_trapezoid() {
        let spectrum = SpectrumSeries::new(vec![(100.0, 2e-15), (300.0, 4e-15)]).unwrap();
        let expected = (0.5 * ((2e-15f64).powi(2) + (4e-15f64).powi(2)) * 200.0).sqrt();
        assert_relative_eq!(
            x_rms_band(&spectrum, 100.0, 300.0).unwrap(),
            expected,
            max_relative = 1e-12
        );
    }

    #[test]
    fn lorentzian_band_rms_matches_the_closed_form() {
        // ASD² = s0 / (1 + ((f-f0)/(w/2))²); ∫ = s0·(w/2)·[atan(2(f-f0)/w)]
        let (f0, w, s0) = (2000.0, 50.0, 1e-30);
        let step = w / 10.0;
        let points: Vec<(f64, f64)> = (0..2001)
            .map(|i| {
                let f = f0 - 1000.0 + step * i as f64;
                let z = (f - f0) / (w / 2.0);
                (f, (s0 / (1.0 + z * z)).sqrt())
            })
            .collect();
        let spectrum = SpectrumSeries::new(points).unwrap();
        let (lo, hi) = (f0 - 5.0 * w, f0 + 5.0 * w);
        let rms = x_rms_band(&spectrum, lo, hi).unwrap();
        let atan_term = |f: f64| (2.0 * (f - f0) / w).atan();
        let exact = (s0 * (w / 2.0) * (atan_term(hi) - atan_term(lo))).sqrt();
        assert_relative_eq!(rms, exact, max_relative = 0.01);
    }

    #[test]
    fn band_outside_data_is_rejected() {
        let spectrum = SpectrumSeries::new(vec![(100.0, 1.0), (200.0, 1.0)]).unwrap();
        assert!(x_rms_band(&spectrum, 50.0, 150.0).is_err());
        assert!(x_rms_band(&spectrum, 150.0, 250.0).is_err());
        assert!(x_rms_band(&spectrum, 180.0, 120.0).is_err());
    }

    proptest! {
        #[test]
        fn widening_the_band_never_decreases_the_rms(
            lo in 0.0f64..0.4,
            hi in 0.6f64..1.0,
            shrink in 0.0f64..0.09,
        ) {
            let points: Vec<(f64, f64)> = (0..101)
                .map(|i| {
                    let f = i as f64 * 10.0;
                    (f, 1e-15 * (1.0 + (f / 100.0).sin().abs()))
                })
                .collect();
            let spectrum = SpectrumSeries::new(points).unwrap();
            let (f_lo, f_hi) = (lo * 1000.0, hi * 1000.0);
            let wide = x_rms_band(&spectrum, f_lo, f_hi).unwrap();
            let narrow = x_rms_band(&spectrum, f_lo + shrink * 1000.0, f_hi - shrink * 1000.0).unwrap();
            prop_assert!(narrow <= wide * (1.0 + 1e-12));
        }
    }

    #[test]
    fn equipartition_examples() {
        assert_relative_eq!(
            t_eff_from_rms(1.58e5, 8.4e-15).unwrap(),
            0.8075,
            max_relative = 1e-3
        );
        assert_eq!(t_eff_from_rms(1.0, 0.0).unwrap(), 0.0);
        let t1 = t_eff_from_rms(1.58e5, 2e-15).unwrap();
        let t4 = t_eff_from_rms(1.58e5, 8e-15).unwrap();
        assert_relative_eq!(t4 / t1, 16.0, max_relative = 1e-12);
        assert!(t_eff_from_rms(0.0, 1e-15).is_err());
        assert!(t_eff_from_rms(-1.0, 1e-15).is_err());
    }

    #[test]
    fn frequency_noise_calibration_examples() {
        let geom = preset(Preset::D).cavity;
        assert_relative_eq!(
            frequency_noise_to_displacement(&geom, 1.0),
            3.1942e-15,
            max_relative = 1e-4
        );
        assert_eq!(frequency_noise_to_displacement(&geom, 0.0), 0.0);
        assert_eq!(
            frequency_noise_to_displacement(&geom, 2.0),
            2.0 * frequency_noise_to_displacement(&geom, 1.0)
        );
    }

    #[test]
    fn spectrum_csv_round_trip_and_validation() {
        let spectrum =
            SpectrumSeries::new(vec![(10.0, 1e-15), (20.0, 2e-15), (30.0, 0.5e-15)]).unwrap();
        let mut buf = Vec::new();
        spectrum.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("frequency_hz,asd_m_per_rthz\n"));
        let back = SpectrumSeries::from_csv(&buf[..]).unwrap();
        assert_eq!(back, spectrum);

        assert!(SpectrumSeries::new(vec![(10.0, 1.0)]).is_err());
        assert!(SpectrumSeries::new(vec![(10.0, 1.0), (10.0, 1.0)]).is_err());
        assert!(SpectrumSeries::new(vec![(10.0, 1.0), (5.0, 1.0)]).is_err());
        assert!(SpectrumSeries::new(vec![(10.0, 1.0), (20.0, -1.0)]).is_err());
        assert!(SpectrumSeries::from_csv(&b"wrong,header\n1,2\n"[..]).is_err());
        assert!(SpectrumSeries::from_csv(
            &b"frequency_hz,asd_m_per_rthz\n1,notanumber\n2,1\n"[..]
        )
        .is_err());
    }
}
