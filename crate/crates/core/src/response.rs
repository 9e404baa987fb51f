//! Displacement-per-force transfer function of the trapped mirror, swept-data
//! resonance extraction, and the equivalent Young's modulus figure of merit.

use std::io::{self, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::config::ExperimentConfig;
use crate::spring;
use crate::stability::EffectiveResonance;

/// One sample of the mechanical susceptibility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferPoint {
    /// Angular frequency Ω [rad/s].
    pub frequency: f64,
    /// |H(Ω)| [m/N].
    pub magnitude: f64,
    /// Principal-valued phase in (−π, π] [rad].
    pub phase: f64,
}

/// An ordered frequency sweep of [`TransferPoint`] plus the fingerprint of
/// the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct BodeData {
    pub points: Vec<TransferPoint>,
    pub fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResponseError {
    #[error("sweep range is inverted or empty: f_min {f_min} Hz, f_max {f_max} Hz")]
    InvertedRange { f_min: f64, f_max: f64 },
    #[error("no interior magnitude maximum in the swept data")]
    NoPeak,
    #[error("{name} must be positive (got {value})")]
    NonPositive { name: &'static str, value: f64 },
}

/// Mechanical susceptibility H(Ω) = x/F of the trapped mirror [m/N]:
///
/// ```text
/// H(Ω) = 1 / ( M[Ω_m² − Ω² + K_tot(Ω)/M] + iΩM[Γ_m − Γ_tot(Ω)] )
/// ```
///
/// A marginal configuration can make the denominator vanish exactly; the
/// returned point then carries an infinite magnitude rather than an error.
pub fn susceptibility(cfg: &ExperimentConfig, omega: f64) -> Complex64 {
    let coeffs = spring::combined_for_config(cfg, omega);
    let m = cfg.reduced_mass();
    let omega_m = cfg.mirrors.natural_frequency;
    let denom = Complex64::new(
        m * (omega_m * omega_m - omega * omega) + coeffs.stiffness,
        omega * m * (cfg.mirrors.mechanical_damping() - coeffs.damping),
    );
    if denom.norm_sqr() == 0.0 {
        return Complex64::new(f64::INFINITY, 0.0);
    }
    denom.inv()
}

fn principal_phase(phase: f64) -> f64 {
    // atan2 yields [−π, π]; fold −π onto +π so phases live in (−π, π].
    if phase <= -std::f64::consts::PI {
        phase + std::f64::consts::TAU
    } else {
        phase
    }
}

/// Logarithmically spaced sweep of [`susceptibility`] between `f_min_hz` and
/// `f_max_hz`.
pub fn bode_sweep(
    cfg: &ExperimentConfig,
    f_min_hz: f64,
    f_max_hz: f64,
    points_per_decade: usize,
) -> Result<BodeData, ResponseError> {
    if !(f_min_hz > 0.0 && f_min_hz < f_max_hz) {
        return Err(ResponseError::InvertedRange {
            f_min: f_min_hz,
            f_max: f_max_hz,
        });
    }
    let decades = (f_max_hz / f_min_hz).log10();
    let n = ((decades * points_per_decade.max(1) as f64).ceil() as usize + 1).max(2);
    let points = (0..n)
        .map(|i| {
            let t = i as f64 / (n - 1) as f64;
            let f = f_min_hz * (f_max_hz / f_min_hz).powf(t);
            let omega = std::f64::consts::TAU * f;
            let h = susceptibility(cfg, omega);
            TransferPoint {
                frequency: omega,
                magnitude: h.norm(),
                phase: principal_phase(h.arg()),
            }
        })
        .collect();
    Ok(BodeData {
        points,
        fingerprint: cfg.fingerprint(),
    })
}

/// Unwrap principal phases along the sweep by nearest-multiple continuation.
pub fn unwrapped_phases(points: &[TransferPoint]) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len());
    let mut previous = 0.0;
    for (i, p) in points.iter().enumerate() {
        let unwrapped = if i == 0 {
            p.phase
        } else {
            p.phase + std::f64::consts::TAU * ((previous - p.phase) / std::f64::consts::TAU).round()
        };
        out.push(unwrapped);
        previous = unwrapped;
    }
    out
}

impl BodeData {
    /// Serialize as CSV with columns
    /// `frequency_hz,magnitude_m_per_n,phase_deg,phase_unwrapped_deg`.
    pub fn to_csv(&self, writer: &mut impl Write) -> io::Result<()> {
        writeln!(
            writer,
            "frequency_hz,magnitude_m_per_n,phase_deg,phase_unwrapped_deg"
        )?;
        let unwrapped = unwrapped_phases(&self.points);
        for (p, u) in self.points.iter().zip(unwrapped) {
            writeln!(
                writer,
                "{},{},{},{}",
                p.frequency / std::f64::consts::TAU,
                p.magnitude,
                p.phase.to_degrees(),
                u.to_degrees()
            )?;
        }
        Ok(())
    }

    /// Reconstruct the complex response at each point.
    pub fn complex_points(&self) -> Vec<(f64, Complex64)> {
        self.points
            .iter()
            .map(|p| (p.frequency, Complex64::from_polar(p.magnitude, p.phase)))
            .collect()
    }
}

/// How [`extract_resonance`] measured the linewidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractionMethod {
    /// Half-power (−3 dB) width about the interpolated peak.
    HalfPower,
    /// Rational least-squares fit of the complex response; used when the
    /// resonance is too broad for the half-power width to be meaningful
    /// (Γ_eff ≳ Ω_eff/2) or when a half-power point falls outside the sweep.
    ComplexFit,
}

/// Resonance parameters extracted from swept data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonanceExtraction {
    pub resonance: EffectiveResonance,
    pub method: ExtractionMethod,
    /// The half-power width was narrower than one frequency bin; the reported
    /// Γ_eff is the bin width (an upper bound) and Q_eff a lower bound.
    pub q_lower_bound: bool,
}

/// Locate the resonance in a magnitude sweep: peak position by parabolic
/// interpolation, linewidth from the half-power width, falling back to a
/// complex rational fit for heavily damped springs.
pub fn extract_resonance(data: &BodeData) -> Result<ResonanceExtraction, ResponseError> {
    let pts = &data.points;
    if pts.len() < 3 {
        return Err(ResponseError::NoPeak);
    }
    let mut i_max = 0;
    let mut m_max = f64::NEG_INFINITY;
    for (i, p) in pts.iter().enumerate() {
        if p.magnitude > m_max {
            m_max = p.magnitude;
            i_max = i;
        }
    }
    if i_max == 0 || i_max == pts.len() - 1 || !m_max.is_finite() {
        return Err(ResponseError::NoPeak);
    }

    // parabolic vertex through (ω, ln|H|) at the three points around the peak
    let (x0, x1, x2) = (
        pts[i_max - 1].frequency,
        pts[i_max].frequency,
        pts[i_max + 1].frequency,
    );
    let (y0, y1, y2) = (
        pts[i_max - 1].magnitude.ln(),
        pts[i_max].magnitude.ln(),
        pts[i_max + 1].magnitude.ln(),
    );
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
    let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
    let omega_peak = if a < 0.0 { -b / (2.0 * a) } else { x1 };
    let peak_mag = m_max;

    // half-power crossings on both sides of the peak
    let target = peak_mag / std::f64::consts::SQRT_2;
    let cross = |from: usize, step: isize| -> Option<f64> {
        let mut i = from as isize;
        loop {
            let j = i + step;
            if j < 0 || j as usize >= pts.len() {
                return None;
            }
            let (inner, outer) = (&pts[i as usize], &pts[j as usize]);
            if outer.magnitude < target {
                let t = (inner.magnitude - target) / (inner.magnitude - outer.magnitude);
                return Some(inner.frequency + t * (outer.frequency - inner.frequency));
            }
            i = j;
        }
    };
    let lower = cross(i_max, -1);
    let upper = cross(i_max, 1);

    let bin = pts[i_max + 1].frequency - pts[i_max].frequency;
    if let (Some(lo), Some(hi)) = (lower, upper) {
        let width = hi - lo;
        if width < bin {
            // unresolved linewidth: report the bin as an upper bound on Γ
            return Ok(ResonanceExtraction {
                resonance: EffectiveResonance {
                    omega_eff: omega_peak,
                    gamma_eff: bin,
                    q_eff: omega_peak / bin,
                },
                method: ExtractionMethod::HalfPower,
                q_lower_bound: true,
            });
        }
        if width < omega_peak / 2.0 {
            return Ok(ResonanceExtraction {
                resonance: EffectiveResonance {
                    omega_eff: omega_peak,
                    gamma_eff: width,
                    q_eff: omega_peak / width,
                },
                method: ExtractionMethod::HalfPower,
                q_lower_bound: false,
            });
        }
    }

    complex_fit(data, omega_peak, peak_mag)
}

/// Least-squares fit of 1/H(Ω) = A + BΩ² + iCΩ over the resonance
/// neighborhood; then Ω₀ = √(−A/B), Γ = −C/B, M = −B.
fn complex_fit(
    data: &BodeData,
    omega_peak: f64,
    peak_mag: f64,
) -> Result<ResonanceExtraction, ResponseError> {
    let band: Vec<(f64, Complex64)> = data
        .complex_points()
        .into_iter()
        .filter(|(omega, h)| {
            *omega >= omega_peak / 4.0 && *omega <= omega_peak * 4.0 && h.norm() >= peak_mag / 10.0
        })
        .collect();
    if band.len() < 4 {
        return Err(ResponseError::NoPeak);
    }

    // real part: A + BΩ²; imaginary part: CΩ (normal equations)
    let (mut s00, mut s01, mut s11, mut r0, mut r1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut sww, mut rw) = (0.0, 0.0);
    for (omega, h) in &band {
        let d = h.inv();
        let w2 = omega * omega;
        s00 += 1.0;
        s01 += w2;
        s11 += w2 * w2;
        r0 += d.re;
        r1 += d.re * w2;
        sww += w2;
        rw += d.im * omega;
    }
    let det = s00 * s11 - s01 * s01;
    if det == 0.0 || sww == 0.0 {
        return Err(ResponseError::NoPeak);
    }
    let a = (r0 * s11 - r1 * s01) / det;
    let b = (s00 * r1 - s01 * r0) / det;
    let c = rw / sww;
    if !(b < 0.0 && a > 0.0) {
        return Err(ResponseError::NoPeak);
    }
    let omega_eff = (-a / b).sqrt();
    let gamma_eff = -c / b;
    Ok(ResonanceExtraction {
        resonance: EffectiveResonance {
            omega_eff,
            gamma_eff,
            q_eff: omega_eff / gamma_eff,
        },
        method: ExtractionMethod::ComplexFit,
        q_lower_bound: false,
    })
}

/// Stiffness of a solid beam spanning the cavity that would match the optical
/// spring: E = K·L/A [Pa].
pub fn equivalent_youngs_modulus(
    k: f64,
    length: f64,
    spot_area: f64,
) -> Result<f64, ResponseError> {
    for (name, value) in [("k", k), ("length", length), ("spot_area", spot_area)] {
        if !(value.is_finite() && value > 0.0) {
            return Err(ResponseError::NonPositive { name, value });
        }
    }
    Ok(k * length / spot_area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{preset, Preset};
    use crate::stability;
    use approx::assert_relative_eq;

    #[test]
    fn dc_limit_without_fields_is_the_suspension_compliance() {
        let cfg = preset(Preset::D).without_optical_power();
        let omega = 1e-3 * cfg.mirrors.natural_frequency;
        let h = susceptibility(&cfg, omega);
        let compliance = 1.0 / (cfg.reduced_mass() * cfg.mirrors.natural_frequency.powi(2));
        assert_relative_eq!(h.re, compliance, max_relative = 1e-5);
    }

    #[test]
    fn mass_line_asymptote_is_configuration_independent() {
        for p in [Preset::A, Preset::D] {
            let cfg = preset(p);
            let omega = 100.0 * cfg.derived_cavity().linewidth_hwhm;
            let h = susceptibility(&cfg, omega).norm();
            let mass_line = 1.0 / (cfg.reduced_mass() * omega * omega);
            assert_relative_eq!(h, mass_line, max_relative = 0.01);
        }
    }

    #[test]
    fn stable_point_phase_falls_through_resonance_unstable_rises() {
        // (d): stable damping pulls the phase down by ~180 degrees; (c): the
        // anti-damped spring pushes it up instead.
        for (p, expected_sign) in [(Preset::D, -1.0), (Preset::C, 1.0)] {
            let cfg = preset(p);
            let omega_eff = stability::find_omega_eff(&cfg)
                .unwrap()
                .resonance
                .omega_eff;
            let f_eff = omega_eff / std::f64::consts::TAU;
            let data = bode_sweep(&cfg, f_eff / 3.0, f_eff * 3.0, 400).unwrap();
            let unwrapped = unwrapped_phases(&data.points);
            let jump = unwrapped.last().unwrap() - unwrapped.first().unwrap();
            assert!(
                jump.signum() == expected_sign,
                "preset {p}: phase change {} deg",
                jump.to_degrees()
            );
            assert_relative_eq!(jump.abs(), std::f64::consts::PI, max_relative = 0.1);
        }
    }

    #[test]
    fn stable_point_phase_is_monotone_through_the_resonance_band() {
        let cfg = preset(Preset::D);
        let omega_eff = stability::find_omega_eff(&cfg)
            .unwrap()
            .resonance
            .omega_eff;
        let f_eff = omega_eff / std::f64::consts::TAU;
        let data = bode_sweep(&cfg, f_eff / 2.0, f_eff * 2.0, 300).unwrap();
        let unwrapped = unwrapped_phases(&data.points);
        for pair in unwrapped.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "phase must not increase");
        }
    }

    #[test]
    fn sweep_of_mechanical_only_config_recovers_the_suspension_mode() {
        let cfg = preset(Preset::D).without_optical_power();
        // Q_m = 3200 needs a narrow, dense window around 172 Hz
        let data = bode_sweep(&cfg, 171.0, 173.0, 200_000).unwrap();
        let extraction = extract_resonance(&data).unwrap();
        let f0 = extraction.resonance.omega_eff / std::f64::consts::TAU;
        assert_relative_eq!(f0, 172.0, max_relative = 1e-3);
        assert_relative_eq!(extraction.resonance.q_eff, 3200.0, max_relative = 0.02);
    }

    #[test]
    fn sweep_of_the_stiff_single_field_point_peaks_near_5_khz() {
        let data = bode_sweep(&preset(Preset::A), 1000.0, 20_000.0, 600).unwrap();
        let extraction = extract_resonance(&data).unwrap();
        let f_peak = extraction.resonance.omega_eff / std::f64::consts::TAU;
        assert!((4500.0..5600.0).contains(&f_peak), "peak at {f_peak} Hz");
    }

    #[test]
    fn refining_the_sweep_moves_the_peak_less_than_one_original_bin() {
        let cfg = preset(Preset::D);
        let coarse = bode_sweep(&cfg, 500.0, 5000.0, 50).unwrap();
        let fine = bode_sweep(&cfg, 500.0, 5000.0, 100).unwrap();
        let p_coarse = extract_resonance(&coarse).unwrap().resonance.omega_eff;
        let p_fine = extract_resonance(&fine).unwrap().resonance.omega_eff;
        let i = coarse
            .points
            .iter()
            .position(|p| p.frequency > p_coarse)
            .unwrap();
        let bin = coarse.points[i].frequency - coarse.points[i - 1].frequency;
        assert!((p_fine - p_coarse).abs() <= bin);
    }

    #[test]
    fn sweep_rejects_inverted_ranges() {
        let cfg = preset(Preset::D);
        assert!(bode_sweep(&cfg, 100.0, 10.0, 10).is_err());
        assert!(bode_sweep(&cfg, 0.0, 10.0, 10).is_err());
        assert!(bode_sweep(&cfg, -5.0, 10.0, 10).is_err());
    }

    fn synthetic_oscillator_sweep(
        omega0: f64,
        q: f64,
        mass: f64,
        f_lo: f64,
        f_hi: f64,
        ppd: usize,
    ) -> BodeData {
        let gamma = omega0 / q;
        let decades = (f_hi / f_lo).log10();
        let n = (decades * ppd as f64).ceil() as usize + 1;
        let points = (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                let f = f_lo * (f_hi / f_lo).powf(t);
                let omega = std::f64::consts::TAU * f;
                let denom = Complex64::new(
                    mass * (omega0 * omega0 - omega * omega),
                    mass * gamma * omega,
                );
                let h = denom.inv();
                TransferPoint {
                    frequency: omega,
                    magnitude: h.norm(),
                    phase: h.arg(),
                }
            })
            .collect();
        BodeData {
            points,
            fingerprint: "synthetic".into(),
        }
    }

    #[test]
    fn extraction_recovers_a_known_oscillator() {
        let omega0 = std::f64::consts::TAU * 750.0;
        let data = synthetic_oscillator_sweep(omega0, 10.0, 1e-3, 200.0, 3000.0, 2000);
        let extraction = extract_resonance(&data).unwrap();
        assert_relative_eq!(extraction.resonance.omega_eff, omega0, max_relative = 5e-3);
        assert_relative_eq!(extraction.resonance.q_eff, 10.0, max_relative = 0.02);
        assert!(!extraction.q_lower_bound);
    }

    #[test]
    fn heavily_damped_resonance_uses_the_complex_fit() {
        let omega0 = std::f64::consts::TAU * 750.0;
        let data = synthetic_oscillator_sweep(omega0, 1.2, 1e-3, 50.0, 10_000.0, 500);
        let extraction = extract_resonance(&data).unwrap();
        assert_eq!(extraction.method, ExtractionMethod::ComplexFit);
        assert_relative_eq!(extraction.resonance.omega_eff, omega0, max_relative = 0.02);
        assert_relative_eq!(extraction.resonance.q_eff, 1.2, max_relative = 0.05);
    }

    #[test]
    fn unresolved_width_sets_the_lower_bound_flag() {
        let omega0 = std::f64::consts::TAU * 750.0;
        // Q = 1e6 against ~1% bins: width far below one bin
        let data = synthetic_oscillator_sweep(omega0, 1e6, 1e-3, 600.0, 900.0, 300);
        let extraction = extract_resonance(&data).unwrap();
        assert!(extraction.q_lower_bound);
        assert!(extraction.resonance.q_eff < 1e6);
    }

    #[test]
    fn monotonic_data_has_no_peak() {
        let cfg = preset(Preset::D).without_optical_power();
        let data = bode_sweep(&cfg, 20_000.0, 30_000.0, 50).unwrap();
        assert!(matches!(
            extract_resonance(&data),
            Err(ResponseError::NoPeak)
        ));
    }

    #[test]
    fn extraction_agrees_with_the_analytic_resonance_solve() {
        let cfg = preset(Preset::D);
        let solved = stability::find_omega_eff(&cfg).unwrap().resonance;
        assert!(solved.q_eff > 5.0);
        let f_eff = solved.omega_eff / std::f64::consts::TAU;
        let ppd = 600;
        let data = bode_sweep(&cfg, f_eff / 3.0, f_eff * 3.0, ppd).unwrap();
        let extraction = extract_resonance(&data).unwrap();
        // within half a frequency bin
        let bin_ratio = 10f64.powf(1.0 / ppd as f64);
        let half_bin = solved.omega_eff * (bin_ratio - 1.0) / 2.0;
        assert!((extraction.resonance.omega_eff - solved.omega_eff).abs() <= half_bin);
        // linewidth within 10% of the frequency-domain prediction
        assert!(extraction.resonance.gamma_eff > 0.0);
        assert_relative_eq!(
            extraction.resonance.gamma_eff,
            solved.gamma_eff,
            max_relative = 0.10
        );
    }

    #[test]
    fn youngs_modulus_examples() {
        assert_eq!(
            equivalent_youngs_modulus(2e6, 0.9, 1.5e-6).unwrap(),
            1.2e12
        );
        assert_eq!(equivalent_youngs_modulus(1.0, 1.0, 1.0).unwrap(), 1.0);
        let e1 = equivalent_youngs_modulus(2e6, 0.9, 1.5e-6).unwrap();
        let e2 = equivalent_youngs_modulus(2e6, 0.9, 3.0e-6).unwrap();
        assert_eq!(e1, 2.0 * e2);
        assert!(equivalent_youngs_modulus(0.0, 1.0, 1.0).is_err());
        assert!(equivalent_youngs_modulus(1.0, -1.0, 1.0).is_err());
        assert!(equivalent_youngs_modulus(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn phases_are_principal_valued() {
        let data = bode_sweep(&preset(Preset::C), 100.0, 30_000.0, 100).unwrap();
        for p in &data.points {
            assert!(p.phase > -std::f64::consts::PI && p.phase <= std::f64::consts::PI);
        }
    }

    #[test]
    fn csv_has_the_specified_columns() {
        let data = bode_sweep(&preset(Preset::D), 100.0, 1000.0, 20).unwrap();
        let mut buf = Vec::new();
        data.to_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("frequency_hz,magnitude_m_per_n,phase_deg,phase_unwrapped_deg\n"));
        assert_eq!(text.lines().count(), data.points.len() + 1);
    }
}
