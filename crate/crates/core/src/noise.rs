//! Phase accrued under a sinusoidal field tone across a decoupling sequence.
//!
//! The tone perturbs the z-field as `dBz(t) = A sin(w t + phi)` with
//! `A = sqrt(2) * rms`, producing an instantaneous frequency shift
//! `gamma * (2 bz dBz + dBz^2)` that is integrated with the toggling sign of
//! the sequence:
//!
//! ```text
//! Phi = 2 pi * Integral_0^T  y(t) * gamma * (2 bz A sin(wt+phi) + A^2 sin^2(wt+phi)) dt
//! ```
//!
//! Two routes are provided. [`accrued_phase_closed_form`] integrates each
//! constant-sign segment analytically and is the production path (grids of
//! thousands of tone phases are evaluated inside sweeps).
//! [`accrued_phase_quadrature`] integrates the raw
//! [`physics::instantaneous_shift`] integrand with adaptive Simpson
//! quadrature and serves as the in-crate cross-check.
//!
//! Accuracy note: the closed form evaluates `(cos a - cos b) / w` per segment,
//! which is exact for `freq = 0` (dedicated branch) and good to well below
//! 1e-8 rad for |freq| >= 1e-3 Hz; sub-millihertz tones are outside the
//! modeled regime.

use std::f64::consts::{SQRT_2, TAU};

use crate::error::{Error, Result};
use crate::physics::{self, Species};
use crate::sequence::DecouplingSequence;

/// A monochromatic field tone on the z-axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseTone {
    /// RMS amplitude (Tesla).
    pub rms: f64,
    /// Tone frequency (Hz).
    pub freq: f64,
    /// Tone phase at sequence start (radians).
    pub phase: f64,
}

impl NoiseTone {
    pub fn new(rms: f64, freq: f64, phase: f64) -> Result<Self> {
        if !(rms >= 0.0) || !rms.is_finite() || !freq.is_finite() || !phase.is_finite() {
            return Err(Error::domain(format!(
                "noise tone: rms must be >= 0 and all fields finite (rms={rms}, freq={freq}, phase={phase})"
            )));
        }
        Ok(NoiseTone { rms, freq, phase })
    }

    /// Peak amplitude `A = sqrt(2) * rms` (Tesla).
    pub fn amplitude(&self) -> f64 {
        SQRT_2 * self.rms
    }

    /// Same tone with a different start phase.
    pub fn with_phase(&self, phase: f64) -> Self {
        NoiseTone { phase, ..*self }
    }
}

/// One sensing channel: a sequence applied to a species at a given z-bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub sequence: DecouplingSequence,
    pub species: Species,
    /// Static z-field component (Tesla).
    pub bz_tesla: f64,
}

/// Accrued phase evaluated on a uniform grid of tone start phases.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    /// Grid spacing in degrees.
    pub resolution_deg: f64,
    /// Tone phases phi_j (radians), uniformly covering [0, 2 pi).
    pub phases: Vec<f64>,
    /// Accrued phase at each phi_j (radians).
    pub values: Vec<f64>,
}

impl PhaseGrid {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn mean_abs(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().map(|v| v.abs()).sum::<f64>() / self.values.len() as f64
    }

    pub fn mean_of(&self, f: impl Fn(f64) -> f64) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().map(|&v| f(v)).sum::<f64>() / self.values.len() as f64
    }
}

/// Per-frequency phase-correlation statistics between two channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationPoint {
    pub freq: f64,
    /// Grid mean of |Phi_S| (spectator channel).
    pub mean_abs_phi_s: f64,
    /// Grid mean of |Phi_D| (data channel).
    pub mean_abs_phi_d: f64,
    /// Grid mean of Phi_D / Phi_S over points where Phi_S is resolvable;
    /// NaN when every point was excluded.
    pub mean_ratio: f64,
    /// Grid points skipped because |Phi_S| <= the exclusion threshold.
    pub excluded: usize,
}

/// |Phi_S| at or below this value is treated as an unresolvable zero when
/// forming phase ratios.
pub const RATIO_EXCLUSION_THRESHOLD: f64 = 1e-12;

/// Closed-form accrued phase (radians): exact antiderivative of the sin and
/// sin^2 terms on each constant-sign segment.
pub fn accrued_phase_closed_form(
    seq: &DecouplingSequence,
    species: &Species,
    bz: f64,
    tone: &NoiseTone,
) -> f64 {
    let amplitude = tone.amplitude();
    if amplitude == 0.0 {
        return 0.0;
    }
    let omega = TAU * tone.freq;
    let phi = tone.phase;
    let gamma = species.zeeman_hz_per_t2;
    let linear = 2.0 * bz * amplitude;
    let quadratic = amplitude * amplitude;

    let mut integral = 0.0;
    for segment in seq.segments() {
        integral +=
            segment.sign * segment_integral(omega, phi, linear, quadratic, segment.start, segment.end);
    }
    TAU * gamma * integral
}

/// Integral of `linear * sin(w t + phi) + quadratic * sin^2(w t + phi)` over
/// `[t0, t1]`.
fn segment_integral(omega: f64, phi: f64, linear: f64, quadratic: f64, t0: f64, t1: f64) -> f64 {
    if omega == 0.0 {
        let s = phi.sin();
        return (linear * s + quadratic * s * s) * (t1 - t0);
    }
    let theta0 = omega * t0 + phi;
    let theta1 = omega * t1 + phi;
    let int_sin = (theta0.cos() - theta1.cos()) / omega;
    let int_sin2 = 0.5 * (t1 - t0) - ((2.0 * theta1).sin() - (2.0 * theta0).sin()) / (4.0 * omega);
    linear * int_sin + quadratic * int_sin2
}

/// Accrued phase (radians) by adaptive Simpson quadrature of the raw
/// instantaneous-shift integrand, to 1e-9 rad absolute.
pub fn accrued_phase_quadrature(
    seq: &DecouplingSequence,
    species: &Species,
    bz: f64,
    tone: &NoiseTone,
) -> Result<f64> {
    const TOLERANCE_RAD: f64 = 1e-9;

    let amplitude = tone.amplitude();
    if amplitude == 0.0 {
        return Ok(0.0);
    }
    let omega = TAU * tone.freq;
    let phi = tone.phase;

    let segments = seq.segments();
    // Tolerance budget in integral units (the 2 pi factor is applied last).
    let per_segment = TOLERANCE_RAD / TAU / segments.len() as f64;

    let mut integral = 0.0;
    for segment in &segments {
        let f = |t: f64| {
            physics::instantaneous_shift(species, bz, amplitude * (omega * t + phi).sin())
        };
        let part = adaptive_simpson(&f, segment.start, segment.end, per_segment).map_err(|e| {
            Error::numeric(format!(
                "phase quadrature failed on segment [{}, {}] (freq = {} Hz): {e}",
                segment.start, segment.end, tone.freq
            ))
        })?;
        integral += segment.sign * part;
    }
    Ok(TAU * integral)
}

/// Adaptive Simpson integration with absolute tolerance `eps`.
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> Result<f64> {
    const MAX_DEPTH: u32 = 48;

    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }

    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let refined = left + right;
        let error = (refined - whole) / 15.0;
        if error.abs() <= eps || (b - a) < 1e-15 {
            return Ok(refined + error);
        }
        if depth == 0 {
            return Err(Error::numeric(format!(
                "adaptive Simpson hit depth limit of {MAX_DEPTH} on [{a}, {b}] (error estimate {error:.3e})"
            )));
        }
        let half = 0.5 * eps;
        Ok(recurse(f, a, m, fa, flm, fm, left, half, depth - 1)?
            + recurse(f, m, b, fm, frm, fb, right, half, depth - 1)?)
    }

    if a == b {
        return Ok(0.0);
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, eps, MAX_DEPTH)
}

/// Evaluate the closed-form phase on a uniform phi grid covering [0°, 360°).
pub fn phase_grid(
    seq: &DecouplingSequence,
    species: &Species,
    bz: f64,
    tone_template: &NoiseTone,
    resolution_deg: f64,
) -> Result<PhaseGrid> {
    if !(resolution_deg > 0.0) {
        return Err(Error::domain(format!(
            "phase_grid: resolution must be positive, got {resolution_deg}"
        )));
    }
    let count = 360.0 / resolution_deg;
    let n = count.round();
    if (count - n).abs() > 1e-9 || n < 1.0 {
        return Err(Error::domain(format!(
            "phase_grid: resolution {resolution_deg}° must divide 360°"
        )));
    }
    let n = n as usize;
    let step = resolution_deg.to_radians();
    let mut phases = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for j in 0..n {
        let phi = j as f64 * step;
        phases.push(phi);
        values.push(accrued_phase_closed_form(seq, species, bz, &tone_template.with_phase(phi)));
    }
    Ok(PhaseGrid { resolution_deg, phases, values })
}

/// Grid-averaged phase statistics for a list of tone frequencies: mean |Phi_S|,
/// mean |Phi_D|, and the mean data/spectator phase ratio per frequency.
pub fn phase_correlation_spectrum(
    freqs: &[f64],
    data: &ChannelConfig,
    spectator: &ChannelConfig,
    rms_tesla: f64,
    resolution_deg: f64,
) -> Result<Vec<CorrelationPoint>> {
    if !(rms_tesla > 0.0) {
        return Err(Error::domain(
            "phase_correlation_spectrum: rms must be positive (the phase ratio is undefined for a silent tone)",
        ));
    }
    freqs
        .iter()
        .map(|&freq| {
            let tone = NoiseTone::new(rms_tesla, freq, 0.0)?;
            let grid_s = phase_grid(
                &spectator.sequence,
                &spectator.species,
                spectator.bz_tesla,
                &tone,
                resolution_deg,
            )?;
            let grid_d =
                phase_grid(&data.sequence, &data.species, data.bz_tesla, &tone, resolution_deg)?;
            let mut ratio_sum = 0.0;
            let mut included = 0usize;
            for (&phi_s, &phi_d) in grid_s.values.iter().zip(&grid_d.values) {
                if phi_s.abs() > RATIO_EXCLUSION_THRESHOLD {
                    ratio_sum += phi_d / phi_s;
                    included += 1;
                }
            }
            let mean_ratio =
                if included > 0 { ratio_sum / included as f64 } else { f64::NAN };
            Ok(CorrelationPoint {
                freq,
                mean_abs_phi_s: grid_s.mean_abs(),
                mean_abs_phi_d: grid_d.mean_abs(),
                mean_ratio,
                excluded: grid_s.len() - included,
            })
        })
        .collect()
}

/// Convenience: worst tone phase over the grid, i.e. `max_j |Phi(phi_j)|`.
pub fn worst_case_phase(
    seq: &DecouplingSequence,
    species: &Species,
    bz: f64,
    tone_template: &NoiseTone,
    resolution_deg: f64,
) -> Result<f64> {
    Ok(phase_grid(seq, species, bz, tone_template, resolution_deg)?.max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::milligauss_to_tesla;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn cs_channel() -> (DecouplingSequence, Species, f64) {
        let seq = DecouplingSequence::block_sequence(6, 6.906e-3).unwrap();
        (seq, Species::cesium(), milligauss_to_tesla(357.0))
    }

    #[test]
    fn zero_amplitude_gives_zero_phase() {
        let (seq, cs, bz) = cs_channel();
        let tone = NoiseTone::new(0.0, 36.2, 1.0).unwrap();
        assert_eq!(accrued_phase_closed_form(&seq, &cs, bz, &tone), 0.0);
        assert_eq!(accrued_phase_quadrature(&seq, &cs, bz, &tone).unwrap(), 0.0);
    }

    #[test]
    fn static_offset_cancels_under_balanced_toggling() {
        // freq -> 0 with phase pi/2 is a constant field offset.
        let (seq, cs, bz) = cs_channel();
        let tone = NoiseTone::new(milligauss_to_tesla(10.7), 0.0, PI / 2.0).unwrap();
        assert!(accrued_phase_closed_form(&seq, &cs, bz, &tone).abs() <= 1e-12);
        assert!(accrued_phase_quadrature(&seq, &cs, bz, &tone).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn constant_tone_single_segment_integral() {
        // omega = 0, phase pi/2: sin = 1 so a lone segment of length T
        // integrates to exactly (2 bz A + A^2) T, i.e. a phase of
        // 2 pi gamma (2 bz A + A^2) T.
        let cs = Species::cesium();
        let bz = milligauss_to_tesla(357.0);
        let tone = NoiseTone::new(milligauss_to_tesla(5.0), 0.0, PI / 2.0).unwrap();
        let a = tone.amplitude();
        let t_segment = 0.25;
        let value = segment_integral(0.0, PI / 2.0, 2.0 * bz * a, a * a, 0.0, t_segment);
        assert_abs_diff_eq!(
            TAU * cs.zeeman_hz_per_t2 * value,
            TAU * cs.zeeman_hz_per_t2 * (2.0 * bz * a + a * a) * t_segment,
            epsilon = 1e-12
        );
        // The balanced one-block sequence cancels the same constant exactly.
        let seq = DecouplingSequence::block_sequence(1, t_segment).unwrap();
        assert_eq!(accrued_phase_closed_form(&seq, &cs, bz, &tone), 0.0);
    }

    #[test]
    fn resonant_worst_case_phase_matches_expected_scale() {
        let (seq, cs, bz) = cs_channel();
        let f_ac = seq.resonant_frequency();
        let tone = NoiseTone::new(milligauss_to_tesla(10.7), f_ac, 0.0).unwrap();
        let grid = phase_grid(&seq, &cs, bz, &tone, 0.1).unwrap();
        assert_eq!(grid.len(), 3600);
        // 8 gamma bz A T is the resonant overlap of the square wave with the tone.
        assert_abs_diff_eq!(grid.max_abs(), 1.531, epsilon = 0.002);
    }

    #[test]
    fn closed_form_agrees_with_quadrature_on_spec_cases() {
        let (seq, cs, bz) = cs_channel();
        let f_ac = seq.resonant_frequency();
        for tone in [
            NoiseTone::new(milligauss_to_tesla(10.7), f_ac, PI / 2.0).unwrap(),
            NoiseTone::new(milligauss_to_tesla(3.0), 20.0, 1.2).unwrap(),
            NoiseTone::new(milligauss_to_tesla(25.0), 108.6, 4.0).unwrap(),
        ] {
            let closed = accrued_phase_closed_form(&seq, &cs, bz, &tone);
            let quad = accrued_phase_quadrature(&seq, &cs, bz, &tone).unwrap();
            assert_abs_diff_eq!(closed, quad, epsilon = 1e-8);
        }
    }

    #[test]
    fn grid_resolution_validation() {
        let (seq, cs, bz) = cs_channel();
        let tone = NoiseTone::new(milligauss_to_tesla(1.0), 36.2, 0.0).unwrap();
        assert_eq!(phase_grid(&seq, &cs, bz, &tone, 90.0).unwrap().len(), 4);
        assert!(phase_grid(&seq, &cs, bz, &tone, 0.0).is_err());
        assert!(phase_grid(&seq, &cs, bz, &tone, -1.0).is_err());
        assert!(phase_grid(&seq, &cs, bz, &tone, 7.0).is_err());
    }

    #[test]
    fn zero_rms_grid_is_all_zero() {
        let (seq, cs, bz) = cs_channel();
        let tone = NoiseTone::new(0.0, 36.2, 0.0).unwrap();
        let grid = phase_grid(&seq, &cs, bz, &tone, 1.0).unwrap();
        assert!(grid.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn antisymmetry_splits_linear_and_quadratic_terms() {
        // Phi(bz, phi) + Phi(bz, phi + pi) = 2 * Phi(bz = 0, phi): the linear
        // term flips sign under phi -> phi + pi, the quadratic term does not.
        let (seq, cs, bz) = cs_channel();
        for (freq, phi) in [(36.2, 0.3), (50.0, 1.1), (18.1, 2.8)] {
            let tone = NoiseTone::new(milligauss_to_tesla(12.0), freq, phi).unwrap();
            let plus = accrued_phase_closed_form(&seq, &cs, bz, &tone);
            let opposite = accrued_phase_closed_form(&seq, &cs, bz, &tone.with_phase(phi + PI));
            let quadratic_only = accrued_phase_closed_form(&seq, &cs, 0.0, &tone);
            assert_abs_diff_eq!(plus + opposite, 2.0 * quadratic_only, epsilon = 1e-10);
        }
    }

    #[test]
    fn worst_case_phase_scales_linearly_at_small_amplitude() {
        let (seq, cs, bz) = cs_channel();
        let f_ac = seq.resonant_frequency();
        for rms_mg in [1.0, 2.5, 5.0] {
            let tone = NoiseTone::new(milligauss_to_tesla(rms_mg), f_ac, 0.0).unwrap();
            let doubled = NoiseTone::new(milligauss_to_tesla(2.0 * rms_mg), f_ac, 0.0).unwrap();
            let base = worst_case_phase(&seq, &cs, bz, &tone, 1.0).unwrap();
            let twice = worst_case_phase(&seq, &cs, bz, &doubled, 1.0).unwrap();
            assert!((twice / base - 2.0).abs() < 0.01, "rms {rms_mg} mG: ratio {}", twice / base);
        }
    }

    #[test]
    fn correlation_spectrum_flags_zero_rms() {
        let (seq, cs, bz) = cs_channel();
        let data = ChannelConfig {
            sequence: DecouplingSequence::block_sequence(8, 6.906e-3).unwrap(),
            species: Species::rubidium(),
            bz_tesla: bz,
        };
        let spectator = ChannelConfig { sequence: seq, species: cs, bz_tesla: bz };
        assert!(phase_correlation_spectrum(&[36.2], &data, &spectator, 0.0, 1.0).is_err());
    }

    #[test]
    fn correlation_ratio_near_feedforward_gain_at_resonance() {
        let tau = 6.906e-3;
        let bz = milligauss_to_tesla(357.0);
        let data = ChannelConfig {
            sequence: DecouplingSequence::block_sequence(8, tau).unwrap(),
            species: Species::rubidium(),
            bz_tesla: bz,
        };
        let spectator = ChannelConfig {
            sequence: DecouplingSequence::block_sequence(6, tau).unwrap(),
            species: Species::cesium(),
            bz_tesla: bz,
        };
        let f_ac = 1.0 / (4.0 * tau);
        let points = phase_correlation_spectrum(
            &[f_ac, 3.0 * f_ac],
            &data,
            &spectator,
            milligauss_to_tesla(10.7),
            0.1,
        )
        .unwrap();
        for point in &points {
            assert!((point.mean_ratio - 1.8).abs() <= 0.02, "ratio {}", point.mean_ratio);
            // sin(phi) = 0 exactly at phi = 0 and pi on the grid.
            assert_eq!(point.excluded, 2);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn closed_form_matches_quadrature(
            blocks in 1usize..10,
            tau_ms in 1.0..12.0f64,
            freq in 0.1..200.0f64,
            phase in 0.0..TAU,
            rms_mg in 0.0..30.0f64,
        ) {
            let seq = DecouplingSequence::block_sequence(blocks, tau_ms * 1e-3).unwrap();
            let cs = Species::cesium();
            let bz = milligauss_to_tesla(357.0);
            let tone = NoiseTone::new(milligauss_to_tesla(rms_mg), freq, phase).unwrap();
            let closed = accrued_phase_closed_form(&seq, &cs, bz, &tone);
            let quad = accrued_phase_quadrature(&seq, &cs, bz, &tone).unwrap();
            prop_assert!((closed - quad).abs() <= 1e-8, "closed {closed} vs quad {quad}");
        }

        #[test]
        fn static_tone_always_cancels(blocks in 1usize..10, phase in 0.0..TAU, rms_mg in 0.0..30.0f64) {
            let seq = DecouplingSequence::block_sequence(blocks, 6.906e-3).unwrap();
            let cs = Species::cesium();
            let bz = milligauss_to_tesla(357.0);
            let tone = NoiseTone::new(milligauss_to_tesla(rms_mg), 0.0, phase).unwrap();
            prop_assert!(accrued_phase_closed_form(&seq, &cs, bz, &tone).abs() <= 1e-12);
        }
    }
}
