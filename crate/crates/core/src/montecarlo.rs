//! The experiment engine: full feed-forward shots, amplitude and frequency
//! sweeps, and noise-free gain factors.
//!
//! A shot proceeds exactly like one experimental repetition: the tone phase
//! `phi_j` fixes the true accrued phases `Phi_S` (spectator sequence) and
//! `Phi_D` (data sequence); a binomial readout of the spectator ensemble
//! yields the estimate `Phi'_S` and the correction `Phi'_D`; the data-qubit
//! expectation value is modulated by `f_off = cos(Phi_D)` without
//! feed-forward and `f_on = cos(Phi_D - Phi'_D)` with it.
//!
//! A sweep point reproduces the data-reduction pipeline as well: per analysis
//! phase `phi_k`, the mean factors of `reps_per_phase` shots scale the
//! noise-free characterization curve `rescale * D * cos(phi_k)`, a cosine fit
//! is evaluated at the curve's positive extremum, and that value is `<sigma_x>`
//! for the branch. Repeating this `mc_instances` times yields the mean and
//! standard error reported per point.
//!
//! Determinism: every random draw comes from a ChaCha stream derived from
//! `(seed, point index, instance index)`, so serial and parallel sweeps —
//! and repeated runs — produce bit-identical results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::{FRAC_PI_2, TAU};

use crate::error::{Error, Result};
use crate::estimation::{
    estimate_spectator_phase, feedforward_phase, sample_bright_counts, sigma_y_from_counts,
    FeedforwardLaw, ReadoutModel,
};
use crate::fitting::{cosine_eval, fit_cosine};
use crate::noise::{phase_grid, ChannelConfig, NoiseTone, PhaseGrid};
use crate::physics::{BiasField, Species};
use crate::sequence::DecouplingSequence;

/// Complete description of one protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Inter-structure delay (seconds); half the inter-pulse spacing.
    pub tau: f64,
    /// Spectator decoupling blocks (total sensing time `2 m tau`).
    pub spectator_blocks: usize,
    /// Data decoupling blocks.
    pub data_blocks: usize,
    pub bias: BiasField,
    pub data_species: Species,
    pub spectator_species: Species,
    pub readout: ReadoutModel,
    pub law: FeedforwardLaw,
    /// Noise-free data-qubit contrast D of the characterization curve.
    pub d_contrast: f64,
    /// Analysis-pulse phases phi_k.
    pub analysis_phases: Vec<f64>,
    /// Shots per analysis phase.
    pub reps_per_phase: usize,
    /// Monte Carlo instances aggregated per sweep point.
    pub mc_instances: usize,
    /// Tone-phase grid resolution in degrees.
    pub grid_resolution_deg: f64,
    /// Global amplitude rescaling applied to both branches.
    pub rescale: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            tau: 6.906e-3,
            spectator_blocks: 6,
            data_blocks: 8,
            bias: BiasField::default(),
            data_species: Species::rubidium(),
            spectator_species: Species::cesium(),
            readout: ReadoutModel::default(),
            law: FeedforwardLaw::default(),
            d_contrast: 0.60,
            analysis_phases: uniform_phases(10),
            reps_per_phase: 80,
            mc_instances: 100,
            grid_resolution_deg: 0.1,
            rescale: 1.0,
            seed: 1,
        }
    }
}

/// `n` uniform phases over `[0, 2 pi)`.
pub fn uniform_phases(n: usize) -> Vec<f64> {
    (0..n).map(|k| TAU * k as f64 / n as f64).collect()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::domain(format!("config: tau must be positive, got {}", self.tau)));
        }
        if self.spectator_blocks == 0 || self.data_blocks == 0 {
            return Err(Error::domain("config: block counts must be >= 1"));
        }
        if !(self.d_contrast > 0.0 && self.d_contrast <= 1.0) {
            return Err(Error::domain(format!(
                "config: d_contrast must lie in (0, 1], got {}",
                self.d_contrast
            )));
        }
        if self.analysis_phases.is_empty() || self.reps_per_phase == 0 || self.mc_instances == 0 {
            return Err(Error::domain("config: counts must be >= 1"));
        }
        if !(self.rescale > 0.0) || !self.rescale.is_finite() {
            return Err(Error::domain(format!(
                "config: rescale must be positive and finite, got {}",
                self.rescale
            )));
        }
        if !(self.grid_resolution_deg > 0.0) {
            return Err(Error::domain("config: grid resolution must be positive"));
        }
        Ok(())
    }

    pub fn spectator_sequence(&self) -> Result<DecouplingSequence> {
        DecouplingSequence::block_sequence(self.spectator_blocks, self.tau)
    }

    pub fn data_sequence(&self) -> Result<DecouplingSequence> {
        DecouplingSequence::block_sequence(self.data_blocks, self.tau)
    }

    pub fn spectator_channel(&self) -> Result<ChannelConfig> {
        Ok(ChannelConfig {
            sequence: self.spectator_sequence()?,
            species: self.spectator_species,
            bz_tesla: self.bias.bz_tesla,
        })
    }

    pub fn data_channel(&self) -> Result<ChannelConfig> {
        Ok(ChannelConfig {
            sequence: self.data_sequence()?,
            species: self.data_species,
            bz_tesla: self.bias.bz_tesla,
        })
    }

    /// Peak noise-sensitivity frequency `1 / (4 tau)` of the shared spacing.
    pub fn resonant_frequency(&self) -> f64 {
        1.0 / (4.0 * self.tau)
    }
}

/// One Monte Carlo shot: true and estimated phases plus both modulation
/// factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSample {
    /// Tone phase at sequence start.
    pub phi_j: f64,
    /// True spectator phase Phi_S.
    pub phi_s: f64,
    /// True data phase Phi_D.
    pub phi_d: f64,
    /// Estimated spectator phase Phi'_S.
    pub phi_s_est: f64,
    /// Feed-forward correction Phi'_D.
    pub phi_d_est: f64,
    /// cos(Phi_D - Phi'_D).
    pub f_on: f64,
    /// cos(Phi_D).
    pub f_off: f64,
}

/// One aggregated sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    /// Swept value, in the caller's units.
    pub x: f64,
    pub sigma_x_on: f64,
    pub sigma_x_off: f64,
    pub stderr_on: f64,
    pub stderr_off: f64,
}

/// A full sweep: one point per swept value.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: String,
    pub points: Vec<SweepPoint>,
}

/// Serial or work-stealing execution of a sweep; results are identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionMode {
    Serial,
    Parallel,
}

/// Noise-free gain estimate: mean of `f_on` with no injected tone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub shots: usize,
}

/// RNG for a given seed and stream; streams keep sweep points and instances
/// statistically independent while staying reproducible.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn instance_stream(point_index: usize, instance: usize) -> u64 {
    ((point_index as u64) << 32) | instance as u64
}

/// Finish a shot from known true phases and a bright-count readout.
fn shot_from_phases(
    cfg: &ExperimentConfig,
    phi_j: f64,
    phi_s: f64,
    phi_d: f64,
    n_bright: u64,
) -> Result<PhaseSample> {
    let sigma_y = sigma_y_from_counts(n_bright, cfg.readout.n_spectators(), cfg.readout.a())?;
    finish_shot(cfg, phi_j, phi_s, phi_d, sigma_y)
}

fn finish_shot(
    cfg: &ExperimentConfig,
    phi_j: f64,
    phi_s: f64,
    phi_d: f64,
    sigma_y: f64,
) -> Result<PhaseSample> {
    let phi_s_est = estimate_spectator_phase(sigma_y, cfg.readout.c())?;
    let phi_d_est = feedforward_phase(phi_s_est, &cfg.law);
    Ok(PhaseSample {
        phi_j,
        phi_s,
        phi_d,
        phi_s_est,
        phi_d_est,
        f_on: (phi_d - phi_d_est).cos(),
        f_off: phi_d.cos(),
    })
}

fn true_phases(cfg: &ExperimentConfig, tone: &NoiseTone, phi_j: f64) -> Result<(f64, f64)> {
    let spectator = cfg.spectator_channel()?;
    let data = cfg.data_channel()?;
    let tone = tone.with_phase(phi_j);
    let phi_s = crate::noise::accrued_phase_closed_form(
        &spectator.sequence,
        &spectator.species,
        spectator.bz_tesla,
        &tone,
    );
    let phi_d =
        crate::noise::accrued_phase_closed_form(&data.sequence, &data.species, data.bz_tesla, &tone);
    Ok((phi_s, phi_d))
}

/// Simulate one shot at tone phase `phi_j`, sampling the spectator readout.
///
/// The true phases depend only on `(cfg, tone, phi_j)`; the RNG is consumed
/// exclusively by the binomial readout.
pub fn simulate_shot(
    rng: &mut impl Rng,
    cfg: &ExperimentConfig,
    tone: &NoiseTone,
    phi_j: f64,
) -> Result<PhaseSample> {
    cfg.validate()?;
    let (phi_s, phi_d) = true_phases(cfg, tone, phi_j)?;
    let n_bright = sample_bright_counts(rng, &cfg.readout, phi_s);
    shot_from_phases(cfg, phi_j, phi_s, phi_d, n_bright)
}

/// Shot with the readout replaced by its expectation value (no shot noise).
pub fn simulate_shot_expected(
    cfg: &ExperimentConfig,
    tone: &NoiseTone,
    phi_j: f64,
) -> Result<PhaseSample> {
    cfg.validate()?;
    let (phi_s, phi_d) = true_phases(cfg, tone, phi_j)?;
    finish_shot(cfg, phi_j, phi_s, phi_d, cfg.readout.c() * phi_s.sin())
}

/// Mean `f_on` over `n_shots` with no injected noise: the residual penalty of
/// shot-noise-limited phase estimation alone.
pub fn noise_free_gain(cfg: &ExperimentConfig, n_shots: usize) -> Result<GainEstimate> {
    cfg.validate()?;
    if n_shots == 0 {
        return Err(Error::domain("noise_free_gain: need at least one shot"));
    }
    let mut rng = stream_rng(cfg.seed, u64::MAX);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_shots {
        let n_bright = sample_bright_counts(&mut rng, &cfg.readout, 0.0);
        let sample = shot_from_phases(cfg, 0.0, 0.0, 0.0, n_bright)?;
        sum += sample.f_on;
        sum_sq += sample.f_on * sample.f_on;
    }
    let mean = sum / n_shots as f64;
    let variance = (sum_sq / n_shots as f64 - mean * mean).max(0.0);
    Ok(GainEstimate {
        mean,
        std_error: (variance / n_shots as f64).sqrt(),
        shots: n_shots,
    })
}

/// Both branches' factor means per analysis phase for one instance.
fn instance_factors(
    rng: &mut impl Rng,
    cfg: &ExperimentConfig,
    grid_s: &PhaseGrid,
    grid_d: &PhaseGrid,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n_grid = grid_s.len();
    let mut f_on = Vec::with_capacity(cfg.analysis_phases.len());
    let mut f_off = Vec::with_capacity(cfg.analysis_phases.len());
    for _ in &cfg.analysis_phases {
        let (mut on_sum, mut off_sum) = (0.0, 0.0);
        for _ in 0..cfg.reps_per_phase {
            let idx = rng.random_range(0..n_grid);
            let phi_s = grid_s.values[idx];
            let phi_d = grid_d.values[idx];
            let n_bright = sample_bright_counts(rng, &cfg.readout, phi_s);
            let sample = shot_from_phases(cfg, grid_s.phases[idx], phi_s, phi_d, n_bright)?;
            on_sum += sample.f_on;
            off_sum += sample.f_off;
        }
        f_on.push(on_sum / cfg.reps_per_phase as f64);
        f_off.push(off_sum / cfg.reps_per_phase as f64);
    }
    Ok((f_on, f_off))
}

/// Fit the factored characterization curve and read off `<sigma_x>` at the
/// curve's noise-free extremum.
fn sigma_x_from_factors(cfg: &ExperimentConfig, factors: &[f64]) -> Result<f64> {
    let data: Vec<f64> = cfg
        .analysis_phases
        .iter()
        .zip(factors)
        .map(|(&phi_k, &f)| cfg.rescale * cfg.d_contrast * f * phi_k.cos())
        .collect();
    let fit = fit_cosine(&cfg.analysis_phases, &data)?;
    if !fit.converged {
        return Err(Error::numeric("sweep point: analysis cosine fit did not converge"));
    }
    cosine_eval(&fit, 0.0)
}

fn instance_sigma_x(
    rng: &mut impl Rng,
    cfg: &ExperimentConfig,
    grid_s: &PhaseGrid,
    grid_d: &PhaseGrid,
) -> Result<(f64, f64)> {
    let (f_on, f_off) = instance_factors(rng, cfg, grid_s, grid_d)?;
    Ok((sigma_x_from_factors(cfg, &f_on)?, sigma_x_from_factors(cfg, &f_off)?))
}

fn tone_grids(cfg: &ExperimentConfig, tone: &NoiseTone) -> Result<(PhaseGrid, PhaseGrid)> {
    let spectator = cfg.spectator_channel()?;
    let data = cfg.data_channel()?;
    let grid_s = phase_grid(
        &spectator.sequence,
        &spectator.species,
        spectator.bz_tesla,
        tone,
        cfg.grid_resolution_deg,
    )?;
    let grid_d =
        phase_grid(&data.sequence, &data.species, data.bz_tesla, tone, cfg.grid_resolution_deg)?;
    Ok((grid_s, grid_d))
}

/// One Monte Carlo instance of a sweep point: `(sigma_x_on, sigma_x_off)`.
pub fn simulate_sweep_point(
    rng: &mut impl Rng,
    cfg: &ExperimentConfig,
    tone: &NoiseTone,
) -> Result<(f64, f64)> {
    cfg.validate()?;
    let (grid_s, grid_d) = tone_grids(cfg, tone)?;
    instance_sigma_x(rng, cfg, &grid_s, &grid_d)
}

fn aggregate_point(cfg: &ExperimentConfig, x: f64, point_index: usize, tone: &NoiseTone) -> Result<SweepPoint> {
    let (grid_s, grid_d) = tone_grids(cfg, tone)?;
    let mut on = Vec::with_capacity(cfg.mc_instances);
    let mut off = Vec::with_capacity(cfg.mc_instances);
    for instance in 0..cfg.mc_instances {
        let mut rng = stream_rng(cfg.seed, instance_stream(point_index, instance));
        let (sigma_on, sigma_off) = instance_sigma_x(&mut rng, cfg, &grid_s, &grid_d)
            .map_err(|e| Error::numeric(format!("sweep point x = {x}: {e}")))?;
        on.push(sigma_on);
        off.push(sigma_off);
    }
    let (mean_on, stderr_on) = mean_and_stderr(&on);
    let (mean_off, stderr_off) = mean_and_stderr(&off);
    Ok(SweepPoint { x, sigma_x_on: mean_on, sigma_x_off: mean_off, stderr_on, stderr_off })
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (variance / n).sqrt())
}

fn run_sweep<F>(
    cfg: &ExperimentConfig,
    axis: &str,
    xs: &[f64],
    tone_for: F,
    mode: ExecutionMode,
) -> Result<SweepResult>
where
    F: Fn(f64) -> Result<NoiseTone> + Sync,
{
    cfg.validate()?;
    if xs.is_empty() {
        return Err(Error::domain("sweep: need at least one point"));
    }
    let point = |(index, &x): (usize, &f64)| aggregate_point(cfg, x, index, &tone_for(x)?);
    let points: Vec<SweepPoint> = match mode {
        ExecutionMode::Serial => xs.iter().enumerate().map(point).collect::<Result<_>>()?,
        ExecutionMode::Parallel => {
            xs.par_iter().enumerate().map(point).collect::<Result<_>>()?
        }
    };
    Ok(SweepResult { axis: axis.to_string(), points })
}

/// `<sigma_x>` of both branches versus RMS tone amplitude (Tesla) at the
/// resonant frequency.
pub fn amplitude_sweep(
    cfg: &ExperimentConfig,
    rms_values_tesla: &[f64],
    mode: ExecutionMode,
) -> Result<SweepResult> {
    let f_ac = cfg.resonant_frequency();
    run_sweep(cfg, "rms_tesla", rms_values_tesla, |rms| NoiseTone::new(rms, f_ac, 0.0), mode)
}

/// `<sigma_x>` of both branches versus tone frequency (Hz) at fixed RMS
/// amplitude.
pub fn frequency_sweep(
    cfg: &ExperimentConfig,
    freqs_hz: &[f64],
    rms_tesla: f64,
    mode: ExecutionMode,
) -> Result<SweepResult> {
    run_sweep(cfg, "freq_hz", freqs_hz, |freq| NoiseTone::new(rms_tesla, freq, 0.0), mode)
}

/// Smallest RMS amplitude (Tesla) at the resonant frequency for which the
/// worst-case spectator phase over the grid exceeds pi/2, found by bisection.
///
/// Beyond this amplitude the arcsine inversion is no longer unambiguous and
/// the protocol breaks down.
pub fn breakdown_amplitude(cfg: &ExperimentConfig, lo_tesla: f64, hi_tesla: f64) -> Result<f64> {
    cfg.validate()?;
    if !(0.0 <= lo_tesla && lo_tesla < hi_tesla) {
        return Err(Error::domain("breakdown_amplitude: need 0 <= lo < hi"));
    }
    let f_ac = cfg.resonant_frequency();
    let spectator = cfg.spectator_channel()?;
    let worst = |rms: f64| -> Result<f64> {
        let tone = NoiseTone::new(rms, f_ac, 0.0)?;
        Ok(phase_grid(
            &spectator.sequence,
            &spectator.species,
            spectator.bz_tesla,
            &tone,
            cfg.grid_resolution_deg,
        )?
        .max_abs())
    };
    if worst(lo_tesla)? > FRAC_PI_2 {
        return Err(Error::domain("breakdown_amplitude: already beyond pi/2 at the lower bound"));
    }
    if worst(hi_tesla)? <= FRAC_PI_2 {
        return Err(Error::domain("breakdown_amplitude: upper bound never exceeds pi/2"));
    }
    let (mut lo, mut hi) = (lo_tesla, hi_tesla);
    while hi - lo > 1e-11 {
        let mid = 0.5 * (lo + hi);
        if worst(mid)? > FRAC_PI_2 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
