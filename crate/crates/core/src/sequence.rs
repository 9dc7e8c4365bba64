//! Dynamical decoupling sequences and the ±1 toggling function.
//!
//! Only pulse *timing* matters for the dephasing model (the accumulated
//! frequency shift flips sign at every π-pulse), so XY4/XY8/CPMG sequences
//! with the same timing are one and the same object here. Pulses are treated
//! as instantaneous.

use crate::error::{Error, Result};

/// A train of π-pulses described by its timing.
///
/// Built from `m` repetitions of a `[tau - pi - tau]` block: pulse `k`
/// (0-based) sits at `(2k + 1) * tau` and the total evolution time is
/// `2 m * tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecouplingSequence {
    tau: f64,
    pulse_times: Vec<f64>,
    total_time: f64,
}

/// One interval of constant toggling sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    pub sign: f64,
}

impl DecouplingSequence {
    /// `[tau - pi - tau]^m` block sequence.
    pub fn block_sequence(blocks: usize, tau: f64) -> Result<Self> {
        if blocks == 0 {
            return Err(Error::domain("block_sequence: need at least one block"));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::domain(format!("block_sequence: tau must be positive, got {tau}")));
        }
        let pulse_times = (0..blocks).map(|k| (2 * k + 1) as f64 * tau).collect();
        Ok(DecouplingSequence {
            tau,
            pulse_times,
            total_time: 2.0 * blocks as f64 * tau,
        })
    }

    /// Half the inter-pulse spacing.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn pulse_times(&self) -> &[f64] {
        &self.pulse_times
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    /// Toggling sign at time `t`: `(-1)^n` with `n` the number of pulses
    /// strictly before `t`.
    pub fn toggling_sign(&self, t: f64) -> Result<i32> {
        if !(0.0..=self.total_time).contains(&t) {
            return Err(Error::domain(format!(
                "toggling_sign: t = {t} outside [0, {}]",
                self.total_time
            )));
        }
        let n = self.pulse_times.iter().filter(|&&p| p < t).count();
        Ok(if n % 2 == 0 { 1 } else { -1 })
    }

    /// Constant-sign intervals covering `[0, total_time]`, in order.
    pub fn segments(&self) -> Vec<Segment> {
        let mut segments = Vec::with_capacity(self.pulse_times.len() + 1);
        let mut start = 0.0;
        let mut sign = 1.0;
        for &p in &self.pulse_times {
            segments.push(Segment { start, end: p, sign });
            start = p;
            sign = -sign;
        }
        segments.push(Segment { start, end: self.total_time, sign });
        segments
    }

    /// Frequency of peak noise sensitivity for this sequence's spacing.
    pub fn resonant_frequency(&self) -> f64 {
        1.0 / (4.0 * self.tau)
    }
}

/// `f_ac = 1 / (4 tau)`, the passband center of a `[tau - pi - tau]^m` train.
pub fn resonant_frequency(tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::domain(format!("resonant_frequency: tau must be positive, got {tau}")));
    }
    Ok(1.0 / (4.0 * tau))
}
