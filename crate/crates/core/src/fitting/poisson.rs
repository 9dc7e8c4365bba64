//! Bimodal Poisson model of thresholded fluorescence readout.
//!
//! A readout image yields a photon count drawn from the dark mode
//! (`lambda0`) or the bright mode (`lambda1`); counts above an integer
//! threshold are classified as bright. The discrimination fidelity is one
//! minus the mean of the two misassignment probabilities, computed with
//! exact Poisson sums so the value is bit-stable across platforms.

use crate::error::{Error, Result};

/// Two-mode Poisson count model with a classification threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonMixture {
    /// Dark-mode mean photon count.
    pub lambda0: f64,
    /// Bright-mode mean photon count (must exceed `lambda0`).
    pub lambda1: f64,
    /// Fraction of the dark mode.
    pub weight: f64,
    /// Counts strictly above this value are classified bright.
    pub threshold: u64,
}

impl PoissonMixture {
    pub fn new(lambda0: f64, lambda1: f64, weight: f64, threshold: u64) -> Result<Self> {
        if !(lambda0 >= 0.0) || !(lambda1 > lambda0) {
            return Err(Error::domain(format!(
                "poisson mixture: need lambda1 > lambda0 >= 0 (got {lambda0}, {lambda1})"
            )));
        }
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::domain(format!("poisson mixture: weight {weight} outside [0, 1]")));
        }
        Ok(PoissonMixture { lambda0, lambda1, weight, threshold })
    }

    /// Mixture probability of observing `count`.
    pub fn pmf(&self, count: u64) -> f64 {
        self.weight * poisson_pmf(count, self.lambda0)
            + (1.0 - self.weight) * poisson_pmf(count, self.lambda1)
    }
}

/// Poisson probability mass, evaluated in log space so large means stay
/// finite.
pub fn poisson_pmf(count: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if count == 0 { 1.0 } else { 0.0 };
    }
    let k = count as f64;
    (k * lambda.ln() - lambda - libm::lgamma(k + 1.0)).exp()
}

/// `P(X <= threshold)` for `X ~ Poisson(lambda)` by direct summation.
fn lower_tail(lambda: f64, threshold: u64) -> f64 {
    (0..=threshold).map(|k| poisson_pmf(k, lambda)).sum()
}

/// `P(X > threshold)` by direct summation of the upper tail, truncated once
/// the remaining mass is below 1e-12 of the total.
fn upper_tail(lambda: f64, threshold: u64) -> f64 {
    let mut sum = 0.0;
    let mut k = threshold + 1;
    // Past the mode the terms decay super-geometrically; the cap is generous.
    let cap = ((lambda + 40.0 * lambda.sqrt() + 60.0).ceil() as u64).max(threshold + 2);
    loop {
        let term = poisson_pmf(k, lambda);
        sum += term;
        if k >= cap && (term <= 1e-18 || term <= 1e-13 * sum) {
            break;
        }
        k += 1;
    }
    sum
}

/// Discrimination fidelity
/// `eta = 1 - [P(count > threshold | dark) + P(count <= threshold | bright)] / 2`.
pub fn discrimination_fidelity(mix: &PoissonMixture) -> f64 {
    let dark_as_bright = upper_tail(mix.lambda0, mix.threshold);
    let bright_as_dark = lower_tail(mix.lambda1, mix.threshold);
    1.0 - 0.5 * (dark_as_bright + bright_as_dark)
}

/// Integer threshold between the two means that maximizes the
/// discrimination fidelity.
pub fn optimal_threshold(lambda0: f64, lambda1: f64) -> u64 {
    let lo = lambda0.floor() as u64;
    let hi = (lambda1.ceil() as u64).max(lo + 1);
    let mut best = (lo, f64::NEG_INFINITY);
    for threshold in lo..=hi {
        let mix = PoissonMixture { lambda0, lambda1, weight: 0.5, threshold };
        let eta = discrimination_fidelity(&mix);
        if eta > best.1 {
            best = (threshold, eta);
        }
    }
    best.0
}

/// Maximum-likelihood two-mode Poisson fit of a count histogram via
/// expectation–maximization, with the threshold set to the fidelity optimum.
///
/// `histogram` maps photon count to observed frequency (weights may be
/// fractional); the total weight must be at least 100 samples. Histograms
/// that do not resolve two modes are reported as an error rather than a
/// spurious mixture.
pub fn fit_poisson_mixture(histogram: &[(u64, f64)]) -> Result<PoissonMixture> {
    let total: f64 = histogram.iter().map(|&(_, f)| f).sum();
    if !(total >= 100.0) {
        return Err(Error::domain(format!(
            "fit_poisson_mixture: need at least 100 samples, histogram holds {total}"
        )));
    }
    if histogram.iter().any(|&(_, f)| f < 0.0 || !f.is_finite()) {
        return Err(Error::domain("fit_poisson_mixture: frequencies must be finite and >= 0"));
    }

    let mean = histogram.iter().map(|&(k, f)| k as f64 * f).sum::<f64>() / total;
    let split_mass: f64 =
        histogram.iter().filter(|&&(k, _)| (k as f64) < mean).map(|&(_, f)| f).sum();
    let side_mean = |below: bool| {
        let (mut mass, mut acc) = (0.0, 0.0);
        for &(k, f) in histogram {
            if ((k as f64) < mean) == below {
                mass += f;
                acc += k as f64 * f;
            }
        }
        if mass > 0.0 {
            acc / mass
        } else if below {
            mean / 2.0
        } else {
            1.5 * mean + 1.0
        }
    };

    let mut lambda0 = side_mean(true);
    let mut lambda1 = side_mean(false).max(lambda0 + 1e-6);
    let mut weight = (split_mass / total).clamp(1e-6, 1.0 - 1e-6);

    let mut iterations = 0;
    for iter in 0..500 {
        iterations = iter + 1;
        let (mut mass0, mut acc0, mut mass1, mut acc1) = (0.0, 0.0, 0.0, 0.0);
        for &(k, f) in histogram {
            let log0 = weight.ln() + log_poisson_pmf(k, lambda0);
            let log1 = (1.0 - weight).ln() + log_poisson_pmf(k, lambda1);
            // responsibility of the dark mode, stabilized in log space
            let resp = 1.0 / (1.0 + (log1 - log0).exp());
            mass0 += f * resp;
            acc0 += f * resp * k as f64;
            mass1 += f * (1.0 - resp);
            acc1 += f * (1.0 - resp) * k as f64;
        }
        let new_weight = (mass0 / total).clamp(1e-9, 1.0 - 1e-9);
        let new_lambda0 = if mass0 > 0.0 { acc0 / mass0 } else { lambda0 };
        let new_lambda1 = if mass1 > 0.0 { acc1 / mass1 } else { lambda1 };
        let delta = (new_weight - weight)
            .abs()
            .max((new_lambda0 - lambda0).abs())
            .max((new_lambda1 - lambda1).abs());
        weight = new_weight;
        lambda0 = new_lambda0;
        lambda1 = new_lambda1;
        if delta < 1e-10 {
            break;
        }
    }
    let _ = iterations;

    if lambda1 < lambda0 {
        std::mem::swap(&mut lambda0, &mut lambda1);
        weight = 1.0 - weight;
    }

    // Two Poisson modes are only resolvable when their separation beats the
    // combined shot noise and neither mode is vestigial.
    let separation = lambda1 - lambda0;
    let resolvable = separation > lambda0.sqrt() + lambda1.sqrt();
    let balanced = (0.02..=0.98).contains(&weight);
    if !resolvable || !balanced {
        return Err(Error::numeric(format!(
            "fit_poisson_mixture: histogram is not resolvably bimodal \
             (lambda0 = {lambda0:.3}, lambda1 = {lambda1:.3}, weight = {weight:.3})"
        )));
    }

    PoissonMixture::new(lambda0, lambda1, weight, optimal_threshold(lambda0, lambda1))
}

fn log_poisson_pmf(count: u64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return if count == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let k = count as f64;
    k * lambda.ln() - lambda - libm::lgamma(k + 1.0)
}
