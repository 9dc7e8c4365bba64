//! Nonlinear least-squares engine plus every model curve the toolkit fits,
//! and the thresholded-readout discrimination statistics.

mod least_squares;
mod poisson;

pub use least_squares::{least_squares, FitResult};
pub use poisson::{
    discrimination_fidelity, fit_poisson_mixture, optimal_threshold, poisson_pmf, PoissonMixture,
};

use std::f64::consts::TAU;

use crate::error::{Error, Result};

/// `amplitude * cos(phi - phase) + offset`.
pub fn cosine_model(phi: f64, p: &[f64]) -> f64 {
    p[0] * (phi - p[1]).cos() + p[2]
}

/// `amplitude * exp(-(t / tau)^exponent) + offset`.
pub fn stretched_exponential_model(t: f64, p: &[f64]) -> f64 {
    p[0] * (-(t / p[1]).powf(p[3])).exp() + p[2]
}

/// `baseline + amplitude * [1 / (1 + 1.71 (t / t2)^2)] * cos(detuning * t + phase)`.
///
/// The non-exponential envelope describes dephasing from the thermal
/// distribution of differential light shifts.
pub fn ramsey_model(t: f64, p: &[f64]) -> f64 {
    let (baseline, amplitude, t2, detuning, phase) = (p[0], p[1], p[2], p[3], p[4]);
    let u = t / t2;
    baseline + amplitude / (1.0 + 1.71 * u * u) * (detuning * t + phase).cos()
}

/// `amplitude * (1 - (1 + exp((t - onset) / timescale))^(-exponent))`.
pub fn logistic_reload_model(t: f64, p: &[f64]) -> f64 {
    let (amplitude, onset, timescale, exponent) = (p[0], p[1], p[2], p[3]);
    let u = (t - onset) / timescale;
    // log(1 + e^u) without overflow on either side.
    let log1p_exp = if u > 0.0 { u + (-u).exp().ln_1p() } else { u.exp().ln_1p() };
    amplitude * (1.0 - (-exponent * log1p_exp).exp())
}

/// Evaluate a canonical cosine fit at phase `phi`.
pub fn cosine_eval(fit: &FitResult, phi: f64) -> Result<f64> {
    let get = |name: &str| {
        fit.value(name)
            .ok_or_else(|| Error::domain(format!("cosine_eval: fit has no `{name}` parameter")))
    };
    Ok(cosine_model(phi, &[get("amplitude")?, get("phase")?, get("offset")?]))
}

/// Fit `amplitude * cos(phi - phase) + offset` with a fixed unit frequency.
///
/// Initialized from the discrete Fourier projection at that frequency, which
/// is already the least-squares optimum on a uniform grid, so the refinement
/// step converges unattended. The result is canonical: `amplitude >= 0`,
/// `phase` folded into `[0, 2 pi)`.
pub fn fit_cosine(phis: &[f64], values: &[f64]) -> Result<FitResult> {
    if phis.len() != values.len() {
        return Err(Error::domain("fit_cosine: phase and value lengths differ"));
    }
    if phis.len() < 4 {
        return Err(Error::domain(format!("fit_cosine: need at least 4 points, got {}", phis.len())));
    }
    let span = phis.iter().fold(f64::NEG_INFINITY, |m, &p| m.max(p))
        - phis.iter().fold(f64::INFINITY, |m, &p| m.min(p));
    if span <= std::f64::consts::PI {
        return Err(Error::domain(format!(
            "fit_cosine: phases must span more than pi radians, got {span:.4}"
        )));
    }

    let n = phis.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let in_phase = 2.0 / n
        * phis.iter().zip(values).map(|(&p, &v)| (v - mean) * p.cos()).sum::<f64>();
    let quadrature = 2.0 / n
        * phis.iter().zip(values).map(|(&p, &v)| (v - mean) * p.sin()).sum::<f64>();
    let initial = [in_phase.hypot(quadrature), quadrature.atan2(in_phase), mean];

    let fit = least_squares(cosine_model, phis, values, &initial)?;
    Ok(fit.rename(&["amplitude", "phase", "offset"]).map_values(canonicalize_cosine))
}

fn canonicalize_cosine(p: &mut [f64]) {
    if p[0] < 0.0 {
        p[0] = -p[0];
        p[1] += std::f64::consts::PI;
    }
    p[1] = p[1].rem_euclid(TAU);
}

/// Fit `amplitude * exp(-(t / tau)^exponent) + offset` to a decay curve.
///
/// Requires strictly positive times; initialized from a log-log regression of
/// the offset-subtracted data.
pub fn fit_stretched_exponential(ts: &[f64], ys: &[f64]) -> Result<FitResult> {
    if ts.len() != ys.len() {
        return Err(Error::domain("fit_stretched_exponential: length mismatch"));
    }
    if ts.len() < 6 {
        return Err(Error::domain("fit_stretched_exponential: need at least 6 points"));
    }
    if ts.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::domain("fit_stretched_exponential: all times must be positive"));
    }

    let min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let offset0 = min;
    let amplitude0 = (ys[0] - offset0).max(1e-12 + max - min);

    // ln(-ln z) = exponent * ln t - exponent * ln tau for z = (y - B) / A.
    let mut us = Vec::new();
    let mut ws = Vec::new();
    for (&t, &y) in ts.iter().zip(ys) {
        let z = (y - offset0) / amplitude0;
        if z > 1e-4 && z < 0.9999 {
            us.push(t.ln());
            ws.push((-z.ln()).ln());
        }
    }
    let (exponent0, tau0) = match linear_regression(&us, &ws) {
        Some((slope, intercept)) if slope > 0.05 => (slope, (-intercept / slope).exp()),
        _ => (1.0, ts[ts.len() / 2]),
    };

    let initial = [amplitude0, tau0, offset0, exponent0];
    let fit = least_squares(stretched_exponential_model, ts, ys, &initial)?;
    Ok(fit.rename(&["amplitude", "tau", "offset", "exponent"]))
}

/// Fit the Ramsey fringe model; the detuning is initialized from a coarse
/// periodogram so at least two sampled oscillation periods are required.
pub fn fit_ramsey(ts: &[f64], ys: &[f64]) -> Result<FitResult> {
    if ts.len() != ys.len() {
        return Err(Error::domain("fit_ramsey: length mismatch"));
    }
    if ts.len() < 8 {
        return Err(Error::domain("fit_ramsey: need at least 8 points"));
    }
    let span = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - ts.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(span > 0.0) {
        return Err(Error::domain("fit_ramsey: times must span a nonzero interval"));
    }

    let n = ts.len() as f64;
    let baseline0 = ys.iter().sum::<f64>() / n;
    let centered: Vec<f64> = ys.iter().map(|&y| y - baseline0).collect();
    let amplitude0 = centered.iter().fold(0.0f64, |m, &v| m.max(v.abs()));

    // Coarse periodogram over frequencies resolvable on this grid.
    let f_lo = 0.5 / span;
    let f_hi = 0.25 * n / span;
    let mut best = (f_lo, 0.0);
    for i in 0..512 {
        let f = f_lo + (f_hi - f_lo) * i as f64 / 511.0;
        let omega = TAU * f;
        let (mut pc, mut ps) = (0.0, 0.0);
        for (&t, &v) in ts.iter().zip(&centered) {
            pc += v * (omega * t).cos();
            ps += v * (omega * t).sin();
        }
        let power = pc * pc + ps * ps;
        if power > best.1 {
            best = (f, power);
        }
    }
    let detuning0 = TAU * best.0;
    let (mut pc, mut ps) = (0.0, 0.0);
    for (&t, &v) in ts.iter().zip(&centered) {
        pc += v * (detuning0 * t).cos();
        ps += v * (detuning0 * t).sin();
    }
    let phase0 = (-ps).atan2(pc);
    let initial = [baseline0, amplitude0, 0.5 * span, detuning0, phase0];

    let fit = least_squares(ramsey_model, ts, ys, &initial)?;
    Ok(fit.rename(&["baseline", "amplitude", "t2_star", "detuning", "phase"]))
}

/// Fit the phenomenological reloading curve
/// `amplitude * (1 - (1 + exp((t - onset) / timescale))^(-exponent))`.
pub fn fit_logistic_reload(ts: &[f64], ys: &[f64]) -> Result<FitResult> {
    if ts.len() != ys.len() {
        return Err(Error::domain("fit_logistic_reload: length mismatch"));
    }
    if ts.len() < 6 {
        return Err(Error::domain("fit_logistic_reload: need at least 6 points"));
    }

    let amplitude0 = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(1e-9);
    let span = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - ts.iter().cloned().fold(f64::INFINITY, f64::min);
    let onset0 = ts
        .iter()
        .zip(ys)
        .find(|(_, &y)| y >= 0.5 * amplitude0)
        .map(|(&t, _)| t)
        .unwrap_or_else(|| ts[ts.len() / 2]);
    let initial = [amplitude0, onset0, (span / 10.0).max(1e-9), 1.0];

    let fit = least_squares(logistic_reload_model, ts, ys, &initial)?;
    Ok(fit.rename(&["amplitude", "onset", "timescale", "exponent"]))
}

/// Time at which a converged reloading fit reaches `1 - 1/e` of its
/// asymptote, found by bisection to 1e-6 s.
pub fn reload_saturation_time(fit: &FitResult) -> Result<f64> {
    if !fit.converged {
        return Err(Error::domain("reload_saturation_time: fit did not converge"));
    }
    let get = |name: &str| {
        fit.value(name).ok_or_else(|| {
            Error::domain(format!("reload_saturation_time: fit has no `{name}` parameter"))
        })
    };
    let params = [get("amplitude")?, get("onset")?, get("timescale")?, get("exponent")?];
    let (amplitude, onset, timescale) = (params[0], params[1], params[2]);
    if !(amplitude > 0.0) || !(timescale > 0.0) {
        return Err(Error::domain(
            "reload_saturation_time: amplitude and timescale must be positive",
        ));
    }

    let target = (1.0 - (-1.0f64).exp()) * amplitude;
    let residual = |t: f64| logistic_reload_model(t, &params) - target;
    let (mut lo, mut hi) = (onset - 100.0 * timescale, onset + 100.0 * timescale);
    if residual(lo) > 0.0 || residual(hi) < 0.0 {
        return Err(Error::numeric(format!(
            "reload_saturation_time: no crossing inside the scan window [{lo}, {hi}]"
        )));
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if residual(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Coherence from a final-pulse phase scan: the fitted cosine amplitude,
/// optionally divided by a SPAM-normalization amplitude measured separately.
pub fn coherence_from_phase_scan(
    phis: &[f64],
    populations: &[f64],
    spam_normalization: Option<f64>,
) -> Result<f64> {
    let fit = fit_cosine(phis, populations)?;
    let amplitude = fit.value("amplitude").expect("canonical cosine fit");
    match spam_normalization {
        None => Ok(amplitude),
        Some(norm) if norm > 0.0 => Ok(amplitude / norm),
        Some(norm) => {
            Err(Error::domain(format!("coherence: SPAM normalization must be positive, got {norm}")))
        }
    }
}

/// Ordinary least-squares line `w = slope * u + intercept`.
fn linear_regression(us: &[f64], ws: &[f64]) -> Option<(f64, f64)> {
    if us.len() < 2 {
        return None;
    }
    let n = us.len() as f64;
    let mu = us.iter().sum::<f64>() / n;
    let mw = ws.iter().sum::<f64>() / n;
    let sxx = us.iter().map(|&u| (u - mu) * (u - mu)).sum::<f64>();
    if sxx < 1e-300 {
        return None;
    }
    let sxy = us.iter().zip(ws).map(|(&u, &w)| (u - mu) * (w - mw)).sum::<f64>();
    let slope = sxy / sxx;
    Some((slope, mw - slope * mu))
}
