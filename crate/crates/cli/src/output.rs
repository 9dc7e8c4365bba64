//! Deterministic CSV emission and atomic file writes.
//!
//! Numbers are printed with 17 significant digits so identical runs are
//! byte-identical and values round-trip exactly through the text form.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use spectator_core::fitting::{FitResult, PoissonMixture};
use spectator_core::noise::CorrelationPoint;
use spectator_core::SweepResult;

/// 17-significant-digit scientific notation; round-trips any f64.
pub fn format_f64(value: f64) -> String {
    format!("{value:.16e}")
}

/// Sweep CSV with the swept axis in presentation units.
///
/// `xs` must match the sweep's points one-to-one (the engine works in SI;
/// the caller owns the presentation values it swept).
pub fn sweep_csv(xs: &[f64], result: &SweepResult) -> Result<String> {
    if xs.len() != result.points.len() {
        bail!("sweep CSV: {} axis values vs {} points", xs.len(), result.points.len());
    }
    let mut csv = String::from("x,sigma_x_on,sigma_x_off,stderr_on,stderr_off\n");
    for (&x, point) in xs.iter().zip(&result.points) {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            format_f64(x),
            format_f64(point.sigma_x_on),
            format_f64(point.sigma_x_off),
            format_f64(point.stderr_on),
            format_f64(point.stderr_off),
        ));
    }
    Ok(csv)
}

/// Phase-correlation spectrum CSV.
pub fn correlation_csv(points: &[CorrelationPoint]) -> String {
    let mut csv = String::from("freq,mean_abs_phi_s,mean_abs_phi_d,mean_ratio\n");
    for point in points {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            format_f64(point.freq),
            format_f64(point.mean_abs_phi_s),
            format_f64(point.mean_abs_phi_d),
            format_f64(point.mean_ratio),
        ));
    }
    csv
}

/// Fit result as `param,value` rows followed by the diagnostics.
pub fn fit_csv(fit: &FitResult) -> String {
    let mut csv = String::from("param,value\n");
    for (name, value) in fit.params() {
        csv.push_str(&format!("{name},{}\n", format_f64(value)));
    }
    csv.push_str(&format!("residual_norm,{}\n", format_f64(fit.residual_norm)));
    csv.push_str(&format!("converged,{}\n", fit.converged));
    csv.push_str(&format!("iterations,{}\n", fit.iterations));
    csv
}

/// Poisson-mixture fit plus its discrimination fidelity.
pub fn mixture_csv(mix: &PoissonMixture, eta: f64) -> String {
    let mut csv = String::from("param,value\n");
    csv.push_str(&format!("lambda0,{}\n", format_f64(mix.lambda0)));
    csv.push_str(&format!("lambda1,{}\n", format_f64(mix.lambda1)));
    csv.push_str(&format!("weight,{}\n", format_f64(mix.weight)));
    csv.push_str(&format!("threshold,{}\n", mix.threshold));
    csv.push_str(&format!("eta,{}\n", format_f64(eta)));
    csv
}

/// Write via a temp file and rename, so a failed run never leaves a partial
/// output under the final name.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("cannot create output directory {}", parent.display()))?;
        }
    }
    let tmp = path.with_extension("tmp");
    let write = || -> Result<()> {
        fs::write(&tmp, contents)
            .with_context(|| format!("cannot write {}", tmp.display()))?;
        fs::rename(&tmp, path)
            .with_context(|| format!("cannot move output into place at {}", path.display()))?;
        Ok(())
    };
    let result = write();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Read a two-column numeric CSV; a single non-numeric leading row is treated
/// as a header.
pub fn read_xy_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read input CSV {}", path.display()))?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            bail!("{}: line {}: expected two columns", path.display(), line_no + 1);
        }
        match (fields[0].parse::<f64>(), fields[1].parse::<f64>()) {
            (Ok(x), Ok(y)) => {
                xs.push(x);
                ys.push(y);
            }
            _ if line_no == 0 => continue, // header row
            _ => bail!("{}: line {}: expected numbers", path.display(), line_no + 1),
        }
    }
    if xs.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok((xs, ys))
}

/// Read a `count,frequency` histogram CSV.
pub fn read_histogram_csv(path: &Path) -> Result<Vec<(u64, f64)>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read histogram CSV {}", path.display()))?;
    let mut histogram = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            bail!("{}: line {}: expected two columns", path.display(), line_no + 1);
        }
        match (fields[0].parse::<u64>(), fields[1].parse::<f64>()) {
            (Ok(count), Ok(frequency)) => histogram.push((count, frequency)),
            _ if line_no == 0 => continue,
            _ => bail!(
                "{}: line {}: expected `count,frequency` with integer count",
                path.display(),
                line_no + 1
            ),
        }
    }
    if histogram.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(histogram)
}
