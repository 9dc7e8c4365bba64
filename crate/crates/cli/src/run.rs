//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Result};
use spectator_core::fitting::{
    discrimination_fidelity, fit_cosine, fit_logistic_reload, fit_poisson_mixture, fit_ramsey,
    fit_stretched_exponential, reload_saturation_time, FitResult,
};
use spectator_core::montecarlo::{
    amplitude_sweep, frequency_sweep, noise_free_gain, ExecutionMode,
};
use spectator_core::noise::phase_correlation_spectrum;
use spectator_core::physics::milligauss_to_tesla;

use crate::config::{linspace, parse_config, parse_points, FileConfig};
use crate::output;

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub points: Option<String>,
}

impl Options {
    fn load(&self) -> Result<FileConfig> {
        let mut file = parse_config(self.config.as_deref())?;
        if let Some(seed) = self.seed {
            file.experiment.seed = seed;
        }
        Ok(file)
    }

    fn axis_or(&self, default: Vec<f64>) -> Result<Vec<f64>> {
        match &self.points {
            Some(spec) => parse_points(spec),
            None => Ok(default),
        }
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

const GAIN_SHOTS: usize = 100_000;

/// `<sigma_x>` of both branches versus RMS amplitude (mG) at the resonant
/// frequency; writes `amp_sweep.csv`.
pub fn amp_sweep(opts: &Options) -> Result<()> {
    let mut file = opts.load()?;
    file.experiment.rescale = file.rescale_or(1.0);
    let axis_mg = opts.axis_or(linspace(0.0, 20.0, 41))?;
    if axis_mg.iter().any(|&x| x < 0.0) {
        bail!("amp-sweep: RMS amplitudes must be >= 0 mG");
    }
    let axis_tesla: Vec<f64> = axis_mg.iter().map(|&mg| milligauss_to_tesla(mg)).collect();
    let sweep = amplitude_sweep(&file.experiment, &axis_tesla, ExecutionMode::Parallel)?;
    let csv = output::sweep_csv(&axis_mg, &sweep)?;
    output::write_atomic(&opts.out_path("amp_sweep.csv"), &csv)?;
    println!("amp-sweep: {} points -> {}", axis_mg.len(), opts.out_path("amp_sweep.csv").display());
    Ok(())
}

/// `<sigma_x>` of both branches versus tone frequency (Hz) at fixed RMS
/// amplitude; writes `freq_sweep.csv`. Without an explicit `rescale` this
/// reproduction applies the 0.93 factor.
pub fn freq_sweep(opts: &Options) -> Result<()> {
    let mut file = opts.load()?;
    file.experiment.rescale = file.rescale_or(0.93);
    let axis_hz = opts.axis_or(linspace(20.0, 55.0, 71))?;
    if axis_hz.iter().any(|&f| f <= 0.0) {
        bail!("freq-sweep: frequencies must be positive");
    }
    let sweep = frequency_sweep(
        &file.experiment,
        &axis_hz,
        file.noise_rms_tesla,
        ExecutionMode::Parallel,
    )?;
    let csv = output::sweep_csv(&axis_hz, &sweep)?;
    output::write_atomic(&opts.out_path("freq_sweep.csv"), &csv)?;
    println!(
        "freq-sweep: {} points -> {}",
        axis_hz.len(),
        opts.out_path("freq_sweep.csv").display()
    );
    Ok(())
}

/// Grid-averaged phase statistics per tone frequency; writes `phase_map.csv`.
pub fn phase_map(opts: &Options) -> Result<()> {
    let file = opts.load()?;
    let axis_hz = opts.axis_or(linspace(5.0, 120.0, 231))?;
    if axis_hz.iter().any(|&f| f <= 0.0) {
        bail!("phase-map: frequencies must be positive");
    }
    let experiment = &file.experiment;
    let points = phase_correlation_spectrum(
        &axis_hz,
        &experiment.data_channel()?,
        &experiment.spectator_channel()?,
        file.noise_rms_tesla,
        experiment.grid_resolution_deg,
    )?;
    let excluded: usize = points.iter().map(|p| p.excluded).sum();
    let csv = output::correlation_csv(&points);
    output::write_atomic(&opts.out_path("phase_map.csv"), &csv)?;
    println!(
        "phase-map: {} frequencies ({excluded} grid points excluded from ratios) -> {}",
        axis_hz.len(),
        opts.out_path("phase_map.csv").display()
    );
    Ok(())
}

/// Print the noise-free gain factor with its statistical error.
pub fn gain(opts: &Options) -> Result<()> {
    let file = opts.load()?;
    let estimate = noise_free_gain(&file.experiment, GAIN_SHOTS)?;
    println!(
        "noise-free gain f_on = {:.4} +- {:.4} ({} shots, N = {}, C = {}, seed {})",
        estimate.mean,
        estimate.std_error,
        estimate.shots,
        file.experiment.readout.n_spectators(),
        file.experiment.readout.c(),
        file.experiment.seed,
    );
    Ok(())
}

/// Fit a named model to a two-column CSV; writes `fit_result.csv`.
pub fn fit(opts: &Options, model: &str, input: &Path) -> Result<()> {
    let (xs, ys) = output::read_xy_csv(input)?;
    let fitted: FitResult = match model {
        "cosine" => fit_cosine(&xs, &ys),
        "stretched-exp" => fit_stretched_exponential(&xs, &ys),
        "ramsey" => fit_ramsey(&xs, &ys),
        "logistic-reload" => fit_logistic_reload(&xs, &ys),
        other => bail!(
            "unknown fit model `{other}` (expected cosine, stretched-exp, ramsey, or logistic-reload)"
        ),
    }
    .map_err(|e| anyhow!("fit `{model}` on {}: {e}", input.display()))?;

    let csv = output::fit_csv(&fitted);
    output::write_atomic(&opts.out_path("fit_result.csv"), &csv)?;
    let summary: Vec<String> =
        fitted.params().map(|(name, value)| format!("{name} = {value:.6}")).collect();
    println!("fit {model}: {} (converged: {})", summary.join(", "), fitted.converged);
    if model == "logistic-reload" && fitted.converged {
        if let Ok(t_sat) = reload_saturation_time(&fitted) {
            println!("saturation time (1 - 1/e of asymptote): {:.4} s", t_sat);
        }
    }
    Ok(())
}

/// Fit a bimodal Poisson model to a count histogram; writes
/// `histogram_fit.csv` including the discrimination fidelity.
pub fn histogram(opts: &Options, input: &Path) -> Result<()> {
    let counts = output::read_histogram_csv(input)?;
    let mixture = fit_poisson_mixture(&counts)
        .map_err(|e| anyhow!("histogram fit on {}: {e}", input.display()))?;
    let eta = discrimination_fidelity(&mixture);
    let csv = output::mixture_csv(&mixture, eta);
    output::write_atomic(&opts.out_path("histogram_fit.csv"), &csv)?;
    println!(
        "histogram: lambda0 = {:.3}, lambda1 = {:.3}, weight = {:.3}, threshold = {}, eta = {:.4}",
        mixture.lambda0, mixture.lambda1, mixture.weight, mixture.threshold, eta
    );
    Ok(())
}
