//! Flat sectioned key=value configuration files.
//!
//! Keys mirror the simulation config field names; values use presentation
//! units (ms for times, mG for fields, Hz for frequencies) and are converted
//! to SI at parse time. Unknown sections or keys are errors, not warnings,
//! and every default equals the experiment's operating point, so an empty
//! file (or no file at all) reproduces the published configuration.
//!
//! ```text
//! [experiment]
//! tau = 6.906              # ms
//! spectator_blocks = 6
//! data_blocks = 8
//! d_contrast = 0.60
//! analysis_phases = 10     # uniform phases over [0, 2 pi)
//! reps_per_phase = 80
//! mc_instances = 100
//! grid_resolution_deg = 0.1
//! rescale = 1.0            # omitted: 1.0 (amp-sweep), 0.93 (freq-sweep)
//! seed = 1
//!
//! [noise]
//! rms = 10.7               # mG
//!
//! [bias]
//! bx = 314                 # mG
//! by = 183
//! bz = 357
//!
//! [readout]
//! n_spectators = 61
//! a = 0.62
//! c = 0.46
//!
//! [law]
//! beta = 1.35
//! time_ratio = 1.3333333333333333
//! ```

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use spectator_core::montecarlo::{uniform_phases, ExperimentConfig};
use spectator_core::physics::milligauss_to_tesla;
use spectator_core::{BiasField, FeedforwardLaw, ReadoutModel};

/// Parsed configuration: a validated experiment config plus the values whose
/// defaults depend on the subcommand.
#[derive(Debug, Clone)]
pub struct FileConfig {
    pub experiment: ExperimentConfig,
    /// Explicit `rescale`, if the file set one.
    pub rescale: Option<f64>,
    /// Fixed tone RMS amplitude (Tesla) for frequency sweeps and phase maps.
    pub noise_rms_tesla: f64,
}

impl FileConfig {
    /// Rescale factor with a per-subcommand fallback.
    pub fn rescale_or(&self, default: f64) -> f64 {
        self.rescale.unwrap_or(default)
    }
}

impl Default for FileConfig {
    fn default() -> Self {
        FileConfig {
            experiment: ExperimentConfig::default(),
            rescale: None,
            noise_rms_tesla: milligauss_to_tesla(10.7),
        }
    }
}

/// Parse a config file; `None` yields all defaults.
pub fn parse_config(path: Option<&Path>) -> Result<FileConfig> {
    let mut config = FileConfig::default();
    let Some(path) = path else {
        return Ok(config);
    };
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    apply(&mut config, &text)?;
    config
        .experiment
        .validate()
        .map_err(|e| anyhow!("config file {}: {e}", path.display()))?;
    Ok(config)
}

/// Parse config text onto defaults (exposed for tests).
pub fn parse_config_str(text: &str) -> Result<FileConfig> {
    let mut config = FileConfig::default();
    apply(&mut config, text)?;
    config.experiment.validate().map_err(|e| anyhow!("config: {e}"))?;
    Ok(config)
}

fn apply(config: &mut FileConfig, text: &str) -> Result<()> {
    // Readout and law fields are collected and re-validated as a whole so a
    // file can change `a` and `c` together.
    let readout = config.experiment.readout;
    let mut n_spectators = readout.n_spectators();
    let mut offset_a = readout.a();
    let mut contrast_c = readout.c();
    let mut beta = config.experiment.law.beta;
    let mut time_ratio = config.experiment.law.time_ratio;
    let mut bias_mg = (314.0, 183.0, 357.0);

    let mut section = String::new();
    for (line_no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = name.trim().to_string();
            if !["experiment", "noise", "bias", "readout", "law"].contains(&section.as_str()) {
                bail!("line {}: unknown section [{section}]", line_no + 1);
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("line {}: expected `key = value`, got `{line}`", line_no + 1);
        };
        let key = key.trim();
        let value = value.trim();
        let exp = &mut config.experiment;
        match (section.as_str(), key) {
            ("experiment", "tau") => exp.tau = parse_f64(key, value)? * 1e-3,
            ("experiment", "spectator_blocks") => exp.spectator_blocks = parse_usize(key, value)?,
            ("experiment", "data_blocks") => exp.data_blocks = parse_usize(key, value)?,
            ("experiment", "d_contrast") => exp.d_contrast = parse_f64(key, value)?,
            ("experiment", "analysis_phases") => {
                let count = parse_usize(key, value)?;
                if count == 0 {
                    bail!("key `analysis_phases` must be >= 1");
                }
                exp.analysis_phases = uniform_phases(count);
            }
            ("experiment", "reps_per_phase") => exp.reps_per_phase = parse_usize(key, value)?,
            ("experiment", "mc_instances") => exp.mc_instances = parse_usize(key, value)?,
            ("experiment", "grid_resolution_deg") => {
                exp.grid_resolution_deg = parse_f64(key, value)?
            }
            ("experiment", "rescale") => config.rescale = Some(parse_f64(key, value)?),
            ("experiment", "seed") => exp.seed = parse_u64(key, value)?,
            ("noise", "rms") => {
                let rms_mg = parse_f64(key, value)?;
                if rms_mg < 0.0 {
                    bail!("key `rms` must be >= 0 mG, got {rms_mg}");
                }
                config.noise_rms_tesla = milligauss_to_tesla(rms_mg);
            }
            ("bias", "bx") => bias_mg.0 = parse_f64(key, value)?,
            ("bias", "by") => bias_mg.1 = parse_f64(key, value)?,
            ("bias", "bz") => bias_mg.2 = parse_f64(key, value)?,
            ("readout", "n_spectators") => n_spectators = parse_u64(key, value)?,
            ("readout", "a") => offset_a = parse_f64(key, value)?,
            ("readout", "c") => contrast_c = parse_f64(key, value)?,
            ("law", "beta") => beta = parse_f64(key, value)?,
            ("law", "time_ratio") => time_ratio = parse_f64(key, value)?,
            ("", key) => bail!("line {}: key `{key}` appears before any [section]", line_no + 1),
            (section, key) => {
                bail!("line {}: unknown key `{key}` in section [{section}]", line_no + 1)
            }
        }
    }

    config.experiment.bias = BiasField::from_milligauss(bias_mg.0, bias_mg.1, bias_mg.2);
    config.experiment.readout = ReadoutModel::new(n_spectators, offset_a, contrast_c)
        .map_err(|e| anyhow!("[readout]: {e}"))?;
    config.experiment.law =
        FeedforwardLaw::new(beta, time_ratio).map_err(|e| anyhow!("[law]: {e}"))?;
    if let Some(rescale) = config.rescale {
        config.experiment.rescale = rescale;
    }
    Ok(())
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    let parsed: f64 =
        value.parse().map_err(|_| anyhow!("key `{key}`: expected a number, got `{value}`"))?;
    if !parsed.is_finite() {
        bail!("key `{key}`: value must be finite, got `{value}`");
    }
    Ok(parsed)
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value.parse().map_err(|_| anyhow!("key `{key}`: expected a non-negative integer, got `{value}`"))
}

fn parse_u64(key: &str, value: &str) -> Result<u64> {
    value.parse().map_err(|_| anyhow!("key `{key}`: expected a non-negative integer, got `{value}`"))
}

/// Parse a sweep axis override of the form `start:stop:count`.
pub fn parse_points(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, count] = parts.as_slice() else {
        bail!("--points expects `start:stop:count`, got `{spec}`");
    };
    let start: f64 = start.parse().map_err(|_| anyhow!("--points: bad start `{start}`"))?;
    let stop: f64 = stop.parse().map_err(|_| anyhow!("--points: bad stop `{stop}`"))?;
    let count: usize = count.parse().map_err(|_| anyhow!("--points: bad count `{count}`"))?;
    if !start.is_finite() || !stop.is_finite() {
        bail!("--points: start and stop must be finite");
    }
    if count == 0 || count > 100_000 {
        bail!("--points: count must lie in 1..=100000, got {count}");
    }
    Ok(linspace(start, stop, count))
}

/// `count` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![start];
    }
    let step = (stop - start) / (count - 1) as f64;
    (0..count).map(|i| start + step * i as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_all_defaults() {
        let config = parse_config_str("").unwrap();
        let defaults = ExperimentConfig::default();
        assert_eq!(config.experiment, defaults);
        assert_eq!(config.rescale, None);
        assert_eq!(config.noise_rms_tesla, milligauss_to_tesla(10.7));
    }

    #[test]
    fn full_override_round_trip() {
        let text = "\
[experiment]
tau = 5.0        # ms
spectator_blocks = 4
data_blocks = 6
d_contrast = 0.5
analysis_phases = 8
reps_per_phase = 40
mc_instances = 10
grid_resolution_deg = 0.5
rescale = 0.93
seed = 99

[noise]
rms = 8.4

[bias]
bx = 100
by = 50
bz = 200

[readout]
n_spectators = 120
a = 0.55
c = 0.4

[law]
beta = 1.2
time_ratio = 1.5
";
        let config = parse_config_str(text).unwrap();
        let exp = &config.experiment;
        assert_eq!(exp.tau, 5.0e-3);
        assert_eq!(exp.spectator_blocks, 4);
        assert_eq!(exp.data_blocks, 6);
        assert_eq!(exp.analysis_phases.len(), 8);
        assert_eq!(exp.reps_per_phase, 40);
        assert_eq!(exp.mc_instances, 10);
        assert_eq!(exp.seed, 99);
        assert_eq!(exp.rescale, 0.93);
        assert_eq!(config.rescale, Some(0.93));
        assert_eq!(config.noise_rms_tesla, milligauss_to_tesla(8.4));
        assert_eq!(exp.bias, BiasField::from_milligauss(100.0, 50.0, 200.0));
        assert_eq!(exp.readout.n_spectators(), 120);
        assert_eq!(exp.law.beta, 1.2);
    }

    #[test]
    fn published_readout_point_is_accepted() {
        let config = parse_config_str("[readout]\na = 0.62\nc = 0.46\n").unwrap();
        assert_eq!(config.experiment.readout.a(), 0.62);
        assert_eq!(config.experiment.readout.c(), 0.46);
    }

    #[test]
    fn invalid_readout_point_is_rejected() {
        // a + c/2 would exceed 1: not a valid binomial probability.
        let err = parse_config_str("[readout]\na = 0.9\nc = 0.46\n").unwrap_err();
        assert!(err.to_string().contains("readout"), "{err}");
    }

    #[test]
    fn unknown_keys_and_sections_are_errors() {
        assert!(parse_config_str("[experiment]\nbogus = 1\n").is_err());
        assert!(parse_config_str("[warp]\nfactor = 9\n").is_err());
        assert!(parse_config_str("orphan = 1\n").is_err());
    }

    #[test]
    fn type_mismatches_name_the_key() {
        let err = parse_config_str("[experiment]\ntau = fast\n").unwrap_err();
        assert!(err.to_string().contains("tau"), "{err}");
        let err = parse_config_str("[experiment]\nseed = -3\n").unwrap_err();
        assert!(err.to_string().contains("seed"), "{err}");
    }

    #[test]
    fn points_parsing() {
        assert_eq!(parse_points("0:20:41").unwrap().len(), 41);
        assert_eq!(parse_points("5:5:1").unwrap(), vec![5.0]);
        let axis = parse_points("20:55:71").unwrap();
        assert_eq!(axis[0], 20.0);
        assert_eq!(*axis.last().unwrap(), 55.0);
        assert!(parse_points("1:2").is_err());
        assert!(parse_points("a:2:3").is_err());
        assert!(parse_points("1:2:0").is_err());
    }
}
