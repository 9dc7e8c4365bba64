//! Species constants and the second-order Zeeman frequency model.
//!
//! Both qubit species are encoded in magnetically insensitive hyperfine clock
//! states, so the leading field dependence of the transition frequency is
//! quadratic: `f(B) = f0 + gamma * |B|^2`. All quantities are SI (Tesla, Hz,
//! seconds); milligauss values are converted at the boundary.

use crate::error::{Error, Result};

/// Tesla per milligauss (1 mG = 1e-7 T).
pub const TESLA_PER_MILLIGAUSS: f64 = 1e-7;

/// Convert a field value in milligauss to Tesla.
pub fn milligauss_to_tesla(mg: f64) -> f64 {
    mg * TESLA_PER_MILLIGAUSS
}

/// Convert a field value in Tesla to milligauss.
pub fn tesla_to_milligauss(tesla: f64) -> f64 {
    tesla / TESLA_PER_MILLIGAUSS
}

/// Physical constants of one qubit species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Species {
    pub name: &'static str,
    /// Zero-field clock transition frequency (Hz).
    pub zero_field_hz: f64,
    /// Second-order Zeeman coefficient (Hz / T^2).
    pub zeeman_hz_per_t2: f64,
}

impl Species {
    /// Rubidium-87 data-qubit clock transition.
    pub const fn rubidium() -> Self {
        Species {
            name: "Rb",
            zero_field_hz: 6_834_682_611.0,
            zeeman_hz_per_t2: 575.15e8,
        }
    }

    /// Cesium-133 spectator-qubit clock transition.
    pub const fn cesium() -> Self {
        Species {
            name: "Cs",
            zero_field_hz: 9_192_631_770.0,
            zeeman_hz_per_t2: 427.45e8,
        }
    }

    /// Custom species; both constants must be positive.
    pub fn new(name: &'static str, zero_field_hz: f64, zeeman_hz_per_t2: f64) -> Result<Self> {
        if !(zero_field_hz > 0.0) || !(zeeman_hz_per_t2 > 0.0) {
            return Err(Error::domain(format!(
                "species {name}: zero_field_hz and zeeman_hz_per_t2 must be positive"
            )));
        }
        Ok(Species { name, zero_field_hz, zeeman_hz_per_t2 })
    }
}

/// Static bias field at which the qubits are operated (Tesla components).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasField {
    pub bx_tesla: f64,
    pub by_tesla: f64,
    pub bz_tesla: f64,
}

impl BiasField {
    pub fn new(bx_tesla: f64, by_tesla: f64, bz_tesla: f64) -> Self {
        BiasField { bx_tesla, by_tesla, bz_tesla }
    }

    pub fn from_milligauss(bx: f64, by: f64, bz: f64) -> Self {
        BiasField::new(
            milligauss_to_tesla(bx),
            milligauss_to_tesla(by),
            milligauss_to_tesla(bz),
        )
    }

    /// Field magnitude |B| in Tesla.
    pub fn magnitude_tesla(&self) -> f64 {
        (self.bx_tesla * self.bx_tesla
            + self.by_tesla * self.by_tesla
            + self.bz_tesla * self.bz_tesla)
            .sqrt()
    }
}

impl Default for BiasField {
    /// Operating point used throughout: {314, 183, 357} mG, |B| ≈ 509 mG.
    fn default() -> Self {
        BiasField::from_milligauss(314.0, 183.0, 357.0)
    }
}

/// Clock transition frequency at field magnitude `b_mag` (Tesla).
pub fn clock_frequency(species: &Species, b_mag: f64) -> Result<f64> {
    if b_mag < 0.0 {
        return Err(Error::domain(format!(
            "clock_frequency: field magnitude must be >= 0, got {b_mag}"
        )));
    }
    Ok(species.zero_field_hz + species.zeeman_hz_per_t2 * b_mag * b_mag)
}

/// Instantaneous frequency shift (Hz) when the z-field moves from `bz` to
/// `bz + delta_bz`: `gamma * ((bz + delta_bz)^2 - bz^2)`.
pub fn instantaneous_shift(species: &Species, bz: f64, delta_bz: f64) -> f64 {
    let shifted = bz + delta_bz;
    species.zeeman_hz_per_t2 * (shifted * shifted - bz * bz)
}
