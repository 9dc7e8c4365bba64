//! Simulation toolkit for spectator-qubit feed-forward protocols on
//! dual-species atom arrays.
//!
//! The crate models how magnetic-field noise dephases two co-trapped qubit
//! species under dynamical decoupling, how a spectator ensemble estimates the
//! accrued phase from a single shot-noise-limited mid-circuit readout, and how
//! a real-time feed-forward correction recovers data-qubit coherence. On top
//! of the physics sit a deterministic Monte Carlo sweep engine and the
//! curve-fitting machinery used to reduce simulated (or measured) data.
//!
//! Modules:
//! - [`physics`]: species constants and the second-order Zeeman frequency model
//! - [`sequence`]: π-pulse trains and their ±1 toggling function
//! - [`noise`]: phase accrual under a sinusoidal field tone (closed form + quadrature)
//! - [`estimation`]: readout model, phase inversion, feed-forward law
//! - [`montecarlo`]: shot/sweep simulation engine with reproducible seeding
//! - [`fitting`]: Levenberg–Marquardt fits for every model curve, plus
//!   Poisson-mixture readout discrimination

pub mod error;
pub mod estimation;
pub mod fitting;
pub mod montecarlo;
pub mod noise;
pub mod physics;
pub mod sequence;

pub use error::{Error, Result};
pub use estimation::{FeedforwardLaw, ReadoutModel};
pub use montecarlo::{ExecutionMode, ExperimentConfig, PhaseSample, SweepPoint, SweepResult};
pub use noise::{ChannelConfig, NoiseTone, PhaseGrid};
pub use physics::{BiasField, Species};
pub use sequence::DecouplingSequence;
