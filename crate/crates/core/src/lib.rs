//! Sparse phase retrieval from noiseless Gaussian magnitude measurements.
//!
//! The crate provides:
//!
//! * [`model`]: signal generators, measurement synthesis and the sign-invariant distance,
//! * [`risk`]: the quartic empirical risk, its gradient and the population-level oracles,
//! * [`hwf`]: Hadamard Wirtinger flow, i.e. gradient descent on `x = u⊙u − v⊙v`
//!   with a spiked initialization and sparsity-based restart selection,
//! * [`support`]: one-step support recovery and the marginal-statistics baseline,
//! * [`sparta`]: sparse truncated amplitude flow and the SPARTA-support pipeline,
//! * [`harness`]: seeded Monte Carlo sweeps, CSV/SVG output and the `hwf` CLI.

pub mod error;
pub mod harness;
pub mod hwf;
pub mod model;
pub mod risk;
pub mod sparta;
pub mod support;

mod dense;
mod select;

pub use error::{Error, Result};
pub use hwf::{HwfConfig, HwfState, RunResult, StopReason};
pub use model::{MeasurementSet, SignalModel, SparseSignal};
pub use sparta::SpartaConfig;
pub use support::{SupportEstimate, SupportMethod};
