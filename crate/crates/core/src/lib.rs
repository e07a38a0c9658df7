//! Filtered-noise gate set tomography for a single driven qubit.
//!
//! The crate models a five-gate single-qubit gate set whose errors come from
//! time-correlated (coloured) detuning and Rabi-rate noise. Each gate channel is
//! parametrized by a handful of filtered integrals of the noise power spectral
//! density, which keeps the model free of gauge redundancy in the gates and
//! lets long-sequence tomography estimate them with very few circuits.
//!
//! Layout:
//!
//! - [`noise`]: Ornstein–Uhlenbeck processes, covariance, spectral densities.
//! - [`quad`]: adaptive Gauss–Kronrod quadrature.
//! - [`filters`]: filter functions, filtered integrals, Θ, non-Markovianity.
//! - [`channels`]: χ-matrix and Pauli-transfer-matrix channels and distances.
//! - [`gateset`]: the gate set, model variants, packing and constraints.
//! - [`design`]: circuits, probabilities, fiducial pair selection.
//! - [`simulator`]: analytic and Monte Carlo data generation.
//! - [`estimation`]: linear inversion, constrained MLE, general baseline, gauge.

pub mod channels;
pub mod design;
pub mod error;
pub mod estimation;
pub mod filters;
pub mod gateset;
pub mod linalg;
pub mod noise;
pub mod quad;
pub mod rng;
pub mod simulator;

pub use channels::{ChiBlocks, ProcessMatrix, Ptm};
pub use design::{Circuit, Dataset, Design};
pub use error::{Error, Result};
pub use estimation::{FitConfig, FitResult};
pub use filters::{FilteredParams, PulseSpec, QuadConfig, ThetaValue};
pub use gateset::{GateId, GateSet, ModelVariant};
pub use noise::{OuParams, PsdModel, StartMode, TimeGrid, Trajectory};
pub use simulator::NoiseConfig;
