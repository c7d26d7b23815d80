//! Detection of binary and QPSK symbols sent through underdetermined noisy
//! linear systems, as arise in frame-based faster-than-Nyquist signaling.
//!
//! The main detector ([`soav::fista_detect`]) solves a sum-of-absolute-values
//! regularized least-squares problem with FISTA and slices the solution.
//! [`baselines`] holds an ℓ∞-minimization detector and an exhaustive ML
//! oracle for comparison, and [`harness`] runs seeded Monte Carlo BER and
//! timing experiments over all of them.

pub mod baselines;
pub mod error;
pub mod fista;
pub mod harness;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod selfcheck;
pub mod soav;

pub use baselines::{linf_detect, ml_oracle, project_l1_ball, Epsilon, LinfConfig, MlConfig};
pub use error::{Error, Result};
pub use model::{
    ChannelConfig, ComplexModulationMatrix, Modulation, RealLinearSystem, SymbolVector,
};
pub use soav::{decide, fista_detect, grad_f, objective, prox_soav, DetectionResult, Lipschitz, SoavConfig};
