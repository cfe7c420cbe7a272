//! Spectral numerics for local limit theorems of time-inhomogeneous additive
//! functionals `S_T = ∫₀ᵀ b(s/T, X_s) ds` of an ergodic finite-state
//! continuous-time Markov chain.
//!
//! The crate is `no_std` (with `alloc`). Everything here is deterministic:
//! matrix exponentials, Fourier-twisted transition operators, their dominant
//! eigentriples, the diffusion matrix, and exact path functionals driven by
//! counter-based random streams. Parallel Monte Carlo drivers, file formats
//! and the command line live in the `markov-llt` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod kernel;
pub mod linalg;
pub mod model;
pub mod observable;
pub mod quadrature;
pub mod rng;
pub mod simulate;
pub mod spectral;
pub mod variance;

pub use error::{Error, Result};
pub use kernel::{FourierOperator, PropagatorConfig, PropagatorMethod};
pub use linalg::{CMat, Mat, RMat};
pub use model::{GeneratorModel, TransitionMatrix};
pub use num_complex::Complex64;
pub use observable::{Observable, ObservableFn};
pub use spectral::SpectralDecomposition;
pub use variance::{Corrector, SigmaMatrix};
