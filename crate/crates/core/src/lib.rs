//! Device-independent certification of qubit steering assemblages.
//!
//! The crate evaluates the affine robust self-testing bound for the CHSH-type
//! assemblage, checks the operator inequalities it rests on, computes the
//! classical-fidelity threshold, and cross-checks the analytic bound against a
//! numerical min-max search.
//!
//! Module map:
//! - [`matkernel`]: 2×2 / 4×4 complex matrix algebra.
//! - [`assemblage`]: assemblages, quantum realizations, classical strategies.
//! - [`steering`]: Bob's observables and the CHSH steering functional.
//! - [`fidelity`]: state and assemblage fidelity, classical fidelity.
//! - [`selftest`]: extraction channels, operator inequalities, bound coefficients.
//! - [`numsearch`]: see-saw search for minimum extractability.
//! - [`cli`]: the `steerbound` command-line front end.

pub mod assemblage;
pub mod cli;
pub mod error;
pub mod fidelity;
pub mod linesearch;
pub mod matkernel;
pub mod numsearch;
pub mod output;
pub mod selftest;
pub mod steering;

pub use assemblage::{Assemblage, ClassicalStrategy, QuantumRealization, ValidationReport};
pub use error::{Error, Result};
pub use fidelity::FidelityValue;
pub use matkernel::{HermitianMat, Matrix, C64};
pub use selftest::{BoundCoefficients, ExtractionChannel};
pub use steering::{BobObservables, SteeringFunctional};
