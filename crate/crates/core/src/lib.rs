//! Adjoint-centred numerical toolkit on dense finite-dimensional spaces.
//!
//! Every operator carries the inner products of its domain and codomain, so
//! its adjoint is computed (and machine-checked) in those inner products.
//! On top of that contract sit the self-adjoint eigensolver and SVD, least
//! squares and Tikhonov regularization, reduced-gradient optimization with
//! adjoint solves, backpropagation as a special case, Lyapunov/Hurwitz
//! stability analysis, discretized Sturm-Liouville spectra and two
//! PDE-constrained control problems. [`selftest`] bundles cross-module
//! invariant suites.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix `f64`, which is what the tolerances in the test suites
//! are calibrated for.

pub mod error;
pub mod inverse;
pub mod linalg;
pub mod neural;
pub mod operator;
pub mod optim;
pub mod pde;
pub mod rng;
pub mod scalar;
pub mod selftest;
pub mod spectral;
pub mod stability;
pub mod sturm;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = linalg::Matrix<f64>;
pub type InnerProductSpace = operator::InnerProductSpace<f64>;
pub type DenseOperator = operator::DenseOperator<f64>;
pub type EigResult = spectral::EigResult<f64>;
pub type SvdResult = spectral::SvdResult<f64>;
pub type TikhonovSolution = inverse::TikhonovSolution<f64>;
pub type Parameters = neural::Parameters<f64>;
pub type NetworkProblem = neural::NetworkProblem<f64>;
pub type StabilityReport = stability::StabilityReport<f64>;
pub type ModeSet = sturm::ModeSet<f64>;
pub type AdvectionProblem = pde::AdvectionProblem<f64>;
pub type EllipticProblem = pde::EllipticProblem<f64>;
pub type PdeProblem = pde::PdeProblem<f64>;
