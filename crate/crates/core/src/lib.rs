//! Support matrix machine (SMM) solvers.
//!
//! The SMM classifier solves
//!
//! ```text
//! min_{W,b}  ½‖W‖²_F + τ‖W‖_* + C Σᵢ max{1 − yᵢ(⟨W, Xᵢ⟩ + b), 0}
//! ```
//!
//! over matrix-valued samples `Xᵢ ∈ R^{p×q}`. The crate provides
//!
//! - [`alm`]: an inexact augmented Lagrangian method whose subproblems are
//!   solved by a semismooth Newton-CG method ([`sncg`]). Newton systems are
//!   restricted to the samples strictly inside the box and to the rank of
//!   the current iterate, so their cost does not grow with `n`.
//! - [`admm`]: two first-order baselines (isPADMM and sGS-isPADMM).
//! - [`sieving`]: adaptive sieving along a grid of `C` values.
//! - [`data`]: synthetic generation, dataset/model files, prediction.

pub mod admm;
pub mod alm;
pub mod data;
pub mod error;
pub mod model;
pub mod prox;
pub mod report;
pub mod sieving;
pub mod sncg;
pub mod spectral;

pub use error::{Result, SmmError};
pub use model::{
    classify_samples, dual_objective, kkt_residual, primal_objective, Dataset, DualPoint,
    Hyperparams, KktResidual, PrimalPoint, SampleClassification,
};

pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;

/// Relative objective gap `|obj − ref| / (1 + |ref|)`.
pub fn relobj(obj: f64, reference: f64) -> f64 {
    (obj - reference).abs() / (1.0 + reference.abs())
}
