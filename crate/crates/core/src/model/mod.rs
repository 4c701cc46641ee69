//! Problem data, variable blocks, objectives and the KKT residual.

mod classify;
mod dataset;
mod points;
mod problem;

pub use classify::{classify_samples, default_classify_tol, SampleClassification};
pub use dataset::Dataset;
pub use points::{DualPoint, Hyperparams, PrimalPoint};
pub use problem::{
    dual_objective, kkt_residual, primal_objective, raw_kkt_residuals, DualFeasibility,
    DualValue, KktResidual, Problem, RawKktResiduals,
};

pub(crate) use dataset::{axpy, dot};
