//! Solver diagnostics shared by every solver.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{
    classify_samples, default_classify_tol, dual_objective, DualPoint, Hyperparams, KktResidual,
    PrimalPoint, Problem,
};
use crate::spectral::{SpectralJacobian, ThinSvd};

/// One outer iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub kkt: KktResidual,
    pub objective: f64,
    /// Penalty parameter (`σ` for ALM, `γ` for the ADMMs).
    pub sigma: f64,
    pub inner_iters: usize,
    pub cg_iters: usize,
    /// `|J₁|` at the last Newton step, if any.
    pub j1: Option<usize>,
    /// `|α|` at the last Newton step, if any.
    pub alpha: Option<usize>,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: String,
    pub converged: bool,
    pub iterations: usize,
    pub inner_iterations: usize,
    pub cg_iterations: usize,
    pub eta_kkt: f64,
    pub kkt: KktResidual,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub dual_feasible: bool,
    /// Relative gap to a reference objective, when one was supplied.
    pub relobj: Option<f64>,
    /// `|{j : 0 < (−λ)ⱼ < C}|` with strict comparisons.
    pub j1: usize,
    /// `|{i : νᵢ(Λ + W) > τ}|`, the rank detected by the spectral Jacobian.
    pub alpha: usize,
    /// Number of singular values of `W` above `1e-8·max(ν₁, 1)`.
    pub rank_w: usize,
    pub n_support: usize,
    pub n_active_support: usize,
    pub classify_tol: f64,
    pub sigma_final: f64,
    pub wall_time_s: f64,
    pub threads: usize,
    pub history: Vec<IterRecord>,
    pub notes: Vec<String>,
}

/// Primal-dual pair plus diagnostics.
#[derive(Debug, Clone)]
pub struct Solution {
    pub primal: PrimalPoint,
    pub dual: DualPoint,
    pub report: SolveReport,
}

impl Solution {
    pub fn objective(&self) -> f64 {
        self.report.primal_objective
    }

    pub fn eta_kkt(&self) -> f64 {
        self.report.eta_kkt
    }
}

/// Fields of a [`SolveReport`] computed from the final point alone.
pub(crate) struct FinalMetrics {
    pub kkt: KktResidual,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub dual_feasible: bool,
    pub j1: usize,
    pub alpha: usize,
    pub rank_w: usize,
    pub n_support: usize,
    pub n_active_support: usize,
    pub classify_tol: f64,
}

pub(crate) fn final_metrics(
    problem: &Problem<'_>,
    primal: &PrimalPoint,
    dual: &DualPoint,
) -> Result<FinalMetrics> {
    let ds = problem.dataset;
    let hyper: Hyperparams = problem.hyper;
    let kkt = problem.kkt_residual(primal, dual)?;
    let primal_objective = problem.objective(&primal.w, primal.b)?;
    let dv = dual_objective(ds, &hyper, &dual.lambda, &dual.lambda_mat)?;
    let tol = default_classify_tol(hyper.c);
    let cls = classify_samples(&dual.lambda, hyper.c, tol);
    let j1 = dual
        .lambda
        .iter()
        .filter(|&&l| -l > 0.0 && -l < hyper.c)
        .count();
    let alpha = if hyper.tau > 0.0 {
        SpectralJacobian::build(&(&dual.lambda_mat + &primal.w), hyper.tau)?.alpha_len()
    } else {
        0
    };
    let nu = ThinSvd::compute(&primal.w)?.nu;
    let floor = 1e-8 * nu.first().copied().unwrap_or(0.0).max(1.0);
    let rank_w = nu.iter().filter(|&&s| s > floor).count();
    Ok(FinalMetrics {
        kkt,
        primal_objective,
        dual_objective: dv.value,
        dual_feasible: dv.feasibility.is_feasible(),
        j1,
        alpha,
        rank_w,
        n_support: cls.n_support(),
        n_active_support: cls.n_active_support(),
        classify_tol: tol,
    })
}

impl SolveReport {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        solver: &str,
        m: FinalMetrics,
        converged: bool,
        iterations: usize,
        inner_iterations: usize,
        cg_iterations: usize,
        sigma_final: f64,
        wall_time_s: f64,
        history: Vec<IterRecord>,
        reference: Option<f64>,
    ) -> Self {
        Self {
            solver: solver.to_string(),
            converged,
            iterations,
            inner_iterations,
            cg_iterations,
            eta_kkt: m.kkt.eta,
            kkt: m.kkt,
            primal_objective: m.primal_objective,
            dual_objective: m.dual_objective,
            dual_feasible: m.dual_feasible,
            relobj: reference.map(|r| crate::relobj(m.primal_objective, r)),
            j1: m.j1,
            alpha: m.alpha,
            rank_w: m.rank_w,
            n_support: m.n_support,
            n_active_support: m.n_active_support,
            classify_tol: m.classify_tol,
            sigma_final,
            wall_time_s,
            threads: 1,
            history,
            notes: Vec::new(),
        }
    }
}
