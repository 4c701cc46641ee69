//! First-order baselines: isPADMM and sGS-isPADMM.
//!
//! isPADMM splits only `W = U`; its `(W, b)` step is an SMM-like problem
//! without the nuclear norm, solved by ALM-SNCG. sGS-isPADMM splits both
//! constraints and sweeps `b, W, b` in symmetric Gauss-Seidel order.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::alm::{solve_problem, AlmConfig, WarmStart};
use crate::error::{Result, SmmError};
use crate::model::{Dataset, DualPoint, Hyperparams, PrimalPoint, Problem};
use crate::prox::{prox_nuclear, prox_support_fn};
use crate::report::{final_metrics, IterRecord, Solution, SolveReport};
use crate::sncg::{conjugate_gradient_from, CgResult};
use crate::Matrix;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmmConfig {
    /// Penalty `γ`.
    pub gamma: f64,
    /// Dual step length `ζ ∈ (0, (1+√5)/2)`.
    pub zeta: f64,
    /// Proximal weight `δ` on `b` in the isPADMM `(W, b)` step.
    pub delta_prox: f64,
    /// Subproblem error bounds `ε̄_k = eps_bar0/(k+1)²`.
    pub eps_bar0: f64,
    pub max_iter: usize,
    /// Stop once `η_kkt ≤ kkt_tol`.
    pub kkt_tol: Option<f64>,
    /// Stop once `Relobj ≤ tol` against `(reference, tol)`.
    pub relobj_stop: Option<(f64, f64)>,
    pub time_limit: Option<f64>,
    /// Evaluate `η_kkt` every this many iterations.
    pub check_every: usize,
    /// First tolerance tried for an isPADMM inner solve.
    pub inner_tol0: f64,
    /// Smallest inner tolerance before the error bound is given up on.
    pub inner_tol_min: f64,
    /// Settings of the inner ALM; `kkt_tol` is overridden.
    pub inner: AlmConfig,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            zeta: 1.618,
            delta_prox: 1e-6,
            eps_bar0: 1.0,
            max_iter: 30_000,
            kkt_tol: Some(1e-6),
            relobj_stop: None,
            time_limit: None,
            check_every: 1,
            inner_tol0: 1e-3,
            inner_tol_min: 1e-13,
            inner: AlmConfig {
                max_outer_iter: 200,
                ..AlmConfig::default()
            },
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(SmmError::Config("admm: gamma must be > 0".into()));
        }
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        if !(self.zeta > 0.0 && self.zeta < golden) {
            return Err(SmmError::Config(
                "admm: zeta must lie in (0, (1+√5)/2)".into(),
            ));
        }
        if !(self.delta_prox > 0.0) || !(self.eps_bar0 > 0.0) {
            return Err(SmmError::Config(
                "admm: delta_prox and eps_bar0 must be > 0".into(),
            ));
        }
        if self.check_every == 0 {
            return Err(SmmError::Config("admm: check_every must be >= 1".into()));
        }
        if !(self.inner_tol0 > 0.0 && self.inner_tol_min > 0.0) {
            return Err(SmmError::Config(
                "admm: inner tolerances must be > 0".into(),
            ));
        }
        self.inner.validate()
    }

    pub fn eps_bar(&self, k: usize) -> f64 {
        let k1 = (k + 1) as f64;
        self.eps_bar0 / (k1 * k1)
    }
}

/// Per-run bookkeeping shared by both solvers.
struct Monitor<'c> {
    config: &'c AdmmConfig,
    start: Instant,
    history: Vec<IterRecord>,
    notes: Vec<String>,
}

impl<'c> Monitor<'c> {
    fn new(config: &'c AdmmConfig) -> Self {
        Self {
            config,
            start: Instant::now(),
            history: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Records iteration `k` (1-based) and reports whether to stop and why.
    #[allow(clippy::too_many_arguments)]
    fn observe(
        &mut self,
        problem: &Problem<'_>,
        k: usize,
        primal: &PrimalPoint,
        dual: &DualPoint,
        inner_iters: usize,
        cg_iters: usize,
    ) -> Result<Option<bool>> {
        let cfg = self.config;
        let objective = problem.objective(&primal.w, primal.b)?;
        let check = k % cfg.check_every == 0 || k == cfg.max_iter;
        let kkt = if check {
            Some(problem.kkt_residual(primal, dual)?)
        } else {
            None
        };
        if let Some(kkt) = kkt {
            self.history.push(IterRecord {
                iter: k,
                kkt,
                objective,
                sigma: cfg.gamma,
                inner_iters,
                cg_iters,
                j1: None,
                alpha: None,
                elapsed_s: self.start.elapsed().as_secs_f64(),
            });
            if let Some(tol) = cfg.kkt_tol {
                if kkt.eta <= tol {
                    return Ok(Some(true));
                }
            }
        }
        if let Some((reference, tol)) = cfg.relobj_stop {
            if crate::relobj(objective, reference) <= tol {
                self.notes.push("stopped on Relobj".into());
                return Ok(Some(true));
            }
        }
        if let Some(limit) = cfg.time_limit {
            if self.start.elapsed().as_secs_f64() > limit {
                self.notes.push("time limit reached".into());
                return Ok(Some(false));
            }
        }
        Ok(None)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        self,
        solver: &str,
        problem: &Problem<'_>,
        primal: PrimalPoint,
        dual: DualPoint,
        converged: bool,
        iterations: usize,
        inner: usize,
        cg: usize,
    ) -> Result<Solution> {
        let metrics = final_metrics(problem, &primal, &dual)?;
        let mut report = SolveReport::assemble(
            solver,
            metrics,
            converged,
            iterations,
            inner,
            cg,
            self.config.gamma,
            self.start.elapsed().as_secs_f64(),
            self.history,
            self.config.relobj_stop.map(|(r, _)| r),
        );
        report.notes = self.notes;
        Ok(Solution {
            primal,
            dual,
            report,
        })
    }
}

/// State carried between isPADMM iterations.
#[derive(Debug, Clone)]
struct IspadmmState {
    primal: PrimalPoint,
    dual: DualPoint,
    /// Inner ALM penalty, reused as a warm start.
    inner_sigma: Option<f64>,
}

/// Outcome of one isPADMM `(W, b)` step.
struct InnerStep {
    /// `(1/γ)‖d_W‖² + (1/δ)d_b²`
    error: f64,
    newton: usize,
    cg: usize,
    bound_met: bool,
}

fn ispadmm_iteration(
    ds: &Dataset,
    hyper: &Hyperparams,
    cfg: &AdmmConfig,
    st: &mut IspadmmState,
    k: usize,
) -> Result<InnerStep> {
    let gamma = cfg.gamma;
    let (n, p, q) = (ds.n_samples(), ds.rows(), ds.cols());
    let a = 1.0 + gamma;
    let target = (&st.primal.u * gamma - &st.dual.lambda_mat) / a;
    let inner_problem = Problem {
        dataset: ds,
        hyper: Hyperparams {
            c: hyper.c,
            tau: 0.0,
        },
        w_weight: a,
        w_center: Some(target.clone()),
        b_weight: cfg.delta_prox,
        b_center: st.primal.b,
    };
    let eps_bar = cfg.eps_bar(k);
    let mut warm = WarmStart {
        primal: PrimalPoint {
            w: st.primal.w.clone(),
            b: st.primal.b,
            v: st.primal.v.clone(),
            u: st.primal.w.clone(),
        },
        dual: DualPoint {
            lambda: st.dual.lambda.clone(),
            lambda_mat: Matrix::zeros(p, q),
        },
    };
    let mut tol = cfg.inner_tol0;
    let (mut newton, mut cg) = (0, 0);
    loop {
        let mut inner_cfg = cfg.inner.clone();
        inner_cfg.kkt_tol = tol;
        inner_cfg.sigma0 = st.inner_sigma.or(inner_cfg.sigma0);
        inner_cfg.relobj_stop = None;
        inner_cfg.time_limit = None;
        let sol = solve_problem(&inner_problem, &inner_cfg, Some(&warm))?;
        newton += sol.report.inner_iterations;
        cg += sol.report.cg_iterations;
        st.inner_sigma = Some(sol.report.sigma_final);

        let w = &sol.primal.w;
        let b = sol.primal.b;
        let lambda = &sol.dual.lambda;
        let d_w = (w - &target) * a + ds.apply_a_adjoint(lambda)?;
        let d_b = cfg.delta_prox * (b - st.primal.b) + ds.label_vector().dot(lambda);
        let error = d_w.norm_squared() / gamma + d_b * d_b / cfg.delta_prox;
        let bound_met = error <= eps_bar;
        if bound_met || tol <= cfg.inner_tol_min {
            // U-step and Λ-step.
            let prox = prox_nuclear(&(w * gamma + &st.dual.lambda_mat), hyper.tau)?;
            let u = prox.y / gamma;
            st.dual.lambda_mat += (w - &u) * (cfg.zeta * gamma);
            st.dual.lambda = lambda.clone();
            st.primal = PrimalPoint {
                w: w.clone(),
                b,
                v: sol.primal.v.clone(),
                u,
            };
            debug_assert_eq!(st.primal.v.len(), n);
            return Ok(InnerStep {
                error,
                newton,
                cg,
                bound_met,
            });
        }
        tol = (tol * 0.1).max(cfg.inner_tol_min);
        warm = WarmStart {
            primal: sol.primal,
            dual: sol.dual,
        };
    }
}

/// isPADMM from `init` (the origin when absent).
pub fn solve_ispadmm(
    ds: &Dataset,
    hyper: &Hyperparams,
    config: &AdmmConfig,
    init: Option<&WarmStart>,
) -> Result<Solution> {
    config.validate()?;
    hyper.validate()?;
    let (n, p, q) = (ds.n_samples(), ds.rows(), ds.cols());
    let problem = Problem::smm(ds, *hyper);
    let mut st = IspadmmState {
        primal: init.map_or_else(|| PrimalPoint::zeros(n, p, q), |w| w.primal.clone()),
        dual: init.map_or_else(|| DualPoint::zeros(n, p, q), |w| w.dual.clone()),
        inner_sigma: None,
    };
    st.primal.check_shape(ds)?;
    st.dual.check_shape(ds)?;
    let mut mon = Monitor::new(config);
    let (mut total_newton, mut total_cg) = (0, 0);
    let mut converged = false;
    let mut iterations = 0;
    let mut error_sum = 0.0;
    let mut bound_sum = 0.0;
    let mut misses = 0;
    for k in 0..config.max_iter {
        let step = ispadmm_iteration(ds, hyper, config, &mut st, k)?;
        total_newton += step.newton;
        total_cg += step.cg;
        error_sum += step.error;
        bound_sum += config.eps_bar(k);
        if !step.bound_met {
            misses += 1;
        }
        iterations = k + 1;
        if let Some(done) =
            mon.observe(&problem, k + 1, &st.primal, &st.dual, step.newton, step.cg)?
        {
            converged = done;
            break;
        }
    }
    mon.notes.push(format!(
        "inner error sum {error_sum:.3e} vs bound sum {bound_sum:.3e}"
    ));
    if misses > 0 {
        mon.notes.push(format!(
            "inner error bound missed on {misses} iterations at the minimum inner tolerance"
        ));
    }
    mon.finish(
        "ispadmm",
        &problem,
        st.primal,
        st.dual,
        converged,
        iterations,
        total_newton,
        total_cg,
    )
}

/// Runs `n_iters` isPADMM iterations from the origin and returns the
/// iterate as an ALM starting point.
pub fn warm_start(
    ds: &Dataset,
    hyper: &Hyperparams,
    n_iters: usize,
    config: &AdmmConfig,
) -> Result<WarmStart> {
    let (n, p, q) = (ds.n_samples(), ds.rows(), ds.cols());
    let mut st = IspadmmState {
        primal: PrimalPoint::zeros(n, p, q),
        dual: DualPoint::zeros(n, p, q),
        inner_sigma: None,
    };
    if n_iters > 0 {
        config.validate()?;
        hyper.validate()?;
    }
    for k in 0..n_iters {
        ispadmm_iteration(ds, hyper, config, &mut st, k)?;
    }
    Ok(WarmStart {
        primal: st.primal,
        dual: st.dual,
    })
}

/// `(1 + γ)I + γA*A` in a form that can be applied and solved repeatedly.
struct WOperator {
    gamma: f64,
    p: usize,
    q: usize,
    /// Dense `vec` form and its Cholesky factor when `pq` is small.
    dense: Option<(Matrix, nalgebra::Cholesky<f64, nalgebra::Dyn>)>,
}

/// Largest `pq` for which the `W` system is assembled densely.
const DENSE_W_LIMIT: usize = 2500;

impl WOperator {
    fn new(ds: &Dataset, gamma: f64) -> Result<Self> {
        let (p, q) = ds.shape();
        let pq = p * q;
        let dense = if pq <= DENSE_W_LIMIT {
            let mut gram = Matrix::zeros(pq, pq);
            let n = ds.n_samples();
            // Σ vec(Xᵢ)vec(Xᵢ)ᵀ as one rank-n product.
            let xs = Matrix::from_column_slice(pq, n, ds.features());
            gram.gemm(gamma, &xs, &xs.transpose(), 0.0);
            for i in 0..pq {
                gram[(i, i)] += 1.0 + gamma;
            }
            let chol = gram.clone().cholesky().ok_or_else(|| {
                SmmError::Numerical("W-step operator not positive definite".into())
            })?;
            Some((gram, chol))
        } else {
            None
        };
        Ok(Self { gamma, p, q, dense })
    }

    fn apply(&self, ds: &Dataset, w: &Matrix) -> Result<Matrix> {
        match &self.dense {
            Some((m, _)) => {
                let v = m * nalgebra::DVector::from_column_slice(w.as_slice());
                Ok(Matrix::from_column_slice(self.p, self.q, v.as_slice()))
            }
            None => {
                let aw = ds.apply_a(w)?;
                Ok(w * (1.0 + self.gamma) + ds.apply_a_adjoint(&aw)? * self.gamma)
            }
        }
    }

    /// Solves to residual `≤ tol`, warm-started at `x0`.
    fn solve(&self, ds: &Dataset, rhs: &Matrix, x0: Matrix, tol: f64) -> Result<CgResult> {
        if let Some((_, chol)) = &self.dense {
            let v = chol.solve(&nalgebra::DVector::from_column_slice(rhs.as_slice()));
            let x = Matrix::from_column_slice(self.p, self.q, v.as_slice());
            let residual = (rhs - self.apply(ds, &x)?).norm();
            if residual <= tol {
                return Ok(CgResult {
                    x,
                    iters: 0,
                    residual,
                    converged: true,
                });
            }
            // Refine iteratively if rounding left the residual above tol.
            return conjugate_gradient_from(|d| self.apply(ds, d), rhs, x, tol, 50, None);
        }
        conjugate_gradient_from(|d| self.apply(ds, d), rhs, x0, tol, 500, None)
    }
}

/// sGS-isPADMM from `init` (the origin when absent). The `W` step uses
/// `S₁ = 0`.
pub fn solve_sgs_ispadmm(
    ds: &Dataset,
    hyper: &Hyperparams,
    config: &AdmmConfig,
    init: Option<&WarmStart>,
) -> Result<Solution> {
    config.validate()?;
    hyper.validate()?;
    let (n, p, q) = (ds.n_samples(), ds.rows(), ds.cols());
    let problem = Problem::smm(ds, *hyper);
    let gamma = config.gamma;
    let c = hyper.c;
    let y = ds.label_vector();
    let nf = n as f64;

    let (mut x, mut z) = match init {
        Some(ws) => (ws.primal.clone(), ws.dual.clone()),
        None => (PrimalPoint::zeros(n, p, q), DualPoint::zeros(n, p, q)),
    };
    x.check_shape(ds)?;
    z.check_shape(ds)?;
    let op = WOperator::new(ds, gamma)?;
    let mut mon = Monitor::new(config);
    let mut aw = ds.apply_a(&x.w)?;
    let mut converged = false;
    let mut iterations = 0;
    let mut total_cg = 0;
    let mut max_w_residual_ratio: f64 = 0.0;

    for k in 0..config.max_iter {
        // b̄ = −(1/n)yᵀ(AW + v − e + λ/γ)
        let b_of = |aw: &nalgebra::DVector<f64>| {
            let mut s = 0.0;
            for i in 0..n {
                s += y[i] * (aw[i] + x.v[i] - 1.0 + z.lambda[i] / gamma);
            }
            -s / nf
        };
        let b_bar = b_of(&aw);
        // ((1+γ)I + γA*A)W = γU − Λ − A*λ − γA*(b̄y + v − e)
        let mut r = &y * b_bar + &x.v;
        r.add_scalar_mut(-1.0);
        r *= gamma;
        r += &z.lambda;
        let rhs = &x.u * gamma - &z.lambda_mat - ds.apply_a_adjoint(&r)?;
        let eps_bar = config.eps_bar(k);
        let sol = op.solve(ds, &rhs, x.w.clone(), eps_bar)?;
        total_cg += sol.iters;
        max_w_residual_ratio = max_w_residual_ratio.max(sol.residual / eps_bar);
        x.w = sol.x;
        aw = ds.apply_a(&x.w)?;
        x.b = b_of(&aw);

        // v = (1/γ)Prox_{δ*_S}(−λ − γ(AW + by − e))
        let mut arg = &aw + &y * x.b;
        arg.add_scalar_mut(-1.0);
        arg = -&z.lambda - arg * gamma;
        x.v = prox_support_fn(&arg, c) / gamma;
        x.u = prox_nuclear(&(&z.lambda_mat + &x.w * gamma), hyper.tau)?.y / gamma;

        let mut feas = &aw + &y * x.b + &x.v;
        feas.add_scalar_mut(-1.0);
        z.lambda += feas * (config.zeta * gamma);
        z.lambda_mat += (&x.w - &x.u) * (config.zeta * gamma);

        iterations = k + 1;
        if let Some(done) = mon.observe(&problem, k + 1, &x, &z, 0, sol.iters)? {
            converged = done;
            break;
        }
    }
    if max_w_residual_ratio > 1.0 {
        mon.notes.push(format!(
            "W-step residual exceeded its bound by a factor {max_w_residual_ratio:.2}"
        ));
    }
    mon.finish(
        "sgs",
        &problem,
        x,
        z,
        converged,
        iterations,
        0,
        total_cg,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_bar_is_summable() {
        let cfg = AdmmConfig::default();
        let total: f64 = (0..100_000).map(|k| cfg.eps_bar(k)).sum();
        assert!(total < cfg.eps_bar0 * std::f64::consts::PI.powi(2) / 6.0);
    }

    #[test]
    fn zeta_range_enforced() {
        let cfg = AdmmConfig {
            zeta: 1.7,
            ..AdmmConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_warm_start_is_origin() {
        let x = [
            Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
            Matrix::from_row_slice(1, 2, &[-1.0, 0.5]),
        ];
        let ds = Dataset::from_samples(&x, &[1.0, -1.0]).unwrap();
        let h = Hyperparams::new(1.0, 0.1).unwrap();
        let ws = warm_start(&ds, &h, 0, &AdmmConfig::default()).unwrap();
        assert_eq!(ws.primal, PrimalPoint::zeros(2, 1, 2));
        assert_eq!(ws.dual, DualPoint::zeros(2, 1, 2));
    }
}
