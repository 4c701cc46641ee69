//! Inexact augmented Lagrangian method with semismooth Newton-CG
//! subproblem solves (ALM-SNCG).

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SmmError};
use crate::model::{Dataset, DualPoint, Hyperparams, PrimalPoint, Problem};
use crate::report::{final_metrics, IterRecord, Solution, SolveReport};
use crate::sncg::{solve_subproblem, PhiState, SncgConfig, SubproblemContext};

/// Which inexactness rule terminates a subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    A,
    B,
    Both,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlmConfig {
    /// Initial penalty; `None` uses `min(10, max(1, 1/C))`.
    pub sigma0: Option<f64>,
    pub sigma_max: f64,
    pub sigma_growth: f64,
    /// `ε_k = eps0·eps_ratio^k`
    pub eps0: f64,
    pub eps_ratio: f64,
    /// `η_k = eta0·eta_ratio^k`
    pub eta0: f64,
    pub eta_ratio: f64,
    pub kkt_tol: f64,
    pub max_outer_iter: usize,
    pub criterion: Criterion,
    /// Subproblems also stop once their gradient block of `η_kkt` is below
    /// `inner_floor·kkt_tol`. The summable bounds alone fall below machine
    /// precision after a few dozen outer steps.
    pub inner_floor: f64,
    /// Consecutive subproblem failures tolerated before giving up.
    pub max_subproblem_failures: usize,
    /// Stop once `Relobj ≤ tol` against `(reference, tol)`.
    pub relobj_stop: Option<(f64, f64)>,
    /// Wall-clock budget in seconds.
    pub time_limit: Option<f64>,
    pub sncg: SncgConfig,
}

impl Default for AlmConfig {
    fn default() -> Self {
        Self {
            sigma0: None,
            sigma_max: 1e6,
            sigma_growth: 5.0,
            eps0: 0.1,
            eps_ratio: 0.5,
            eta0: 0.1,
            eta_ratio: 0.5,
            kkt_tol: 1e-6,
            max_outer_iter: 500,
            criterion: Criterion::A,
            inner_floor: 0.1,
            max_subproblem_failures: 5,
            relobj_stop: None,
            time_limit: None,
            sncg: SncgConfig::default(),
        }
    }
}

impl AlmConfig {
    pub fn with_tol(kkt_tol: f64) -> Self {
        Self {
            kkt_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sncg.validate()?;
        if let Some(s) = self.sigma0 {
            if !(s > 0.0) {
                return Err(SmmError::Config("alm: sigma0 must be > 0".into()));
            }
        }
        if !(self.sigma_max > 0.0) || !(self.sigma_growth > 1.0) {
            return Err(SmmError::Config(
                "alm: need sigma_max > 0 and sigma_growth > 1".into(),
            ));
        }
        let ratio_ok = |r: f64| (0.0..1.0).contains(&r);
        if !(self.eps0 > 0.0 && self.eta0 > 0.0)
            || !ratio_ok(self.eps_ratio)
            || !ratio_ok(self.eta_ratio)
        {
            return Err(SmmError::Config(
                "alm: eps/eta sequences must be positive and geometric with ratio < 1".into(),
            ));
        }
        if !(self.kkt_tol > 0.0) || self.max_outer_iter == 0 {
            return Err(SmmError::Config(
                "alm: kkt_tol must be > 0 and max_outer_iter >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn sigma0_for(&self, c: f64) -> f64 {
        self.sigma0.unwrap_or_else(|| (1.0 / c).clamp(1.0, 10.0))
    }

    pub fn eps_k(&self, k: usize) -> f64 {
        self.eps0 * self.eps_ratio.powi(k as i32)
    }

    pub fn eta_k(&self, k: usize) -> f64 {
        self.eta0 * self.eta_ratio.powi(k as i32)
    }
}

/// Data entering the inexactness tests at a candidate `(x^{k+1}, z^{k+1})`.
#[derive(Debug, Clone, Copy)]
pub struct InexactData {
    pub grad_norm: f64,
    pub sigma: f64,
    /// `‖x^{k+1}‖`
    pub x_norm: f64,
    /// `‖z^{k+1}‖`
    pub z_norm: f64,
    /// `‖z^{k+1} − z^k‖`
    pub dz_norm: f64,
    /// `‖W^{k+1}‖_F`
    pub w_norm: f64,
}

impl InexactData {
    /// `χ_k = ‖W^{k+1}‖ + ‖z^{k+1} − z^k‖/σ + 1/σ`
    pub fn chi(&self) -> f64 {
        self.w_norm + self.dz_norm / self.sigma + 1.0 / self.sigma
    }

    fn scale(&self) -> f64 {
        (1.0 / self.chi()).min(1.0) / (1.0 + self.x_norm + self.z_norm)
    }
}

/// `‖∇φ‖ ≤ (ε²/σ)/(1 + ‖x‖ + ‖z‖)·min{1/χ, 1}`.
pub fn criterion_a(d: &InexactData, eps_k: f64) -> bool {
    d.grad_norm <= eps_k * eps_k / d.sigma * d.scale()
}

/// `‖∇φ‖ ≤ (η²/σ)‖z⁺ − z‖²/(1 + ‖x‖ + ‖z‖)·min{1/χ, 1}`.
pub fn criterion_b(d: &InexactData, eta_k: f64) -> bool {
    d.grad_norm <= eta_k * eta_k / d.sigma * d.dz_norm * d.dz_norm * d.scale()
}

/// Evaluates the configured rule. Criterion B alone degenerates to
/// `‖∇φ‖ = 0` when `z` does not move, so A is used in that case.
pub fn inexact_rule_holds(d: &InexactData, criterion: Criterion, eps_k: f64, eta_k: f64) -> bool {
    let b_or_fallback = || {
        if d.dz_norm == 0.0 {
            criterion_a(d, eps_k)
        } else {
            criterion_b(d, eta_k)
        }
    };
    match criterion {
        Criterion::A => criterion_a(d, eps_k),
        Criterion::B => b_or_fallback(),
        Criterion::Both => criterion_a(d, eps_k) && b_or_fallback(),
    }
}

/// `σ_{k+1}`: grow when primal infeasibility fell by less than half.
pub fn sigma_update(sigma: f64, config: &AlmConfig, prev_pinf: f64, pinf: f64) -> f64 {
    if pinf > 0.5 * prev_pinf {
        (sigma * config.sigma_growth).min(config.sigma_max)
    } else {
        sigma
    }
}

/// Starting point for [`solve`].
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub primal: PrimalPoint,
    pub dual: DualPoint,
}

/// Solves the SMM problem for `(C, τ)`.
pub fn solve(
    ds: &Dataset,
    hyper: &Hyperparams,
    config: &AlmConfig,
    init: Option<&WarmStart>,
) -> Result<Solution> {
    let problem = Problem::smm(ds, *hyper);
    solve_problem(&problem, config, init)
}

/// Normalized gradient part of `η_kkt` at the point the subproblem would return.
fn gradient_eta(problem: &Problem<'_>, st: &PhiState, n: usize) -> f64 {
    let smooth = problem.smooth_grad_w(&st.w);
    let ball = st.proj_ball();
    // A*λ⁺ = ∇_W − a(W − T) − Π_B(X)
    let at_lambda = &st.grad_w - &smooth - &ball;
    let eta_w =
        st.grad_w.norm() / (1.0 + st.w.norm() + at_lambda.norm() + ball.norm());
    let eta_b = st.grad_b.abs() / (1.0 + (n as f64).sqrt());
    eta_w.max(eta_b)
}

/// ALM-SNCG on a generalized [`Problem`].
pub fn solve_problem(
    problem: &Problem<'_>,
    config: &AlmConfig,
    init: Option<&WarmStart>,
) -> Result<Solution> {
    problem.validate()?;
    config.validate()?;
    let ds = problem.dataset;
    let (n, p, q) = (ds.n_samples(), ds.rows(), ds.cols());
    let start = Instant::now();

    let (mut primal, mut dual) = match init {
        Some(ws) => {
            ws.primal.check_shape(ds)?;
            ws.dual.check_shape(ds)?;
            (ws.primal.clone(), ws.dual.clone())
        }
        None => (PrimalPoint::zeros(n, p, q), DualPoint::zeros(n, p, q)),
    };

    let mut sigma = config.sigma0_for(problem.hyper.c);
    let mut prev_pinf = f64::INFINITY;
    let mut history = Vec::new();
    let mut converged = false;
    let mut total_inner = 0;
    let mut total_cg = 0;
    let mut failures = 0;
    let mut iterations = 0;
    let mut notes = Vec::new();

    for k in 0..config.max_outer_iter {
        let ctx = SubproblemContext::new(problem, sigma, &dual)?;
        let (eps_k, eta_k) = (config.eps_k(k), config.eta_k(k));
        let floor = config.inner_floor * config.kkt_tol;
        let z_prev = &dual;
        let stop = |st: &PhiState| {
            if st.grad_norm() == 0.0 {
                return true;
            }
            if gradient_eta(problem, st, n) <= floor {
                return true;
            }
            let z = st.next_dual();
            let x = st.recover_primal(sigma);
            let data = InexactData {
                grad_norm: st.grad_norm(),
                sigma,
                x_norm: x.norm(),
                z_norm: z.norm(),
                dz_norm: z.distance(z_prev),
                w_norm: st.w.norm(),
            };
            inexact_rule_holds(&data, config.criterion, eps_k, eta_k)
        };
        let sub = solve_subproblem(&ctx, &primal.w, primal.b, &config.sncg, stop)?;
        total_inner += sub.iters;
        total_cg += sub.total_cg_iters;
        iterations = k + 1;

        // λ⁺ = λ + σ(AW + by + v − e) = −Π_S(ω) and Λ⁺ = Λ + σ(W − U) = Π_B(X).
        let new_dual = sub.state.next_dual();
        let new_primal = sub.primal;
        let kkt = problem.kkt_residual(&new_primal, &new_dual)?;
        let objective = problem.objective_with_aw(&new_primal.w, new_primal.b, &sub.state.aw)?;
        let last = sub.steps.last();
        history.push(IterRecord {
            iter: k + 1,
            kkt,
            objective,
            sigma,
            inner_iters: sub.iters,
            cg_iters: sub.total_cg_iters,
            j1: last.map(|s| s.j1),
            alpha: last.map(|s| s.alpha_rank),
            elapsed_s: start.elapsed().as_secs_f64(),
        });
        log::debug!(
            "alm {:>3}: eta={:.3e} obj={:.10e} sigma={:.1e} newton={} cg={}",
            k + 1,
            kkt.eta,
            objective,
            sigma,
            sub.iters,
            sub.total_cg_iters
        );
        primal = new_primal;
        dual = new_dual;

        if kkt.eta <= config.kkt_tol {
            converged = true;
            break;
        }
        if let Some((reference, tol)) = config.relobj_stop {
            if crate::relobj(objective, reference) <= tol {
                converged = true;
                notes.push("stopped on Relobj".to_string());
                break;
            }
        }
        if let Some(limit) = config.time_limit {
            if start.elapsed().as_secs_f64() > limit {
                notes.push("time limit reached".to_string());
                break;
            }
        }

        let pinf = kkt.primal_infeasibility();
        if sub.converged {
            failures = 0;
            sigma = sigma_update(sigma, config, prev_pinf, pinf);
        } else {
            failures += 1;
            if failures > config.max_subproblem_failures {
                notes.push(format!(
                    "{failures} consecutive subproblem failures; stopping"
                ));
                break;
            }
            sigma = (sigma * config.sigma_growth).min(config.sigma_max);
        }
        prev_pinf = pinf;
    }

    let metrics = final_metrics(problem, &primal, &dual)?;
    let reference = config.relobj_stop.map(|(r, _)| r);
    let mut report = SolveReport::assemble(
        "alm",
        metrics,
        converged,
        iterations,
        total_inner,
        total_cg,
        sigma,
        start.elapsed().as_secs_f64(),
        history,
        reference,
    );
    report.notes = notes;
    Ok(Solution {
        primal,
        dual,
        report,
    })
}
