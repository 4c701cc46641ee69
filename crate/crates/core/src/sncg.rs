//! Semismooth Newton-CG for the ALM subproblem
//!
//! ```text
//! min_{W,b} φ(W,b) = ½a‖W − T‖² + ½δ_b(b − b₀)²
//!                   + σ⁻¹[E_{δ*_S}(ω(W,b)) − ½‖λ‖²] + σ⁻¹[E_{τ‖·‖_*}(X(W)) − ½‖Λ‖²]
//! ω(W,b) = −λ − σ(AW + by − e),   X(W) = Λ + σW.
//! ```
//!
//! The Newton system is reduced to the `W` block and restricted to
//! `J₁ = {j : 0 < ωⱼ < C}`, so one operator application costs
//! `O(max{|J₁|, |α|}·pq)`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SmmError};
use crate::model::{axpy, dot, DualPoint, PrimalPoint, Problem};
use crate::prox::{env_nuclear_from, env_support_fn, prox_nuclear, NuclearProx};
use crate::spectral::{JacobianMode, SpectralJacobian};
use crate::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SncgConfig {
    /// Armijo constant, in `(0, ½)`.
    pub mu: f64,
    /// Backtracking factor.
    pub delta_ls: f64,
    /// Cap on the CG tolerance.
    pub eta_bar: f64,
    /// CG tolerance exponent: `min(η̄, ‖∇φ‖^{1+ϱ})`.
    pub varrho: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub cg_max_iter: usize,
    pub max_newton_iter: usize,
    pub max_backtracks: usize,
    /// Jacobi preconditioning of the reduced system. Off by default.
    pub precondition: bool,
    #[serde(skip, default = "default_mode")]
    pub jacobian_mode: JacobianMode,
}

fn default_mode() -> JacobianMode {
    JacobianMode::Fast
}

impl Default for SncgConfig {
    fn default() -> Self {
        Self {
            mu: 0.1,
            delta_ls: 0.5,
            eta_bar: 1e-2,
            varrho: 0.5,
            tau1: 1e-3,
            tau2: 0.1,
            cg_max_iter: 300,
            max_newton_iter: 100,
            max_backtracks: 60,
            precondition: false,
            jacobian_mode: JacobianMode::Fast,
        }
    }
}

impl SncgConfig {
    pub fn validate(&self) -> Result<()> {
        let open01 = |x: f64| x > 0.0 && x < 1.0;
        if !(self.mu > 0.0 && self.mu < 0.5) {
            return Err(SmmError::Config("sncg: mu must lie in (0, 1/2)".into()));
        }
        if !open01(self.delta_ls) || !open01(self.eta_bar) {
            return Err(SmmError::Config(
                "sncg: delta_ls and eta_bar must lie in (0, 1)".into(),
            ));
        }
        if !open01(self.tau1) || !open01(self.tau2) {
            return Err(SmmError::Config(
                "sncg: tau1 and tau2 must lie in (0, 1)".into(),
            ));
        }
        if !(self.varrho > 0.0 && self.varrho <= 1.0) {
            return Err(SmmError::Config("sncg: varrho must lie in (0, 1]".into()));
        }
        if self.cg_max_iter == 0 || self.max_backtracks == 0 {
            return Err(SmmError::Config(
                "sncg: iteration caps must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Frozen outer-iterate data `(σ, λ, Λ)` defining `φ`.
#[derive(Debug, Clone)]
pub struct SubproblemContext<'a> {
    pub problem: &'a Problem<'a>,
    pub sigma: f64,
    pub lambda: Vector,
    pub lambda_mat: Matrix,
}

impl<'a> SubproblemContext<'a> {
    pub fn new(problem: &'a Problem<'a>, sigma: f64, dual: &DualPoint) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(SmmError::Config(format!("sigma must be > 0, got {sigma}")));
        }
        dual.check_shape(problem.dataset)?;
        Ok(Self {
            problem,
            sigma,
            lambda: dual.lambda.clone(),
            lambda_mat: dual.lambda_mat.clone(),
        })
    }

    fn c(&self) -> f64 {
        self.problem.hyper.c
    }

    fn tau(&self) -> f64 {
        self.problem.hyper.tau
    }

    pub fn evaluate(&self, w: &Matrix, b: f64) -> Result<PhiState> {
        let aw = self.problem.dataset.apply_a(w)?;
        self.evaluate_with_aw(w.clone(), b, aw)
    }

    /// Evaluates `φ` and `∇φ` given a precomputed `AW`.
    pub fn evaluate_with_aw(&self, w: Matrix, b: f64, aw: Vector) -> Result<PhiState> {
        let ds = self.problem.dataset;
        let sigma = self.sigma;
        let c = self.c();
        let tau = self.tau();
        let y = ds.labels();

        let mut omega = Vector::zeros(aw.len());
        for i in 0..aw.len() {
            omega[i] = -self.lambda[i] - sigma * (aw[i] + b * y[i] - 1.0);
        }
        let proj_omega = omega.map(|x| x.clamp(0.0, c));
        let x_mat = &self.lambda_mat + &w * sigma;

        let (nuc, env_nuc) = if tau > 0.0 {
            let prox = prox_nuclear(&x_mat, tau)?;
            let e = env_nuclear_from(&prox, tau);
            (Some(prox), e)
        } else {
            (None, 0.0)
        };
        let value = self.problem.smooth_value(&w, b)
            + (env_support_fn(&omega, c) - 0.5 * self.lambda.norm_squared()) / sigma
            + (env_nuc - 0.5 * self.lambda_mat.norm_squared()) / sigma;
        if !value.is_finite() {
            return Err(SmmError::Numerical("non-finite subproblem value".into()));
        }

        // ∇_W = a(W − T) − A*Π_S(ω) + Π_B(X)
        let mut grad_w = self.problem.smooth_grad_w(&w);
        {
            let g = grad_w.as_mut_slice();
            for i in 0..aw.len() {
                let coef = proj_omega[i] * y[i];
                if coef != 0.0 {
                    axpy(-coef, ds.sample_slice(i), g);
                }
            }
        }
        if let Some(prox) = &nuc {
            grad_w += &x_mat - &prox.y;
        }
        let grad_b = self.problem.smooth_grad_b(b)
            - proj_omega
                .iter()
                .zip(y)
                .map(|(p, yi)| p * yi)
                .sum::<f64>();

        Ok(PhiState {
            w,
            b,
            aw,
            omega,
            proj_omega,
            x_mat,
            nuc,
            value,
            grad_w,
            grad_b,
        })
    }
}

/// `φ(W, b)`.
pub fn eval_phi(ctx: &SubproblemContext<'_>, w: &Matrix, b: f64) -> Result<f64> {
    Ok(ctx.evaluate(w, b)?.value)
}

/// `(∇_W φ, ∂_b φ)`.
pub fn grad_phi(ctx: &SubproblemContext<'_>, w: &Matrix, b: f64) -> Result<(Matrix, f64)> {
    let s = ctx.evaluate(w, b)?;
    Ok((s.grad_w, s.grad_b))
}

/// Everything computed at one `(W, b)`.
#[derive(Debug, Clone)]
pub struct PhiState {
    pub w: Matrix,
    pub b: f64,
    /// `AW`
    pub aw: Vector,
    pub omega: Vector,
    /// `Π_S(ω)`
    pub proj_omega: Vector,
    /// `X = Λ + σW`
    pub x_mat: Matrix,
    /// Soft-thresholding of `X`; absent when `τ = 0`.
    pub nuc: Option<NuclearProx>,
    pub value: f64,
    pub grad_w: Matrix,
    pub grad_b: f64,
}

impl PhiState {
    pub fn grad_norm(&self) -> f64 {
        (self.grad_w.norm_squared() + self.grad_b * self.grad_b).sqrt()
    }

    /// `Π_{B^τ₂}(X)`; zero when `τ = 0`.
    pub fn proj_ball(&self) -> Matrix {
        match &self.nuc {
            Some(p) => &self.x_mat - &p.y,
            None => Matrix::zeros(self.x_mat.nrows(), self.x_mat.ncols()),
        }
    }

    /// Multipliers after the outer update: `λ = −Π_S(ω)`, `Λ = Π_B(X)`.
    pub fn next_dual(&self) -> DualPoint {
        DualPoint {
            lambda: -&self.proj_omega,
            lambda_mat: self.proj_ball(),
        }
    }

    /// `(v, U) = (σ⁻¹Prox_{δ*_S}(ω), σ⁻¹Prox_{τ‖·‖_*}(X))` together with `(W, b)`.
    pub fn recover_primal(&self, sigma: f64) -> PrimalPoint {
        let v = (&self.omega - &self.proj_omega) / sigma;
        let u = match &self.nuc {
            Some(p) => &p.y / sigma,
            None => &self.x_mat / sigma,
        };
        PrimalPoint {
            w: self.w.clone(),
            b: self.b,
            v,
            u,
        }
    }

    /// `J₁ = {j : 0 < ωⱼ < C}` with strict inequalities.
    pub fn j1(&self, c: f64) -> Vec<usize> {
        self.omega
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0 && w < c)
            .map(|(j, _)| j)
            .collect()
    }
}

/// The reduced Newton operator
/// `Ṽd = a·d + σGd + σA*_{J₁}A_{J₁}d − σ²c_b⁻¹⟨u, d⟩u`, with
/// `u = A*_{J₁}y_{J₁}` and `c_b = σ|J₁| + ρ + δ_b`.
#[derive(Debug, Clone)]
pub struct NewtonWorkspace {
    pub j1: Vec<usize>,
    pub spectral_jac: SpectralJacobian,
    pub rho: f64,
    pub sigma: f64,
    pub a: f64,
    /// `Σ_{J₁} Xⱼ`
    pub u: Matrix,
    pub c_b: f64,
    pub mode: JacobianMode,
    diag: Option<Matrix>,
}

impl NewtonWorkspace {
    pub fn build(
        ctx: &SubproblemContext<'_>,
        state: &PhiState,
        config: &SncgConfig,
    ) -> Result<Self> {
        let j1 = state.j1(ctx.c());
        let (p, q) = ctx.problem.dataset.shape();
        let jac = match &state.nuc {
            Some(prox) => SpectralJacobian::from_svd(prox.svd.clone(), ctx.tau())?,
            None => SpectralJacobian::zero(p, q),
        };
        let rho = config.tau1 * config.tau2.min(state.grad_norm());
        let mut ws = Self::new(ctx, j1, jac, rho)?;
        ws.mode = config.jacobian_mode;
        if config.precondition {
            ws.diag = Some(ws.jacobi_diagonal(ctx));
        }
        Ok(ws)
    }

    /// Assembles the operator from an explicit `J₁` and Jacobian.
    pub fn new(
        ctx: &SubproblemContext<'_>,
        j1: Vec<usize>,
        spectral_jac: SpectralJacobian,
        rho: f64,
    ) -> Result<Self> {
        let ds = ctx.problem.dataset;
        if let Some(&bad) = j1.iter().find(|&&j| j >= ds.n_samples()) {
            return Err(SmmError::IndexOutOfRange {
                index: bad,
                len: ds.n_samples(),
            });
        }
        let u = ds.sum_samples(&j1);
        let c_b = ctx.sigma * j1.len() as f64 + rho + ctx.problem.b_weight;
        Ok(Self {
            j1,
            spectral_jac,
            rho,
            sigma: ctx.sigma,
            a: ctx.problem.w_weight,
            u,
            c_b,
            mode: JacobianMode::Fast,
            diag: None,
        })
    }

    fn jacobi_diagonal(&self, ctx: &SubproblemContext<'_>) -> Matrix {
        let ds = ctx.problem.dataset;
        let (p, q) = ds.shape();
        let g = if self.spectral_jac.is_zero() { 0.0 } else { 1.0 };
        let mut sq = vec![0.0; p * q];
        for &j in &self.j1 {
            for (s, x) in sq.iter_mut().zip(ds.sample_slice(j)) {
                *s += x * x;
            }
        }
        let mut out = Matrix::from_vec(p, q, sq);
        let s = self.sigma;
        let corr = if self.c_b > 0.0 { s * s / self.c_b } else { 0.0 };
        for (o, uk) in out.iter_mut().zip(self.u.iter()) {
            *o = (self.a + s * g + s * *o - corr * uk * uk).max(self.a);
        }
        out
    }

    /// `Ṽd`.
    pub fn apply(&self, ctx: &SubproblemContext<'_>, d: &Matrix) -> Result<Matrix> {
        let ds = ctx.problem.dataset;
        let mut gram = vec![0.0; d.len()];
        let t_sum = ds.gram_restricted(&self.j1, d.as_slice(), &mut gram);
        let gd = self.spectral_jac.apply(d, self.mode)?;
        let s = self.sigma;
        let mut out = d * self.a + gd * s;
        {
            let o = out.as_mut_slice();
            axpy(s, &gram, o);
            if !self.j1.is_empty() {
                axpy(-s * s * t_sum / self.c_b, self.u.as_slice(), o);
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct NewtonDirection {
    pub d_w: Matrix,
    pub d_b: f64,
    pub cg_iters: usize,
    /// Residual norm of the reduced system at return.
    pub residual: f64,
    pub cg_converged: bool,
}

/// Solves the reduced Newton system by CG and recovers `d_b`.
pub fn newton_direction(
    ctx: &SubproblemContext<'_>,
    state: &PhiState,
    ws: &NewtonWorkspace,
    tol: f64,
    cg_max_iter: usize,
) -> Result<NewtonDirection> {
    let (p, q) = state.w.shape();
    if state.grad_norm() == 0.0 {
        return Ok(NewtonDirection {
            d_w: Matrix::zeros(p, q),
            d_b: 0.0,
            cg_iters: 0,
            residual: 0.0,
            cg_converged: true,
        });
    }
    let s = ctx.sigma;
    let rhs2 = -state.grad_b;
    let mut rhs = -&state.grad_w;
    if !ws.j1.is_empty() {
        rhs -= &ws.u * (s * rhs2 / ws.c_b);
    }
    let cg = conjugate_gradient(
        |d| ws.apply(ctx, d),
        &rhs,
        tol,
        cg_max_iter,
        ws.diag.as_ref(),
    )?;
    let d_b = if ws.j1.is_empty() {
        rhs2 / ws.c_b
    } else {
        (rhs2 - s * dot(ws.u.as_slice(), cg.x.as_slice())) / ws.c_b
    };
    if !d_b.is_finite() || cg.x.iter().any(|v| !v.is_finite()) {
        return Err(SmmError::Numerical("non-finite Newton direction".into()));
    }
    Ok(NewtonDirection {
        d_w: cg.x,
        d_b,
        cg_iters: cg.iters,
        residual: cg.residual,
        cg_converged: cg.converged,
    })
}

pub(crate) struct CgResult {
    pub x: Matrix,
    pub iters: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Preconditioned CG from a zero start.
pub(crate) fn conjugate_gradient(
    apply: impl Fn(&Matrix) -> Result<Matrix>,
    rhs: &Matrix,
    tol: f64,
    max_iter: usize,
    diag: Option<&Matrix>,
) -> Result<CgResult> {
    conjugate_gradient_from(apply, rhs, Matrix::zeros(rhs.nrows(), rhs.ncols()), tol, max_iter, diag)
}

/// Preconditioned CG from `x0`; returns the iterate with the smallest residual.
pub(crate) fn conjugate_gradient_from(
    apply: impl Fn(&Matrix) -> Result<Matrix>,
    rhs: &Matrix,
    x0: Matrix,
    tol: f64,
    max_iter: usize,
    diag: Option<&Matrix>,
) -> Result<CgResult> {
    let precond = |r: &Matrix| match diag {
        Some(d) => r.component_div(d),
        None => r.clone(),
    };
    let mut x = x0;
    let mut r = if x.iter().all(|&v| v == 0.0) {
        rhs.clone()
    } else {
        rhs - apply(&x)?
    };
    let mut res = r.norm();
    let mut best = (x.clone(), res);
    if res <= tol {
        return Ok(CgResult {
            x,
            iters: 0,
            residual: res,
            converged: true,
        });
    }
    let mut z = precond(&r);
    let mut pdir = z.clone();
    let mut rz = r.dot(&z);
    for it in 1..=max_iter {
        let ap = apply(&pdir)?;
        let pap = pdir.dot(&ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        axpy(alpha, pdir.as_slice(), x.as_mut_slice());
        axpy(-alpha, ap.as_slice(), r.as_mut_slice());
        res = r.norm();
        if res < best.1 {
            best = (x.clone(), res);
        }
        if res <= tol {
            return Ok(CgResult {
                x,
                iters: it,
                residual: res,
                converged: true,
            });
        }
        z = precond(&r);
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        pdir = &z + &pdir * beta;
    }
    Ok(CgResult {
        x: best.0,
        iters: max_iter,
        residual: best.1,
        converged: false,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct LineSearchResult {
    pub alpha: f64,
    pub evals: usize,
    /// The Newton direction failed the descent test and `−∇φ` was used.
    pub fallback: bool,
    pub success: bool,
}

/// Armijo backtracking along `(d_W, d_b)`. Returns the accepted state.
///
/// `AW` along the ray is updated incrementally from `A d_W`, so each
/// trial costs `O(n)` plus one SVD.
pub fn line_search(
    ctx: &SubproblemContext<'_>,
    state: &PhiState,
    d_w: &Matrix,
    d_b: f64,
    config: &SncgConfig,
) -> Result<(LineSearchResult, PhiState)> {
    let gnorm = state.grad_norm();
    let mut dw = d_w.clone();
    let mut db = d_b;
    let mut slope = state.grad_w.dot(&dw) + state.grad_b * db;
    let dnorm = (dw.norm_squared() + db * db).sqrt();
    let mut fallback = false;
    if !(slope < -1e-12 * gnorm * dnorm) {
        dw = -&state.grad_w;
        db = -state.grad_b;
        slope = -gnorm * gnorm;
        fallback = true;
    }
    let ad = ctx.problem.dataset.apply_a(&dw)?;
    let mut alpha = 1.0;
    let mut evals = 0;
    let mut best: Option<PhiState> = None;
    for _ in 0..config.max_backtracks {
        let w = &state.w + &dw * alpha;
        let aw = &state.aw + &ad * alpha;
        let trial = ctx.evaluate_with_aw(w, state.b + alpha * db, aw)?;
        evals += 1;
        if trial.value <= state.value + config.mu * alpha * slope {
            return Ok((
                LineSearchResult {
                    alpha,
                    evals,
                    fallback,
                    success: true,
                },
                trial,
            ));
        }
        if trial.value <= state.value
            && best.as_ref().is_none_or(|b| trial.value < b.value)
        {
            best = Some(trial);
        }
        alpha *= config.delta_ls;
    }
    let info = LineSearchResult {
        alpha: 0.0,
        evals,
        fallback,
        success: false,
    };
    Ok((info, best.unwrap_or_else(|| state.clone())))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NewtonStep {
    pub grad_norm: f64,
    pub j1: usize,
    pub alpha_rank: usize,
    pub cg_iters: usize,
    pub cg_residual: f64,
    pub step: f64,
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct SubproblemResult {
    pub state: PhiState,
    pub primal: PrimalPoint,
    pub iters: usize,
    pub converged: bool,
    pub steps: Vec<NewtonStep>,
    pub total_cg_iters: usize,
}

/// Runs semismooth Newton-CG from `(W₀, b₀)` until `stop` accepts the
/// current state, `max_newton_iter` is reached or the line search fails.
pub fn solve_subproblem(
    ctx: &SubproblemContext<'_>,
    init_w: &Matrix,
    init_b: f64,
    config: &SncgConfig,
    mut stop: impl FnMut(&PhiState) -> bool,
) -> Result<SubproblemResult> {
    let mut state = ctx.evaluate(init_w, init_b)?;
    let mut steps = Vec::new();
    let mut total_cg = 0;
    let mut converged = false;
    let mut iters = 0;
    loop {
        if stop(&state) {
            converged = true;
            break;
        }
        if iters >= config.max_newton_iter {
            break;
        }
        let gnorm = state.grad_norm();
        let ws = NewtonWorkspace::build(ctx, &state, config)?;
        let tol = config.eta_bar.min(gnorm.powf(1.0 + config.varrho));
        let dir = newton_direction(ctx, &state, &ws, tol, config.cg_max_iter)?;
        total_cg += dir.cg_iters;
        let (ls, next) = line_search(ctx, &state, &dir.d_w, dir.d_b, config)?;
        steps.push(NewtonStep {
            grad_norm: gnorm,
            j1: ws.j1.len(),
            alpha_rank: ws.spectral_jac.alpha_len(),
            cg_iters: dir.cg_iters,
            cg_residual: dir.residual,
            step: ls.alpha,
            fallback: ls.fallback,
        });
        iters += 1;
        if !ls.success {
            log::debug!("sncg: line search stalled at ‖∇φ‖ = {gnorm:.3e}");
            if next.value < state.value {
                state = next;
            }
            converged = stop(&state);
            break;
        }
        state = next;
    }
    let primal = state.recover_primal(ctx.sigma);
    Ok(SubproblemResult {
        state,
        primal,
        iters,
        converged,
        steps,
        total_cg_iters: total_cg,
    })
}
