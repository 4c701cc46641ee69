use serde::{Deserialize, Serialize};

use crate::error::{Result, SmmError};
use crate::model::{Dataset, DualPoint, Hyperparams, PrimalPoint};
use crate::prox::{nuclear_norm, project_box, project_spectral_ball};
use crate::spectral::ThinSvd;
use crate::{Matrix, Vector};

/// The composite problem handled by the ALM solver:
///
/// ```text
/// min  ½a‖W − T‖²_F + ½δ_b(b − b₀)² + τ‖U‖_* + δ*_S(v)
/// s.t. AW + by + v − e = 0,   W − U = 0.
/// ```
///
/// The SMM model is `a = 1, T = 0, δ_b = 0`. The isPADMM step-one
/// subproblem uses `a = 1 + γ`, `δ_b > 0` and `τ = 0`.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub dataset: &'a Dataset,
    pub hyper: Hyperparams,
    pub w_weight: f64,
    pub w_center: Option<Matrix>,
    pub b_weight: f64,
    pub b_center: f64,
}

impl<'a> Problem<'a> {
    pub fn smm(dataset: &'a Dataset, hyper: Hyperparams) -> Self {
        Self {
            dataset,
            hyper,
            w_weight: 1.0,
            w_center: None,
            b_weight: 0.0,
            b_center: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if !(self.w_weight > 0.0) || !(self.b_weight >= 0.0) {
            return Err(SmmError::Config(
                "quadratic weights must satisfy a > 0, δ_b >= 0".into(),
            ));
        }
        if let Some(t) = &self.w_center {
            if t.shape() != self.dataset.shape() {
                return Err(SmmError::shape(
                    "problem W center",
                    format!("{:?}", self.dataset.shape()),
                    format!("{:?}", t.shape()),
                ));
            }
        }
        Ok(())
    }

    pub fn is_smm(&self) -> bool {
        self.w_weight == 1.0 && self.w_center.is_none() && self.b_weight == 0.0
    }

    /// `a(W − T)`.
    pub fn smooth_grad_w(&self, w: &Matrix) -> Matrix {
        match &self.w_center {
            Some(t) => (w - t) * self.w_weight,
            None => w * self.w_weight,
        }
    }

    /// `δ_b(b − b₀)`.
    pub fn smooth_grad_b(&self, b: f64) -> f64 {
        self.b_weight * (b - self.b_center)
    }

    /// `½a‖W − T‖² + ½δ_b(b − b₀)²`.
    pub fn smooth_value(&self, w: &Matrix, b: f64) -> f64 {
        let wq = match &self.w_center {
            Some(t) => (w - t).norm_squared(),
            None => w.norm_squared(),
        };
        0.5 * self.w_weight * wq + 0.5 * self.b_weight * (b - self.b_center).powi(2)
    }

    /// Objective at `(W, b)` with `U = W` and `v = e − AW − by`.
    pub fn objective(&self, w: &Matrix, b: f64) -> Result<f64> {
        let aw = self.dataset.apply_a(w)?;
        self.objective_with_aw(w, b, &aw)
    }

    pub(crate) fn objective_with_aw(&self, w: &Matrix, b: f64, aw: &Vector) -> Result<f64> {
        let y = self.dataset.labels();
        let hinge: f64 = aw
            .iter()
            .zip(y)
            .map(|(&z, &yi)| (1.0 - z - b * yi).max(0.0))
            .sum();
        let nuc = if self.hyper.tau > 0.0 {
            self.hyper.tau * nuclear_norm(w)?
        } else {
            0.0
        };
        Ok(self.smooth_value(w, b) + nuc + self.hyper.c * hinge)
    }

    pub fn kkt_residual(&self, primal: &PrimalPoint, dual: &DualPoint) -> Result<KktResidual> {
        let parts = self.kkt_parts(primal, dual)?;
        let n = self.dataset.n_samples() as f64;
        let sqrt_n1 = 1.0 + n.sqrt();
        let eta_w = parts.w / (1.0 + primal.w.norm() + parts.at_lambda_norm + dual.lambda_mat.norm());
        let eta_b = parts.b / sqrt_n1;
        let eta_v = parts.v / (1.0 + dual.lambda.norm() + primal.v.norm());
        let eta_u = parts.u / (1.0 + dual.lambda_mat.norm() + primal.u.norm());
        let eta_lambda = parts.lambda / sqrt_n1;
        let eta_lambda_mat = parts.lambda_mat / (1.0 + primal.w.norm() + primal.u.norm());
        Ok(KktResidual::from_components(
            eta_w,
            eta_b,
            eta_v,
            eta_u,
            eta_lambda,
            eta_lambda_mat,
        ))
    }

    /// Unnormalized residual norms of the KKT system.
    pub fn raw_kkt(&self, primal: &PrimalPoint, dual: &DualPoint) -> Result<RawKktResiduals> {
        let parts = self.kkt_parts(primal, dual)?;
        Ok(RawKktResiduals {
            w: parts.w,
            b: parts.b,
            v: parts.v,
            u: parts.u,
            lambda: parts.lambda,
            lambda_mat: parts.lambda_mat,
        })
    }

    fn kkt_parts(&self, primal: &PrimalPoint, dual: &DualPoint) -> Result<KktParts> {
        let ds = self.dataset;
        primal.check_shape(ds)?;
        dual.check_shape(ds)?;
        let c = self.hyper.c;
        let at_lambda = ds.apply_a_adjoint(&dual.lambda)?;
        let y = ds.label_vector();

        let w = (self.smooth_grad_w(&primal.w) + &at_lambda + &dual.lambda_mat).norm();
        let b = (self.smooth_grad_b(primal.b) + dual.lambda.dot(&y)).abs();
        // v − Prox_{δ*_S}(v − λ) = λ + Π_S(v − λ)
        let v = (&dual.lambda + project_box(&(&primal.v - &dual.lambda), c)).norm();
        // U − Prox_{τ‖·‖_*}(U + Λ) = Π_B(U + Λ) − Λ
        let u = (project_spectral_ball(&(&primal.u + &dual.lambda_mat), self.hyper.tau)?
            - &dual.lambda_mat)
            .norm();
        let mut feas = ds.apply_a(&primal.w)? + &y * primal.b + &primal.v;
        feas.add_scalar_mut(-1.0);
        let lambda = feas.norm();
        let lambda_mat = (&primal.w - &primal.u).norm();
        Ok(KktParts {
            w,
            b,
            v,
            u,
            lambda,
            lambda_mat,
            at_lambda_norm: at_lambda.norm(),
        })
    }
}

struct KktParts {
    w: f64,
    b: f64,
    v: f64,
    u: f64,
    lambda: f64,
    lambda_mat: f64,
    at_lambda_norm: f64,
}

/// Relative KKT residual `η_kkt = max{η_W, η_b, η_v, η_U, η_λ, η_Λ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    pub eta: f64,
    pub eta_w: f64,
    pub eta_b: f64,
    pub eta_v: f64,
    pub eta_u: f64,
    pub eta_lambda: f64,
    pub eta_lambda_mat: f64,
}

impl KktResidual {
    pub fn from_components(
        eta_w: f64,
        eta_b: f64,
        eta_v: f64,
        eta_u: f64,
        eta_lambda: f64,
        eta_lambda_mat: f64,
    ) -> Self {
        let eta = [eta_w, eta_b, eta_v, eta_u, eta_lambda, eta_lambda_mat]
            .into_iter()
            .fold(0.0, f64::max);
        Self {
            eta,
            eta_w,
            eta_b,
            eta_v,
            eta_u,
            eta_lambda,
            eta_lambda_mat,
        }
    }

    /// `[η_W, η_b, η_v, η_U, η_λ, η_Λ]`
    pub fn components(&self) -> [f64; 6] {
        [
            self.eta_w,
            self.eta_b,
            self.eta_v,
            self.eta_u,
            self.eta_lambda,
            self.eta_lambda_mat,
        ]
    }

    /// Primal feasibility part, `max{η_λ, η_Λ}`.
    pub fn primal_infeasibility(&self) -> f64 {
        self.eta_lambda.max(self.eta_lambda_mat)
    }

    /// Dual part, `max{η_W, η_b, η_v, η_U}`.
    pub fn dual_infeasibility(&self) -> f64 {
        self.eta_w.max(self.eta_b).max(self.eta_v).max(self.eta_u)
    }
}

/// Absolute residual norms
/// `‖W + A*λ + Λ‖, |yᵀλ|, ‖λ + Π_S(v − λ)‖, ‖Λ − Π_B(U + Λ)‖, ‖AW + by + v − e‖, ‖W − U‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawKktResiduals {
    pub w: f64,
    pub b: f64,
    pub v: f64,
    pub u: f64,
    pub lambda: f64,
    pub lambda_mat: f64,
}

impl RawKktResiduals {
    pub fn max(&self) -> f64 {
        [self.w, self.b, self.v, self.u, self.lambda, self.lambda_mat]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// `½‖W‖²_F + τ‖W‖_* + C Σᵢ max{1 − yᵢ(⟨W, Xᵢ⟩ + b), 0}`.
pub fn primal_objective(ds: &Dataset, hyper: &Hyperparams, w: &Matrix, b: f64) -> Result<f64> {
    Problem::smm(ds, *hyper).objective(w, b)
}

pub fn kkt_residual(
    ds: &Dataset,
    hyper: &Hyperparams,
    primal: &PrimalPoint,
    dual: &DualPoint,
) -> Result<KktResidual> {
    Problem::smm(ds, *hyper).kkt_residual(primal, dual)
}

pub fn raw_kkt_residuals(
    ds: &Dataset,
    hyper: &Hyperparams,
    primal: &PrimalPoint,
    dual: &DualPoint,
) -> Result<RawKktResiduals> {
    Problem::smm(ds, *hyper).raw_kkt(primal, dual)
}

/// Which dual constraints hold at a candidate `(λ, Λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualFeasibility {
    /// `−λ ∈ [0, C]^n`
    pub box_ok: bool,
    /// `‖Λ‖₂ ≤ τ`
    pub ball_ok: bool,
    /// `yᵀλ = 0`
    pub linear_ok: bool,
}

impl DualFeasibility {
    pub fn is_feasible(&self) -> bool {
        self.box_ok && self.ball_ok && self.linear_ok
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.box_ok {
            out.push("box");
        }
        if !self.ball_ok {
            out.push("spectral ball");
        }
        if !self.linear_ok {
            out.push("linear constraint");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualValue {
    /// `−[½‖A*λ + Λ‖²_F + ⟨λ, e⟩]`.
    pub value: f64,
    pub feasibility: DualFeasibility,
}

/// Dual objective value with feasibility flags. Constraints are checked
/// with relative tolerance `1e-8`.
pub fn dual_objective(
    ds: &Dataset,
    hyper: &Hyperparams,
    lambda: &Vector,
    lambda_mat: &Matrix,
) -> Result<DualValue> {
    if lambda.len() != ds.n_samples() {
        return Err(SmmError::shape("dual lambda", ds.n_samples(), lambda.len()));
    }
    if lambda_mat.shape() != ds.shape() {
        return Err(SmmError::shape(
            "dual Lambda",
            format!("{:?}", ds.shape()),
            format!("{:?}", lambda_mat.shape()),
        ));
    }
    const TOL: f64 = 1e-8;
    let c = hyper.c;
    let value = -(0.5 * (ds.apply_a_adjoint(lambda)? + lambda_mat).norm_squared() + lambda.sum());
    let box_ok = lambda
        .iter()
        .all(|&l| -l >= -TOL * c && -l <= c * (1.0 + TOL));
    let spec = ThinSvd::compute(lambda_mat)?.spectral_norm();
    let ball_ok = spec <= hyper.tau * (1.0 + TOL) + TOL;
    let linear_ok = lambda.dot(&ds.label_vector()).abs() <= TOL * (1.0 + lambda.lp_norm(1));
    Ok(DualValue {
        value,
        feasibility: DualFeasibility {
            box_ok,
            ball_ok,
            linear_ok,
        },
    })
}
