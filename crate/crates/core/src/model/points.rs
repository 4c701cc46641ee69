use serde::{Deserialize, Serialize};

use crate::error::{Result, SmmError};
use crate::model::Dataset;
use crate::{Matrix, Vector};

/// Hinge-loss weight `C > 0` and nuclear-norm weight `τ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    #[serde(rename = "C")]
    pub c: f64,
    pub tau: f64,
}

impl Hyperparams {
    pub fn new(c: f64, tau: f64) -> Result<Self> {
        let h = Self { c, tau };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(SmmError::Config(format!("C must be > 0, got {}", self.c)));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(SmmError::Config(format!(
                "tau must be >= 0, got {}",
                self.tau
            )));
        }
        Ok(())
    }
}

/// Primal blocks `(W, b, v, U)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalPoint {
    pub w: Matrix,
    pub b: f64,
    pub v: Vector,
    pub u: Matrix,
}

impl PrimalPoint {
    pub fn zeros(n: usize, p: usize, q: usize) -> Self {
        Self {
            w: Matrix::zeros(p, q),
            b: 0.0,
            v: Vector::zeros(n),
            u: Matrix::zeros(p, q),
        }
    }

    pub fn check_shape(&self, ds: &Dataset) -> Result<()> {
        let (p, q) = ds.shape();
        if self.w.shape() != (p, q) || self.u.shape() != (p, q) {
            return Err(SmmError::shape(
                "primal point",
                format!("{p}x{q}"),
                format!("W {:?}, U {:?}", self.w.shape(), self.u.shape()),
            ));
        }
        if self.v.len() != ds.n_samples() {
            return Err(SmmError::shape("primal v", ds.n_samples(), self.v.len()));
        }
        Ok(())
    }

    /// `‖(W, b, v, U)‖`.
    pub fn norm(&self) -> f64 {
        (self.w.norm_squared() + self.b * self.b + self.v.norm_squared() + self.u.norm_squared())
            .sqrt()
    }
}

/// Dual blocks `(λ, Λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub lambda: Vector,
    pub lambda_mat: Matrix,
}

impl DualPoint {
    pub fn zeros(n: usize, p: usize, q: usize) -> Self {
        Self {
            lambda: Vector::zeros(n),
            lambda_mat: Matrix::zeros(p, q),
        }
    }

    pub fn check_shape(&self, ds: &Dataset) -> Result<()> {
        let (p, q) = ds.shape();
        if self.lambda_mat.shape() != (p, q) {
            return Err(SmmError::shape(
                "dual Lambda",
                format!("{p}x{q}"),
                format!("{:?}", self.lambda_mat.shape()),
            ));
        }
        if self.lambda.len() != ds.n_samples() {
            return Err(SmmError::shape(
                "dual lambda",
                ds.n_samples(),
                self.lambda.len(),
            ));
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        (self.lambda.norm_squared() + self.lambda_mat.norm_squared()).sqrt()
    }

    /// `‖(λ, Λ) − (λ', Λ')‖`.
    pub fn distance(&self, other: &DualPoint) -> f64 {
        ((&self.lambda - &other.lambda).norm_squared()
            + (&self.lambda_mat - &other.lambda_mat).norm_squared())
        .sqrt()
    }
}
