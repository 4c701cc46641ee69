//! Proximal maps, projections and Moreau envelopes for the box
//! `S = [0, C]^n` and the nuclear norm / spectral-norm ball `B^τ₂`.
//!
//! All maps come in Moreau pairs: `Π_S(x) + Prox_{δ*_S}(x) = x` and
//! `Π_{B^τ₂}(X) + Prox_{τ‖·‖_*}(X) = X`. The spectral pair shares one SVD.

use crate::error::Result;
use crate::spectral::ThinSvd;
use crate::{Matrix, Vector};

/// Componentwise clamp onto `[0, C]`.
pub fn project_box(x: &Vector, c: f64) -> Vector {
    x.map(|v| v.clamp(0.0, c))
}

/// `Prox_{δ*_S}(x) = x − Π_S(x)`.
pub fn prox_support_fn(x: &Vector, c: f64) -> Vector {
    x.map(|v| v - v.clamp(0.0, c))
}

/// Support function of the box, `δ*_S(v) = C Σⱼ max{vⱼ, 0}`. This is the
/// hinge-loss term of the primal objective.
pub fn support_fn(v: &Vector, c: f64) -> f64 {
    c * v.iter().map(|&x| x.max(0.0)).sum::<f64>()
}

/// Moreau envelope `E_{δ*_S}(x) = δ*_S(p) + ½‖p − x‖²`, `p = Prox_{δ*_S}(x)`.
///
/// Since `p − x = −Π_S(x)` the quadratic part is `½‖Π_S(x)‖²`.
pub fn env_support_fn(x: &Vector, c: f64) -> f64 {
    let mut hinge = 0.0;
    let mut quad = 0.0;
    for &v in x.iter() {
        let proj = v.clamp(0.0, c);
        hinge += (v - proj).max(0.0);
        quad += proj * proj;
    }
    c * hinge + 0.5 * quad
}

/// One element of the Clarke Jacobian of `Π_S` at `ω`: the 0/1 diagonal
/// with ones exactly where `0 < ωⱼ < C`.
pub fn jac_box_diag(omega: &Vector, c: f64) -> Vector {
    omega.map(|w| if w > 0.0 && w < c { 1.0 } else { 0.0 })
}

/// Result of singular value soft-thresholding.
#[derive(Debug, Clone)]
pub struct NuclearProx {
    /// `Prox_{τ‖·‖_*}(X)`.
    pub y: Matrix,
    /// SVD of the input, reusable for the projection and the Jacobian.
    pub svd: ThinSvd,
    /// Number of singular values strictly above `τ`, i.e. `rank(Y)`.
    pub k_bar: usize,
}

impl NuclearProx {
    /// `τ‖Y‖_*` without another SVD.
    pub fn nuclear_norm_scaled(&self, tau: f64) -> f64 {
        tau * self
            .svd
            .nu
            .iter()
            .map(|&s| (s - tau).max(0.0))
            .sum::<f64>()
    }
}

/// `Prox_{τ‖·‖_*}(X) = U Diag(max{νᵢ − τ, 0}) V₁ᵀ`.
pub fn prox_nuclear(x: &Matrix, tau: f64) -> Result<NuclearProx> {
    let svd = ThinSvd::compute(x)?;
    let k_bar = svd.nu.iter().take_while(|&&s| s > tau).count();
    let y = svd.reconstruct_leading(k_bar, |s| s - tau);
    Ok(NuclearProx { y, svd, k_bar })
}

/// `Π_{B^τ₂}(X)`, computed as `X − Prox_{τ‖·‖_*}(X)` so that interior
/// points are returned unchanged.
pub fn project_spectral_ball(x: &Matrix, tau: f64) -> Result<Matrix> {
    Ok(x - prox_nuclear(x, tau)?.y)
}

/// Moreau envelope `E_{τ‖·‖_*}(X) = τ‖Y‖_* + ½‖Y − X‖²_F`.
pub fn env_nuclear(x: &Matrix, tau: f64) -> Result<f64> {
    let prox = prox_nuclear(x, tau)?;
    Ok(env_nuclear_from(&prox, tau))
}

pub(crate) fn env_nuclear_from(prox: &NuclearProx, tau: f64) -> f64 {
    // ‖Y − X‖² = Σ min(νᵢ, τ)²
    let quad: f64 = prox.svd.nu.iter().map(|&s| s.min(tau).powi(2)).sum();
    prox.nuclear_norm_scaled(tau) + 0.5 * quad
}

/// Nuclear norm via SVD.
pub fn nuclear_norm(x: &Matrix) -> Result<f64> {
    Ok(ThinSvd::compute(x)?.nu.iter().sum())
}
