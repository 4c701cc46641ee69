//! SVD helpers and the generalized Jacobian of the projection onto the
//! spectral-norm ball `B^τ₂ = {X : ‖X‖₂ ≤ τ}`.
//!
//! All computations work on the "short-wide" orientation `p' ≤ q'`; inputs
//! with more rows than columns are transposed internally (the projection
//! commutes with transposition).
//!
//! For `X = U [Diag(ν) 0] [V₁ V₂]ᵀ` with `ν` nonincreasing, the index sets are
//!
//! ```text
//! α  = {i : νᵢ > τ},  β₁ = {i : νᵢ = τ},  β₂ = {i : νᵢ < τ},  γ = {p'+1..q'}
//! ```
//!
//! and the selected Jacobian element acts as
//!
//! ```text
//! G D = D − U [Ξ¹∘S(H₁) + Ξ²∘T(H₁)] V₁ᵀ − U (Ξ³∘H₂) V₂ᵀ,
//! H₁ = UᵀDV₁,  H₂ = UᵀDV₂,  S(H) = (H+Hᵀ)/2,  T(H) = (H−Hᵀ)/2.
//! ```
//!
//! `Ξ¹, Ξ², Ξ³` vanish outside the rows/columns indexed by `α`, which the
//! fast path exploits: its cost is `O(|α| p q + |α| p²)`.

use std::ops::Range;

use crate::error::{Result, SmmError};
use crate::Matrix;

/// Thin SVD in short-wide orientation: `X' = U Diag(ν) V₁ᵀ` where `X' = X`
/// if `p ≤ q` and `X' = Xᵀ` otherwise.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    /// `p' × p'` orthogonal.
    pub u: Matrix,
    /// `q' × p'` with orthonormal columns.
    pub v1: Matrix,
    /// Nonincreasing singular values (length `p'`).
    pub nu: Vec<f64>,
    pub transposed: bool,
}

impl ThinSvd {
    pub fn compute(x: &Matrix) -> Result<Self> {
        if !x.iter().all(|v| v.is_finite()) {
            return Err(SmmError::Numerical("SVD of non-finite matrix".into()));
        }
        let transposed = x.nrows() > x.ncols();
        let (ps, qs) = if transposed {
            (x.ncols(), x.nrows())
        } else {
            (x.nrows(), x.ncols())
        };
        let m = faer::Mat::<f64>::from_fn(ps, qs, |i, j| {
            if transposed {
                x[(j, i)]
            } else {
                x[(i, j)]
            }
        });
        let svd = m
            .thin_svd()
            .map_err(|e| SmmError::Numerical(format!("SVD failed: {e:?}")))?;
        let (fu, fv, fs) = (svd.U(), svd.V(), svd.S().column_vector());
        // Nonincreasing order, whatever the backend returns.
        let mut order: Vec<usize> = (0..ps).collect();
        order.sort_by(|&a, &b| fs[b].total_cmp(&fs[a]));
        let u = Matrix::from_fn(ps, ps, |i, k| fu[(i, order[k])]);
        let v1 = Matrix::from_fn(qs, ps, |j, k| fv[(j, order[k])]);
        let nu: Vec<f64> = order.iter().map(|&k| fs[k].max(0.0)).collect();
        Ok(Self {
            u,
            v1,
            nu,
            transposed,
        })
    }

    pub fn short_dim(&self) -> usize {
        self.u.nrows()
    }

    pub fn long_dim(&self) -> usize {
        self.v1.nrows()
    }

    /// `U₍:,₀..ₖ₎ Diag(f(ν₀..ₖ)) V₁₍:,₀..ₖ₎ᵀ` in the original orientation.
    pub fn reconstruct_leading(&self, k: usize, f: impl Fn(f64) -> f64) -> Matrix {
        let (ps, qs) = (self.short_dim(), self.long_dim());
        let mut scaled = self.u.columns(0, k).into_owned();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= f(self.nu[j]);
        }
        let y = if k == 0 {
            Matrix::zeros(ps, qs)
        } else {
            scaled * self.v1.columns(0, k).transpose()
        };
        if self.transposed {
            y.transpose()
        } else {
            y
        }
    }

    pub fn spectral_norm(&self) -> f64 {
        self.nu.first().copied().unwrap_or(0.0)
    }

    /// Number of singular values above `rel_tol · ν₁`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let top = self.spectral_norm();
        if top == 0.0 {
            return 0;
        }
        self.nu.iter().filter(|&&s| s > rel_tol * top).count()
    }
}

/// How [`SpectralJacobian::apply`] evaluates the action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianMode {
    /// Only `α`-indexed blocks; `O(|α| p q)`.
    Fast,
    /// Full `Ξ` matrices, both Hadamard products and an explicit `V₂`.
    Dense,
}

/// One element of `∂Π_{B^τ₂}(X)` in factored form.
#[derive(Debug, Clone)]
pub struct SpectralJacobian {
    p: usize,
    q: usize,
    kind: Kind,
}

#[derive(Debug, Clone)]
enum Kind {
    /// `‖X‖₂ ≤ τ`: the projection is locally the identity.
    Interior,
    /// `τ = 0`: the ball is `{0}` and the projection is constant.
    Zero,
    Structured(Box<Factored>),
}

#[derive(Debug, Clone)]
struct Factored {
    svd: ThinSvd,
    tau: f64,
    /// `|α|`
    k1: usize,
    /// `|α| + |β₁|`
    k2: usize,
    /// `(Ξ¹_{αβ₂})ᵢⱼ = (νᵢ − τ)/(νᵢ − νⱼ)`, `|α| × |β₂|`.
    xi1_ab2: Matrix,
    /// `(Ξ²_{αα})ᵢⱼ = 1 − 2τ/(νᵢ + νⱼ)`, `|α| × |α|`.
    xi2_aa: Matrix,
    /// `(Ξ²_{αβ})ᵢⱼ = (νᵢ − τ)/(νᵢ + νⱼ)`, `|α| × |β|`.
    xi2_ab: Matrix,
    /// `(Ξ³_{αγ})ᵢⱼ = 1 − τ/νᵢ` (constant along rows), length `|α|`.
    xi3_d: Vec<f64>,
}

/// Tolerance for deciding `νᵢ = τ`.
pub fn tie_tolerance(nu_max: f64) -> f64 {
    1e-12 * nu_max.max(1.0)
}

impl SpectralJacobian {
    /// The zero map, the Jacobian of `Π_{B^0₂} ≡ 0`.
    pub fn zero(p: usize, q: usize) -> Self {
        Self {
            p,
            q,
            kind: Kind::Zero,
        }
    }

    pub fn build(x: &Matrix, tau: f64) -> Result<Self> {
        if tau == 0.0 {
            return Ok(Self {
                p: x.nrows(),
                q: x.ncols(),
                kind: Kind::Zero,
            });
        }
        Self::from_svd(ThinSvd::compute(x)?, tau)
    }

    /// Builds the Jacobian from an SVD already computed for the prox.
    pub fn from_svd(svd: ThinSvd, tau: f64) -> Result<Self> {
        if !(tau >= 0.0) {
            return Err(SmmError::Config(format!("tau must be >= 0, got {tau}")));
        }
        let (p, q) = if svd.transposed {
            (svd.long_dim(), svd.short_dim())
        } else {
            (svd.short_dim(), svd.long_dim())
        };
        if tau == 0.0 {
            return Ok(Self {
                p,
                q,
                kind: Kind::Zero,
            });
        }
        let nu = &svd.nu;
        let tol = tie_tolerance(svd.spectral_norm());
        let k1 = nu.iter().take_while(|&&s| s > tau + tol).count();
        if k1 == 0 {
            return Ok(Self {
                p,
                q,
                kind: Kind::Interior,
            });
        }
        let k2 = k1 + nu[k1..].iter().take_while(|&&s| s >= tau - tol).count();
        let ps = nu.len();
        let xi1_ab2 = Matrix::from_fn(k1, ps - k2, |i, j| {
            let j = j + k2;
            (nu[i] - tau) / (nu[i] - nu[j])
        });
        let xi2_aa = Matrix::from_fn(k1, k1, |i, j| 1.0 - 2.0 * tau / (nu[i] + nu[j]));
        let xi2_ab = Matrix::from_fn(k1, ps - k1, |i, j| {
            let j = j + k1;
            (nu[i] - tau) / (nu[i] + nu[j])
        });
        let xi3_d = nu[..k1].iter().map(|&s| 1.0 - tau / s).collect();
        Ok(Self {
            p,
            q,
            kind: Kind::Structured(Box::new(Factored {
                svd,
                tau,
                k1,
                k2,
                xi1_ab2,
                xi2_aa,
                xi2_ab,
                xi3_d,
            })),
        })
    }

    /// True when the Jacobian is the identity (`‖X‖₂ ≤ τ`, `α = ∅`).
    pub fn is_interior(&self) -> bool {
        matches!(self.kind, Kind::Interior)
    }

    /// True when `τ = 0` and the Jacobian is the zero map.
    pub fn is_zero(&self) -> bool {
        matches!(self.kind, Kind::Zero)
    }

    fn factored(&self) -> Option<&Factored> {
        match &self.kind {
            Kind::Structured(f) => Some(f),
            _ => None,
        }
    }

    pub fn alpha(&self) -> Range<usize> {
        self.factored().map_or(0..0, |f| 0..f.k1)
    }

    pub fn beta1(&self) -> Range<usize> {
        self.factored().map_or(0..0, |f| f.k1..f.k2)
    }

    pub fn beta2(&self) -> Range<usize> {
        self.factored()
            .map_or(0..0, |f| f.k2..f.svd.short_dim())
    }

    pub fn alpha_len(&self) -> usize {
        self.alpha().len()
    }

    pub fn singular_values(&self) -> Option<&[f64]> {
        self.factored().map(|f| f.svd.nu.as_slice())
    }

    pub fn tau(&self) -> Option<f64> {
        self.factored().map(|f| f.tau)
    }

    /// Nonzero `Ξ` entries: `(Ξ¹_{αβ₂}, Ξ²_{αα}, Ξ²_{αβ}, Ξ³ row factors)`.
    pub fn xi_blocks(&self) -> Option<(&Matrix, &Matrix, &Matrix, &[f64])> {
        self.factored()
            .map(|f| (&f.xi1_ab2, &f.xi2_aa, &f.xi2_ab, f.xi3_d.as_slice()))
    }

    pub fn apply(&self, d: &Matrix, mode: JacobianMode) -> Result<Matrix> {
        if d.shape() != (self.p, self.q) {
            return Err(SmmError::shape(
                "apply_spectral_jacobian",
                format!("{}x{}", self.p, self.q),
                format!("{}x{}", d.nrows(), d.ncols()),
            ));
        }
        let f = match &self.kind {
            Kind::Interior => return Ok(d.clone()),
            Kind::Zero => return Ok(Matrix::zeros(self.p, self.q)),
            Kind::Structured(f) => f,
        };
        let oriented = if f.svd.transposed {
            d.transpose()
        } else {
            d.clone()
        };
        let g1g2 = match mode {
            JacobianMode::Fast => f.low_rank_part_fast(&oriented),
            JacobianMode::Dense => f.low_rank_part_dense(&oriented),
        };
        let out = oriented - g1g2;
        Ok(if f.svd.transposed {
            out.transpose()
        } else {
            out
        })
    }
}

impl Factored {
    /// `(Ξ¹ ∘ S(H) + Ξ² ∘ T(H))ᵢⱼ` given `hij = Hᵢⱼ`, `hji = Hⱼᵢ`, for `i ∈ α`
    /// and any `j`; the matrix is symmetric in its coefficients so the
    /// `(j, i)` entry uses the same coefficients with `T` negated.
    #[inline]
    fn omega_entry(&self, i: usize, j: usize, hij: f64, hji: f64) -> f64 {
        let s = 0.5 * (hij + hji);
        let t = 0.5 * (hij - hji);
        if j < self.k1 {
            s + self.xi2_aa[(i, j)] * t
        } else if j < self.k2 {
            s + self.xi2_ab[(i, j - self.k1)] * t
        } else {
            self.xi1_ab2[(i, j - self.k2)] * s + self.xi2_ab[(i, j - self.k1)] * t
        }
    }

    /// `G₁D + G₂D` using only `α`-indexed blocks.
    fn low_rank_part_fast(&self, d: &Matrix) -> Matrix {
        let (u, v1) = (&self.svd.u, &self.svd.v1);
        let ps = u.nrows();
        let k1 = self.k1;
        let ua = u.columns(0, k1);
        // Uₐᵀ D  (|α| × q')
        let ua_t_d = ua.transpose() * d;
        // H[α, :] = Uₐᵀ D V₁  (|α| × p')
        let h_rows = &ua_t_d * v1;
        // H[:, α] = Uᵀ (D V₁ₐ)  (p' × |α|)
        let h_cols = u.transpose() * (d * v1.columns(0, k1));

        let omega_rows = Matrix::from_fn(k1, ps, |i, j| {
            self.omega_entry(i, j, h_rows[(i, j)], h_cols[(j, i)])
        });
        let rest = ps - k1;
        let omega_cols = Matrix::from_fn(rest, k1, |r, i| {
            let j = r + k1;
            // entry (j, i) with i ∈ α: swap roles, T changes sign
            self.omega_entry(i, j, h_cols[(j, i)], h_rows[(i, j)])
        });

        // Row block contribution plus G₂ share the left factor Uₐ.
        let mut left = &omega_rows * v1.transpose();
        let g2_inner = &ua_t_d - &h_rows * v1.transpose();
        for i in 0..k1 {
            let scale = self.xi3_d[i];
            let add = g2_inner.row(i) * scale;
            let mut row = left.row_mut(i);
            row += add;
        }
        let mut out = ua * left;
        if rest > 0 {
            out += u.columns(k1, rest) * omega_cols * v1.columns(0, k1).transpose();
        }
        out
    }

    /// `G₁D + G₂D` from full `Ξ¹, Ξ², Ξ³` and an explicit completion `V₂`.
    fn low_rank_part_dense(&self, d: &Matrix) -> Matrix {
        let (u, v1) = (&self.svd.u, &self.svd.v1);
        let ps = u.nrows();
        let qs = v1.nrows();
        let (k1, k2) = (self.k1, self.k2);
        let nu = &self.svd.nu;
        let tau = self.tau;

        let in_a = |i: usize| i < k1;
        let in_b1 = |i: usize| i >= k1 && i < k2;
        let xi1 = Matrix::from_fn(ps, ps, |i, j| {
            if (in_a(i) && (in_a(j) || in_b1(j))) || (in_b1(i) && in_a(j)) {
                1.0
            } else if in_a(i) && j >= k2 {
                (nu[i] - tau) / (nu[i] - nu[j])
            } else if in_a(j) && i >= k2 {
                (nu[j] - tau) / (nu[j] - nu[i])
            } else {
                0.0
            }
        });
        let xi2 = Matrix::from_fn(ps, ps, |i, j| {
            if in_a(i) && in_a(j) {
                1.0 - 2.0 * tau / (nu[i] + nu[j])
            } else if in_a(i) {
                (nu[i] - tau) / (nu[i] + nu[j])
            } else if in_a(j) {
                (nu[j] - tau) / (nu[i] + nu[j])
            } else {
                0.0
            }
        });
        let h1 = u.transpose() * d * v1;
        let s = (&h1 + h1.transpose()) * 0.5;
        let t = (&h1 - h1.transpose()) * 0.5;
        let inner = xi1.component_mul(&s) + xi2.component_mul(&t);
        let mut out = u * inner * v1.transpose();

        if qs > ps {
            let v2 = orthogonal_complement(v1);
            let h2 = u.transpose() * d * &v2;
            let xi3 = Matrix::from_fn(ps, qs - ps, |i, _| {
                if in_a(i) {
                    1.0 - tau / nu[i]
                } else {
                    0.0
                }
            });
            out += u * xi3.component_mul(&h2) * v2.transpose();
        }
        out
    }
}

/// Orthonormal basis of the complement of the column span of `v1`
/// (`q × p` with orthonormal columns), from the eigenvectors of
/// `I − V₁V₁ᵀ` with eigenvalue one.
fn orthogonal_complement(v1: &Matrix) -> Matrix {
    let q = v1.nrows();
    let proj = Matrix::identity(q, q) - v1 * v1.transpose();
    let eig = proj.symmetric_eigen();
    let cols: Vec<_> = (0..q)
        .filter(|&k| eig.eigenvalues[k] > 0.5)
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect();
    Matrix::from_columns(&cols)
}
