use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SmmError};
use crate::model::Dataset;
use crate::spectral::ThinSvd;
use crate::Matrix;

const MAX_LABEL_ATTEMPTS: usize = 10;

/// Parameters of the low-rank synthetic family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    /// Latent rank `r ≤ min(p, q)`.
    pub r: usize,
    pub noise_delta: f64,
    pub seed: u64,
    pub train_fraction: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n: 2000,
            p: 20,
            q: 20,
            r: 5,
            noise_delta: 2e-4,
            seed: 0,
            train_fraction: 0.8,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.p == 0 || self.q == 0 {
            return Err(SmmError::Config(format!(
                "need n >= 2 and p, q >= 1, got n={} p={} q={}",
                self.n, self.p, self.q
            )));
        }
        if self.r == 0 || self.r > self.p.min(self.q) || self.r > self.n {
            return Err(SmmError::Config(format!(
                "rank r={} must satisfy 1 <= r <= min(p, q, n)",
                self.r
            )));
        }
        if !(self.noise_delta >= 0.0 && self.noise_delta.is_finite()) {
            return Err(SmmError::Config("noise_delta must be >= 0".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(SmmError::Config(
                "train_fraction must lie in (0, 1)".into(),
            ));
        }
        Ok(())
    }

    fn n_train(&self) -> usize {
        ((self.n as f64 * self.train_fraction).round() as usize).clamp(1, self.n - 1)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub train: Dataset,
    pub test: Dataset,
    /// The rank-`r` matrix defining the labels.
    pub w_true: Matrix,
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    // Row-major draw order, independent of the storage layout.
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = StandardNormal.sample(rng);
        }
    }
    m
}

/// Generates the low-rank synthetic family.
///
/// `r` orthonormal vectors `b₁..b_r ∈ Rⁿ` come from a QR factorization of
/// a Gaussian matrix. Column `ℓ` of every sample is tied to
/// `b_{⌈r(ℓ+1)/q⌉}`: entry `(k, ℓ)` of `Xᵢ` is the `i`-th entry of
/// `b_{⌈r(ℓ+1)/q⌉} + ε`, `ε ~ N(0, δ²Iₙ)`. Labels are `sign(⟨W, Xᵢ⟩)` for a
/// Gaussian factor product `W` of rank `r`.
pub fn gen_synthetic(spec: &SynthSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let SynthSpec {
        n,
        p,
        q,
        r,
        noise_delta,
        ..
    } = *spec;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let basis = gaussian_matrix(n, r, &mut rng).qr().q();
    let noise = Normal::new(0.0, noise_delta)
        .map_err(|e| SmmError::Config(format!("noise distribution: {e}")))?;

    let pq = p * q;
    let mut features = vec![0.0; n * pq];
    for k in 0..p {
        for l in 0..q {
            let block = (r * (l + 1)).div_ceil(q) - 1;
            for i in 0..n {
                let eps = if noise_delta > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                };
                features[i * pq + l * p + k] = basis[(i, block)] + eps;
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = spec.n_train();

    for attempt in 0..MAX_LABEL_ATTEMPTS {
        let w = gaussian_matrix(p, r, &mut rng) * gaussian_matrix(r, q, &mut rng);
        if ThinSvd::compute(&w)?.rank(1e-10) != r {
            log::debug!("synthetic: W rank deficient on attempt {attempt}");
            continue;
        }
        let ws = w.as_slice();
        let labels: Vec<f64> = (0..n)
            .map(|i| super::sign(crate::model::dot(&features[i * pq..(i + 1) * pq], ws)))
            .collect();
        let split = |idx: &[usize]| {
            let mut f = Vec::with_capacity(idx.len() * pq);
            let mut y = Vec::with_capacity(idx.len());
            for &i in idx {
                f.extend_from_slice(&features[i * pq..(i + 1) * pq]);
                y.push(labels[i]);
            }
            Dataset::new(p, q, f, y)
        };
        match (split(&order[..n_train]), split(&order[n_train..])) {
            (Ok(train), Ok(test)) => {
                return Ok(SyntheticData {
                    train,
                    test,
                    w_true: w,
                })
            }
            _ => log::debug!("synthetic: a split lacks a class on attempt {attempt}"),
        }
    }
    Err(SmmError::InvalidData(format!(
        "could not draw W giving both classes in each split after {MAX_LABEL_ATTEMPTS} attempts"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthSpec {
        SynthSpec {
            n: 60,
            p: 4,
            q: 6,
            r: 2,
            seed,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = gen_synthetic(&small(3)).unwrap();
        let b = gen_synthetic(&small(3)).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        assert_eq!(a.w_true, b.w_true);
        let c = gen_synthetic(&small(4)).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn ground_truth_rank_and_split_sizes() {
        let d = gen_synthetic(&small(5)).unwrap();
        assert_eq!(ThinSvd::compute(&d.w_true).unwrap().rank(1e-10), 2);
        assert_eq!(d.train.n_samples(), 48);
        assert_eq!(d.test.n_samples(), 12);
    }

    #[test]
    fn noiseless_rank_one_samples_are_constant() {
        let spec = SynthSpec {
            noise_delta: 0.0,
            r: 1,
            ..small(6)
        };
        let d = gen_synthetic(&spec).unwrap();
        for i in 0..d.train.n_samples() {
            let x = d.train.sample_slice(i);
            assert!(x.iter().all(|&v| v == x[0]));
        }
    }

    #[test]
    fn noiseless_block_structure() {
        let spec = SynthSpec {
            noise_delta: 0.0,
            ..small(7)
        };
        let d = gen_synthetic(&spec).unwrap();
        // q = 6, r = 2: columns 0..3 use b₁ and 3..6 use b₂; rows repeat.
        let x = d.train.sample(0);
        for l in 0..6 {
            for k in 1..4 {
                assert_eq!(x[(k, l)], x[(0, l)]);
            }
            let first = if l < 3 { x[(0, 0)] } else { x[(0, 3)] };
            assert_eq!(x[(0, l)], first);
        }
    }

    #[test]
    fn ground_truth_classifies_noiseless_data_perfectly() {
        let spec = SynthSpec {
            noise_delta: 0.0,
            ..small(8)
        };
        let d = gen_synthetic(&spec).unwrap();
        let m = crate::data::Model::new(d.w_true.clone(), 0.0).unwrap();
        assert_eq!(crate::data::accuracy(&m, &d.train).unwrap(), 1.0);
        assert_eq!(crate::data::accuracy(&m, &d.test).unwrap(), 1.0);
    }

    #[test]
    fn rejects_bad_rank() {
        let spec = SynthSpec { r: 5, ..small(1) };
        assert!(matches!(gen_synthetic(&spec), Err(SmmError::Config(_))));
    }
}
