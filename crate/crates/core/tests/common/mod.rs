#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use smm_core::{Dataset, DualPoint, Matrix, Vector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(p: usize, q: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(p, q, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vec(n: usize, rng: &mut ChaCha8Rng) -> Vector {
    Vector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Gaussian samples with labels from a random linear rule plus flips, so
/// the data are not separable. Both classes are always present.
pub fn random_dataset(n: usize, p: usize, q: usize, rng: &mut ChaCha8Rng) -> Dataset {
    assert!(n >= 2);
    let w = gaussian(p, q, rng);
    let samples: Vec<Matrix> = (0..n).map(|_| gaussian(p, q, rng)).collect();
    let mut labels: Vec<f64> = samples
        .iter()
        .map(|x| {
            let noise: f64 = StandardNormal.sample(rng);
            let s = w.dot(x) + 0.5 * noise;
            if s >= 0.0 { 1.0 } else { -1.0 }
        })
        .collect();
    labels[0] = 1.0;
    labels[1] = -1.0;
    Dataset::from_samples(&samples, &labels).unwrap()
}

/// `λ ∈ [−C, 0]ⁿ` with some entries exactly at the bounds, `Λ` Gaussian.
pub fn random_dual(n: usize, p: usize, q: usize, c: f64, rng: &mut ChaCha8Rng) -> DualPoint {
    let lambda = Vector::from_fn(n, |_, _| match rng.random_range(0..4) {
        0 => 0.0,
        1 => -c,
        _ => -rng.random_range(0.0..c),
    });
    DualPoint {
        lambda,
        lambda_mat: gaussian(p, q, rng),
    }
}

/// Two Gaussian blobs in the plane as `2 × 1` samples, half per class.
pub fn blobs(n: usize, separation: f64, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let mut samples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = if i % 2 == 0 { 1.0 } else { -1.0 };
        let c = 0.5 * separation * y;
        let x0: f64 = StandardNormal.sample(&mut r);
        let x1: f64 = StandardNormal.sample(&mut r);
        samples.push(Matrix::from_column_slice(2, 1, &[c + x0, c + x1]));
        labels.push(y);
    }
    Dataset::from_samples(&samples, &labels).unwrap()
}

/// `U Diag(f(ν)) Vᵀ` from nalgebra's own SVD.
pub fn spectral_map(x: &Matrix, f: impl Fn(f64) -> f64) -> Matrix {
    let svd = x.clone().svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let s = Matrix::from_diagonal(&svd.singular_values.map(f));
    u * s * vt
}

pub fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}
