use serde::{Deserialize, Serialize};

use crate::error::{Result, SmmError};
use crate::model::{dot, Dataset};
use crate::Matrix;

/// A trained classifier `X ↦ sign(⟨W, X⟩ + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub w: Matrix,
    pub b: f64,
}

impl Model {
    pub fn new(w: Matrix, b: f64) -> Result<Self> {
        if !b.is_finite() || w.iter().any(|x| !x.is_finite()) {
            return Err(SmmError::InvalidData("model has non-finite entries".into()));
        }
        Ok(Self { w, b })
    }

    fn check(&self, ds: &Dataset) -> Result<()> {
        if self.w.shape() != ds.shape() {
            return Err(SmmError::shape(
                "model",
                format!("{:?}", ds.shape()),
                format!("{:?}", self.w.shape()),
            ));
        }
        Ok(())
    }

    /// `⟨W, Xᵢ⟩ + b` for every sample.
    pub fn decision_values(&self, ds: &Dataset) -> Result<Vec<f64>> {
        self.check(ds)?;
        let w = self.w.as_slice();
        Ok((0..ds.n_samples())
            .map(|i| dot(ds.sample_slice(i), w) + self.b)
            .collect())
    }
}

/// `sign` with `sign(0) = +1`.
pub fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn predict(model: &Model, x: &Matrix) -> Result<f64> {
    if x.shape() != model.w.shape() {
        return Err(SmmError::shape(
            "predict",
            format!("{:?}", model.w.shape()),
            format!("{:?}", x.shape()),
        ));
    }
    Ok(sign(model.w.dot(x) + model.b))
}

/// Fraction of samples whose predicted label matches.
pub fn accuracy(model: &Model, ds: &Dataset) -> Result<f64> {
    let c = confusion(model, ds)?;
    Ok((c.true_pos + c.true_neg) as f64 / ds.n_samples() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

pub fn confusion(model: &Model, ds: &Dataset) -> Result<Confusion> {
    let mut c = Confusion {
        true_pos: 0,
        false_pos: 0,
        true_neg: 0,
        false_neg: 0,
    };
    for (f, &y) in model.decision_values(ds)?.into_iter().zip(ds.labels()) {
        match (sign(f) > 0.0, y > 0.0) {
            (true, true) => c.true_pos += 1,
            (true, false) => c.false_pos += 1,
            (false, false) => c.true_neg += 1,
            (false, true) => c.false_neg += 1,
        }
    }
    Ok(c)
}
