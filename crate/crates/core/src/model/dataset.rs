use crate::error::{Result, SmmError};
use crate::{Matrix, Vector};

/// Labeled matrix samples `{(Xᵢ, yᵢ)}` with `Xᵢ ∈ R^{p×q}`, `yᵢ ∈ {−1, +1}`.
///
/// Features live in one contiguous buffer, sample-major, each sample in
/// column-major order (the layout of [`Matrix`]). A sample's slice is
/// therefore directly comparable with `W.as_slice()`, and restricted
/// operator applications touch only the selected samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    q: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from a column-major feature buffer of length `n·p·q`.
    pub fn new(p: usize, q: usize, features: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        let ds = Self::new_unchecked_classes(p, q, features, labels)?;
        ds.check_both_classes()?;
        Ok(ds)
    }

    /// Same validation as [`Dataset::new`] except that both classes need not
    /// be present. Used for sample subsets.
    fn new_unchecked_classes(
        p: usize,
        q: usize,
        features: Vec<f64>,
        labels: Vec<f64>,
    ) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(SmmError::InvalidData(format!(
                "sample shape must be nonempty, got {p}x{q}"
            )));
        }
        let n = labels.len();
        if n == 0 {
            return Err(SmmError::InvalidData("dataset has no samples".into()));
        }
        if features.len() != n * p * q {
            return Err(SmmError::shape(
                "dataset features",
                format!("{} values ({n} samples of {p}x{q})", n * p * q),
                features.len(),
            ));
        }
        if let Some(i) = labels.iter().position(|&y| y != 1.0 && y != -1.0) {
            return Err(SmmError::InvalidData(format!(
                "label must be ±1 (sample {i} has {})",
                labels[i]
            )));
        }
        if let Some(k) = features.iter().position(|x| !x.is_finite()) {
            return Err(SmmError::InvalidData(format!(
                "non-finite feature value in sample {}",
                k / (p * q)
            )));
        }
        Ok(Self {
            n,
            p,
            q,
            features,
            labels,
        })
    }

    pub fn from_samples(samples: &[Matrix], labels: &[f64]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| SmmError::InvalidData("dataset has no samples".into()))?;
        let (p, q) = first.shape();
        if samples.len() != labels.len() {
            return Err(SmmError::shape("labels", samples.len(), labels.len()));
        }
        let mut features = Vec::with_capacity(samples.len() * p * q);
        for x in samples {
            if x.shape() != (p, q) {
                return Err(SmmError::shape(
                    "sample",
                    format!("{p}x{q}"),
                    format!("{}x{}", x.nrows(), x.ncols()),
                ));
            }
            features.extend_from_slice(x.as_slice());
        }
        Self::new(p, q, features, labels.to_vec())
    }

    fn check_both_classes(&self) -> Result<()> {
        let pos = self.labels.iter().any(|&y| y > 0.0);
        let neg = self.labels.iter().any(|&y| y < 0.0);
        if pos && neg {
            Ok(())
        } else {
            Err(SmmError::InvalidData(
                "both classes (+1 and -1) must be present".into(),
            ))
        }
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> usize {
        self.p
    }

    pub fn cols(&self) -> usize {
        self.q
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label_vector(&self) -> Vector {
        Vector::from_column_slice(&self.labels)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Column-major slice of sample `i`.
    #[inline]
    pub fn sample_slice(&self, i: usize) -> &[f64] {
        let pq = self.p * self.q;
        &self.features[i * pq..(i + 1) * pq]
    }

    pub fn sample(&self, i: usize) -> Matrix {
        Matrix::from_column_slice(self.p, self.q, self.sample_slice(i))
    }

    /// Samples at `indices`, in the given order. Both classes need not be
    /// present in the result; use [`Dataset::has_both_classes`] to check.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let pq = self.p * self.q;
        let mut features = Vec::with_capacity(indices.len() * pq);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            self.check_index(i)?;
            features.extend_from_slice(self.sample_slice(i));
            labels.push(self.labels[i]);
        }
        Self::new_unchecked_classes(self.p, self.q, features, labels)
    }

    pub fn has_both_classes(&self) -> bool {
        self.check_both_classes().is_ok()
    }

    pub fn positive_fraction(&self) -> f64 {
        self.labels.iter().filter(|&&y| y > 0.0).count() as f64 / self.n as f64
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n {
            Err(SmmError::IndexOutOfRange {
                index: i,
                len: self.n,
            })
        } else {
            Ok(())
        }
    }

    fn check_matrix(&self, w: &Matrix, context: &'static str) -> Result<()> {
        if w.shape() != (self.p, self.q) {
            return Err(SmmError::shape(
                context,
                format!("{}x{}", self.p, self.q),
                format!("{}x{}", w.nrows(), w.ncols()),
            ));
        }
        Ok(())
    }

    /// `⟨Xᵢ, W⟩` for one sample (no label factor).
    #[inline]
    pub fn inner(&self, i: usize, w: &[f64]) -> f64 {
        dot(self.sample_slice(i), w)
    }

    /// `(AW)ᵢ = yᵢ⟨Xᵢ, W⟩`.
    pub fn apply_a(&self, w: &Matrix) -> Result<Vector> {
        self.check_matrix(w, "apply_a")?;
        let ws = w.as_slice();
        Ok(Vector::from_iterator(
            self.n,
            (0..self.n).map(|i| self.labels[i] * self.inner(i, ws)),
        ))
    }

    /// `A*z = Σₖ zₖ yₖ Xₖ`.
    pub fn apply_a_adjoint(&self, z: &Vector) -> Result<Matrix> {
        if z.len() != self.n {
            return Err(SmmError::shape("apply_a_adjoint", self.n, z.len()));
        }
        let mut out = vec![0.0; self.p * self.q];
        for i in 0..self.n {
            let c = z[i] * self.labels[i];
            if c != 0.0 {
                axpy(c, self.sample_slice(i), &mut out);
            }
        }
        Ok(Matrix::from_vec(self.p, self.q, out))
    }

    /// `A_I W = (AW)_I`, costing `O(|I|pq)`.
    pub fn apply_a_restricted(&self, indices: &[usize], w: &Matrix) -> Result<Vector> {
        self.check_matrix(w, "apply_a_restricted")?;
        let ws = w.as_slice();
        let mut out = Vector::zeros(indices.len());
        for (k, &i) in indices.iter().enumerate() {
            self.check_index(i)?;
            out[k] = self.labels[i] * self.inner(i, ws);
        }
        Ok(out)
    }

    /// `A*_I z_I = Σ_{j∈I} zⱼ yⱼ Xⱼ` with `z_I` indexed like `indices`.
    pub fn apply_a_adjoint_restricted(&self, indices: &[usize], z: &Vector) -> Result<Matrix> {
        if z.len() != indices.len() {
            return Err(SmmError::shape(
                "apply_a_adjoint_restricted",
                indices.len(),
                z.len(),
            ));
        }
        let mut out = vec![0.0; self.p * self.q];
        for (k, &i) in indices.iter().enumerate() {
            self.check_index(i)?;
            let c = z[k] * self.labels[i];
            if c != 0.0 {
                axpy(c, self.sample_slice(i), &mut out);
            }
        }
        Ok(Matrix::from_vec(self.p, self.q, out))
    }

    /// `Σ_{j∈I} Xⱼ`, which equals `A*_I y_I` since `yⱼ² = 1`.
    pub(crate) fn sum_samples(&self, indices: &[usize]) -> Matrix {
        let mut out = vec![0.0; self.p * self.q];
        for &i in indices {
            axpy(1.0, self.sample_slice(i), &mut out);
        }
        Matrix::from_vec(self.p, self.q, out)
    }

    /// `A*_I A_I D = Σ_{j∈I} ⟨Xⱼ, D⟩ Xⱼ`, also returning `Σ_{j∈I} ⟨Xⱼ, D⟩`
    /// (which equals `y_Iᵀ A_I D`).
    pub(crate) fn gram_restricted(&self, indices: &[usize], d: &[f64], out: &mut [f64]) -> f64 {
        out.fill(0.0);
        let mut total = 0.0;
        for &i in indices {
            let x = self.sample_slice(i);
            let t = dot(x, d);
            total += t;
            axpy(t, x, out);
        }
        total
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four accumulators let the compiler vectorize without reassociation.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
