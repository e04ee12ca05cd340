//! Domain types shared by every estimator: datasets, impulse responses, the
//! convolution regressor and the FIT score.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Paired input/output records `u(1..N)`, `y(1..N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    u: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(u: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if u.is_empty() {
            return Err(Error::invalid("dataset must contain at least one sample"));
        }
        if u.len() != y.len() {
            return Err(Error::invalid(format!(
                "input has {} samples but output has {}",
                u.len(),
                y.len()
            )));
        }
        if let Some(i) = u.iter().chain(&y).position(|v| !v.is_finite()) {
            let (which, idx) = if i < u.len() { ("u", i) } else { ("y", i - u.len()) };
            return Err(Error::invalid(format!("non-finite sample {which}({})", idx + 1)));
        }
        Ok(Self { u, y })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn y_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.y)
    }
}

/// Samples `g(1), …, g(n)` of a strictly causal impulse response.
///
/// `g(0)` is structurally zero and is not stored; index 0 of the vector is
/// `g(1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse(DVector<f64>);

impl ImpulseResponse {
    pub fn new(g: Vec<f64>) -> Result<Self> {
        Self::from_vector(DVector::from_vec(g))
    }

    pub fn from_vector(g: DVector<f64>) -> Result<Self> {
        if g.is_empty() {
            return Err(Error::invalid("impulse response must have length n >= 1"));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("impulse response contains non-finite entries"));
        }
        Ok(Self(g))
    }

    pub fn zeros(n: usize) -> Self {
        Self(DVector::zeros(n))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.iter().copied().collect()
    }
}

/// Lower-triangular Toeplitz regressor with entry `(t, k) = u(t − k)`,
/// `t = 1..N`, `k = 1..n`, and `u(s) = 0` for `s <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorMatrix(DMatrix<f64>);

impl RegressorMatrix {
    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Noiseless output `U·g`.
    pub fn apply(&self, g: &ImpulseResponse) -> Result<DVector<f64>> {
        if g.len() != self.ncols() {
            return Err(Error::invalid(format!(
                "impulse response length {} does not match regressor width {}",
                g.len(),
                self.ncols()
            )));
        }
        Ok(&self.0 * g.as_vector())
    }

    #[cfg(test)]
    pub(crate) fn from_matrix(m: DMatrix<f64>) -> Self {
        Self(m)
    }
}

/// Prior scale `λ`, kernel decay `β` and noise variance `σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    pub lambda: f64,
    pub beta: f64,
    pub sigma2: f64,
}

impl Hyperparameters {
    pub fn new(lambda: f64, beta: f64, sigma2: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::invalid(format!("beta must lie in [0, 1), got {beta}")));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid(format!("sigma2 must be > 0, got {sigma2}")));
        }
        Ok(Self { lambda, beta, sigma2 })
    }
}

/// Builds the `N×n` regressor from the first `N` input samples.
pub fn build_regressor(u: &[f64], rows: usize, n: usize) -> Result<RegressorMatrix> {
    if n == 0 {
        return Err(Error::invalid("impulse response length n must be >= 1"));
    }
    if rows == 0 || u.len() < rows {
        return Err(Error::invalid(format!(
            "need N >= 1 input samples, have {} for N = {rows}",
            u.len()
        )));
    }
    Ok(RegressorMatrix(DMatrix::from_fn(rows, n, |t, k| {
        // 0-based t, k: entry is u(t - k - 1) in 0-based input storage.
        if t > k {
            u[t - k - 1]
        } else {
            0.0
        }
    })))
}

/// `100·(1 − ‖g − ĝ‖₂ / ‖g‖₂)`, unclamped.
pub fn fit_score(g_true: &ImpulseResponse, g_hat: &ImpulseResponse) -> Result<f64> {
    if g_true.len() != g_hat.len() {
        return Err(Error::invalid(format!(
            "FIT needs equal lengths, got {} and {}",
            g_true.len(),
            g_hat.len()
        )));
    }
    let norm = g_true.as_vector().norm();
    if norm == 0.0 {
        return Err(Error::invalid("FIT is undefined for a zero true response"));
    }
    let err = (g_true.as_vector() - g_hat.as_vector()).norm();
    Ok(100.0 * (1.0 - err / norm))
}
