use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

const JITTER_START: f64 = 1e-12;
const JITTER_MAX: f64 = 1e-6;

/// Cholesky factor of `M + εI` where `ε` starts at `1e-12·trace(M)/n` and is
/// raised tenfold until the factorization succeeds or exceeds
/// `1e-6·trace(M)/n`.
pub(crate) struct JitteredCholesky {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

pub(crate) fn jittered_cholesky(m: &DMatrix<f64>, context: &'static str) -> Result<JitteredCholesky> {
    let n = m.nrows();
    let scale = m.trace() / n as f64;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Factorization { context, max_jitter: 0.0 });
    }
    let max_jitter = JITTER_MAX * scale;
    let mut jitter = JITTER_START * scale;
    while jitter <= max_jitter * (1.0 + 1e-9) {
        let mut shifted = m.clone();
        for i in 0..n {
            shifted[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(shifted) {
            return Ok(JitteredCholesky { chol, jitter });
        }
        jitter *= 10.0;
    }
    Err(Error::Factorization { context, max_jitter })
}

/// Cholesky factor of a matrix that is positive definite by construction
/// (a kernel plus a strictly positive diagonal). The plain factorization is
/// tried first so the result is exact; the jitter ladder is only a fallback
/// for rounding trouble.
pub(crate) fn spd_cholesky(m: &DMatrix<f64>, context: &'static str) -> Result<Cholesky<f64, Dyn>> {
    match Cholesky::new(m.clone()) {
        Some(chol) => Ok(chol),
        None => Ok(jittered_cholesky(m, context)?.chol),
    }
}

/// Solves `L x = b` for lower-triangular `L`.
pub(crate) fn solve_lower(l: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    l.solve_lower_triangular(b)
        .expect("Cholesky factor has a positive diagonal")
}

pub(crate) fn log_det_from_factor(l: &DMatrix<f64>) -> f64 {
    2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
}
