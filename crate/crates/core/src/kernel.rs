//! First- and second-order stable spline kernels.
//!
//! Entry formulas use 1-based indices `i, j ∈ {1..n}`, with
//! `m = max(i, j)`:
//!
//! ```text
//! first order (TC):  K[i][j] = β^m
//! second order:      K[i][j] = β^(i+j)·β^m / 2 − β^(3m) / 6
//! ```
//!
//! Storage is 0-based, so `matrix()[(0, 0)]` is `K[1][1]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{jittered_cholesky, solve_lower};
use crate::model::ImpulseResponse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KernelOrder {
    #[default]
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub order: KernelOrder,
    pub beta: f64,
    pub n: usize,
}

impl KernelSpec {
    pub fn new(order: KernelOrder, beta: f64, n: usize) -> Result<Self> {
        let spec = Self { order, beta, n };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::invalid(format!(
                "kernel beta must lie in [0, 1), got {}",
                self.beta
            )));
        }
        if self.n == 0 {
            return Err(Error::invalid("kernel size n must be >= 1"));
        }
        Ok(())
    }

    /// Entry `K[i][j]` for 1-based `i, j`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let m = i.max(j) as i32;
        let b = self.beta;
        match self.order {
            KernelOrder::First => b.powi(m),
            KernelOrder::Second => {
                b.powi((i + j) as i32) * b.powi(m) / 2.0 - b.powi(3 * m) / 6.0
            }
        }
    }
}

/// A realized `n×n` stable spline covariance.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    matrix: DMatrix<f64>,
    spec: KernelSpec,
}

impl KernelMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Arbitrary symmetric covariance in place of a stable spline kernel.
    /// Used to exercise the sampler with hand-built priors.
    pub fn from_covariance(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.is_empty() {
            return Err(Error::invalid("kernel must be a non-empty square matrix"));
        }
        if matrix != matrix.transpose() {
            return Err(Error::invalid("kernel must be symmetric"));
        }
        let n = matrix.nrows();
        Ok(Self {
            matrix,
            spec: KernelSpec { order: KernelOrder::First, beta: f64::NAN, n },
        })
    }
}

pub fn build_kernel(spec: KernelSpec) -> Result<KernelMatrix> {
    spec.validate()?;
    let n = spec.n;
    let mut matrix = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = spec.entry(i + 1, j + 1);
            matrix[(i, j)] = v;
            matrix[(j, i)] = v;
        }
    }
    Ok(KernelMatrix { matrix, spec })
}

/// Lower-triangular `L` with `L·Lᵀ = K + εI`.
#[derive(Debug, Clone)]
pub struct KernelFactor {
    lower: DMatrix<f64>,
    jitter: f64,
}

impl KernelFactor {
    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    /// The `ε` actually added to the diagonal.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn n(&self) -> usize {
        self.lower.nrows()
    }

    /// `gᵀ(K + εI)⁻¹g` through one triangular solve.
    pub fn quadratic_form(&self, g: &DVector<f64>) -> Result<f64> {
        if g.len() != self.n() {
            return Err(Error::invalid(format!(
                "vector length {} does not match kernel size {}",
                g.len(),
                self.n()
            )));
        }
        Ok(solve_lower(&self.lower, g).norm_squared())
    }
}

pub fn kernel_factor(k: &KernelMatrix) -> Result<KernelFactor> {
    let f = jittered_cholesky(&k.matrix, "stable spline kernel")?;
    Ok(KernelFactor { lower: f.chol.unpack(), jitter: f.jitter })
}

/// `gᵀK⁻¹g` via the jittered Cholesky factor; never forms `K⁻¹`.
pub fn kernel_quadratic_form(k: &KernelMatrix, g: &ImpulseResponse) -> Result<f64> {
    kernel_factor(k)?.quadratic_form(g.as_vector())
}
