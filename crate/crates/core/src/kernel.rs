//! Stationary covariance functions with per-dimension lengthscales.

use crate::error::{arg_err, Error, Result};
use alloc::vec::Vec;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum KernelFamily {
    Matern32,
    SquaredExponential,
}

impl KernelFamily {
    /// Correlation as a function of the scaled distance `r`.
    #[inline]
    pub fn correlation(self, r: f64) -> f64 {
        match self {
            KernelFamily::Matern32 => {
                let s = SQRT_3 * r;
                (1.0 + s) * libm::exp(-s)
            }
            KernelFamily::SquaredExponential => libm::exp(-0.5 * r * r),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KernelParams {
    pub family: KernelFamily,
    pub variance: f64,
    pub lengthscales: Vec<f64>,
}

impl KernelParams {
    pub fn new(family: KernelFamily, variance: f64, lengthscales: Vec<f64>) -> Result<Self> {
        let params = Self { family, variance, lengthscales };
        params.validate()?;
        Ok(params)
    }

    /// Same lengthscale in every one of `dim` directions.
    pub fn isotropic(family: KernelFamily, variance: f64, lengthscale: f64, dim: usize) -> Result<Self> {
        Self::new(family, variance, alloc::vec![lengthscale; dim])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return arg_err("kernel variance must be positive and finite");
        }
        if self.lengthscales.is_empty() {
            return arg_err("kernel needs at least one lengthscale");
        }
        if self.lengthscales.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return arg_err("kernel lengthscales must be positive and finite");
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// Covariance `c(x, y)` without dimension checks.
    #[inline]
    pub(crate) fn cov(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut r2 = 0.0;
        for ((xi, yi), l) in x.iter().zip(y).zip(&self.lengthscales) {
            let t = (xi - yi) / l;
            r2 += t * t;
        }
        self.variance * self.family.correlation(libm::sqrt(r2))
    }
}

/// Evaluates `c(x, y)`.
pub fn kernel_eval(params: &KernelParams, x: &[f64], y: &[f64]) -> Result<f64> {
    let d = params.dim();
    if x.len() != d {
        return Err(Error::Dimension { expected: d, got: x.len() });
    }
    if y.len() != d {
        return Err(Error::Dimension { expected: d, got: y.len() });
    }
    Ok(params.cov(x, y))
}
