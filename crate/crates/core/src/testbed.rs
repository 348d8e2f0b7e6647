//! Benchmark functions, input laws, space-filling designs and the
//! Monte Carlo ground truth used to score estimates.

use crate::error::{arg_err, Error, Result};
use crate::percentile::{empirical_percentile, percentile_rank};
use crate::points::Points;
use crate::special::norm_quantile;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{E, PI};
use core::sync::atomic::{AtomicU64, Ordering};
use nalgebra::{Cholesky, DMatrix};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Rescaled Branin on `[0, 1]^2`.
pub fn branin(x: &[f64]) -> f64 {
    let x1 = 15.0 * x[0] - 5.0;
    let x2 = 15.0 * x[1];
    let t = x2 - 5.1 * x1 * x1 / (4.0 * PI * PI) + 5.0 * x1 / PI - 6.0;
    t * t + (10.0 - 10.0 / (8.0 * PI)) * libm::cos(x1) + 10.0
}

const HARTMAN_C: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
// row j = input dimension, column i = term
const HARTMAN_A: [[f64; 4]; 4] =
    [[10.00, 0.05, 3.00, 17.00], [3.00, 10.00, 3.50, 8.00], [17.00, 17.00, 1.70, 0.05], [3.50, 0.10, 10.00, 10.00]];
const HARTMAN_P: [[f64; 4]; 4] = [
    [0.1312, 0.2329, 0.2348, 0.4047],
    [0.1696, 0.4135, 0.1451, 0.8828],
    [0.5569, 0.8307, 0.3522, 0.8732],
    [0.0124, 0.3736, 0.2883, 0.5743],
];

/// Four-dimensional Hartman variant
/// `-(2.58 + sum_i C_i exp(-sum_j a_ji (x_j - p_ji)^2)) / 1.94`.
pub fn hartman4(x: &[f64]) -> f64 {
    let mut acc = 2.58;
    for i in 0..4 {
        let mut inner = 0.0;
        for j in 0..4 {
            let t = x[j] - HARTMAN_P[j][i];
            inner += HARTMAN_A[j][i] * t * t;
        }
        acc += HARTMAN_C[i] * libm::exp(-inner);
    }
    -acc / 1.94
}

/// Ackley in any dimension, with `1/d` normalization.
pub fn ackley(x: &[f64]) -> f64 {
    ackley_terms(x, x.len())
}

/// Ackley as a sum over the first four coordinates with `1/4` normalization,
/// whatever the input dimension.
pub fn ackley_first4(x: &[f64]) -> f64 {
    ackley_terms(&x[..4.min(x.len())], 4)
}

fn ackley_terms(x: &[f64], norm: usize) -> f64 {
    let n = norm as f64;
    let sq: f64 = x.iter().map(|v| v * v).sum();
    let cs: f64 = x.iter().map(|v| libm::cos(2.0 * PI * v)).sum();
    20.0 + E - 20.0 * libm::exp(-0.2 * libm::sqrt(sq / n)) - libm::exp(cs / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "name", rename_all = "snake_case", deny_unknown_fields))]
pub enum FunctionKind {
    Branin2,
    Hartman4,
    Ackley {
        dim: usize,
        /// Sum only the first four coordinates, with `1/4` factors.
        #[cfg_attr(feature = "serde", serde(default))]
        first4: bool,
    },
}

impl FunctionKind {
    pub fn dim(&self) -> usize {
        match *self {
            FunctionKind::Branin2 => 2,
            FunctionKind::Hartman4 => 4,
            FunctionKind::Ackley { dim, .. } => dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let FunctionKind::Ackley { dim, first4 } = *self {
            if dim == 0 || (first4 && dim < 4) {
                return arg_err(alloc::format!("invalid Ackley dimension {dim}"));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            FunctionKind::Branin2 => branin(x),
            FunctionKind::Hartman4 => hartman4(x),
            FunctionKind::Ackley { first4: false, .. } => ackley(x),
            FunctionKind::Ackley { first4: true, .. } => ackley_first4(x),
        }
    }
}

/// A test function with an evaluation counter.
#[derive(Debug)]
pub struct TestFunction {
    kind: FunctionKind,
    evaluations: AtomicU64,
}

impl TestFunction {
    pub fn new(kind: FunctionKind) -> Result<Self> {
        kind.validate()?;
        Ok(Self { kind, evaluations: AtomicU64::new(0) })
    }

    pub fn kind(&self) -> FunctionKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        Ok(self.kind.eval(x))
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum InputDistribution {
    UniformHypercube {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    MultivariateNormal {
        mean: Vec<f64>,
        /// Row-major `d x d` covariance matrix.
        covariance: Vec<f64>,
    },
}

impl InputDistribution {
    pub fn unit_cube(dim: usize) -> Self {
        Self::UniformHypercube { lower: vec![0.0; dim], upper: vec![1.0; dim] }
    }

    /// Normal law with equal variances and equal covariances.
    pub fn exchangeable_normal(mean: f64, variance: f64, covariance: f64, dim: usize) -> Self {
        let cov = (0..dim * dim).map(|i| if i / dim == i % dim { variance } else { covariance }).collect();
        Self::MultivariateNormal { mean: vec![mean; dim], covariance: cov }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::UniformHypercube { lower, .. } => lower.len(),
            Self::MultivariateNormal { mean, .. } => mean.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::UniformHypercube { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return arg_err("uniform bounds must be non-empty and of equal length");
                }
                if lower.iter().zip(upper).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
                    return arg_err("uniform bounds must be finite with lower < upper");
                }
                Ok(())
            }
            Self::MultivariateNormal { .. } => self.cholesky().map(|_| ()),
        }
    }

    /// Lower Cholesky factor of the covariance, row-major.
    fn cholesky(&self) -> Result<Vec<f64>> {
        let Self::MultivariateNormal { mean, covariance } = self else {
            return Ok(Vec::new());
        };
        let d = mean.len();
        if d == 0 || covariance.len() != d * d {
            return arg_err("covariance must be a d x d matrix matching the mean");
        }
        if mean.iter().chain(covariance).any(|v| !v.is_finite()) {
            return arg_err("normal parameters must be finite");
        }
        let m = DMatrix::from_row_slice(d, d, covariance);
        if (0..d).any(|i| (0..i).any(|j| m[(i, j)] != m[(j, i)])) {
            return arg_err("covariance must be symmetric");
        }
        let chol = Cholesky::new(m).ok_or_else(|| Error::Argument("covariance is not positive definite".into()))?;
        let l = chol.l();
        Ok((0..d * d).map(|i| l[(i / d, i % d)]).collect())
    }

    /// Maps points of `(0, 1)^d` through the inverse distribution transform
    /// (componentwise for the uniform law, Gaussian quantiles then the
    /// Cholesky factor for the normal law).
    pub fn from_unit(&self, unit: &Points) -> Result<Points> {
        let d = self.dim();
        if unit.dim() != d {
            return Err(Error::Dimension { expected: d, got: unit.dim() });
        }
        let l = self.cholesky()?;
        let mut out = Vec::with_capacity(unit.len() * d);
        let mut z = vec![0.0; d];
        for u in unit.rows() {
            match self {
                Self::UniformHypercube { lower, upper } => {
                    out.extend((0..d).map(|j| lower[j] + u[j] * (upper[j] - lower[j])));
                }
                Self::MultivariateNormal { mean, .. } => {
                    for j in 0..d {
                        z[j] = norm_quantile(u[j]);
                    }
                    push_affine(&mut out, mean, &l, &z);
                }
            }
        }
        Points::new(d, out)
    }
}

fn push_affine(out: &mut Vec<f64>, mean: &[f64], l: &[f64], z: &[f64]) {
    let d = mean.len();
    for i in 0..d {
        let row = &l[i * d..i * d + i + 1];
        out.push(mean[i] + row.iter().zip(z).map(|(a, b)| a * b).sum::<f64>());
    }
}

/// I.i.d. sample from an input law.
pub fn sample_inputs<R: Rng + ?Sized>(dist: &InputDistribution, n: usize, rng: &mut R) -> Result<Points> {
    dist.validate()?;
    let d = dist.dim();
    let mut out = Vec::with_capacity(n * d);
    match dist {
        InputDistribution::UniformHypercube { lower, upper } => {
            for _ in 0..n {
                for j in 0..d {
                    let u: f64 = rng.random();
                    out.push(lower[j] + u * (upper[j] - lower[j]));
                }
            }
        }
        InputDistribution::MultivariateNormal { mean, .. } => {
            let l = dist.cholesky()?;
            let mut z = vec![0.0; d];
            for _ in 0..n {
                for v in z.iter_mut() {
                    *v = StandardNormal.sample(rng);
                }
                push_affine(&mut out, mean, &l, &z);
            }
        }
    }
    Points::new(d, out)
}

/// Latin hypercube design on `[0, 1]^d`: every coordinate has exactly one
/// point in each of the `n` strata, placed uniformly within it.
pub fn lhs_design<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Points> {
    if n == 0 || d == 0 {
        return arg_err("LHS needs n >= 1 and d >= 1");
    }
    let mut data = vec![0.0; n * d];
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..d {
        perm.shuffle(rng);
        for (i, &p) in perm.iter().enumerate() {
            // open interval keeps Gaussian quantiles finite
            let u: f64 = rng.random::<f64>().max(f64::EPSILON);
            data[i * d + j] = (p as f64 + u) / n as f64;
        }
    }
    Points::new(d, data)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct ExperimentSpec {
    pub function: FunctionKind,
    pub distribution: InputDistribution,
    pub alpha: f64,
    pub oracle_sample_size: usize,
    pub replications: usize,
}

/// Smallest accepted oracle sample.
pub const MIN_ORACLE_SAMPLE: usize = 10_000;

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.function.validate()?;
        self.distribution.validate()?;
        if self.function.dim() != self.distribution.dim() {
            return Err(Error::Dimension { expected: self.function.dim(), got: self.distribution.dim() });
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return arg_err("alpha must lie in (0, 1)");
        }
        if self.oracle_sample_size < MIN_ORACLE_SAMPLE {
            return arg_err(alloc::format!("oracle sample must have at least {MIN_ORACLE_SAMPLE} points"));
        }
        if self.replications == 0 {
            return arg_err("replications must be >= 1");
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.function.dim()
    }
}

/// Ground truth from a large sample of `g(X)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OracleEstimate {
    pub q_true: f64,
    /// Half-width of the order-statistic interval whose ranks lie three
    /// binomial standard deviations either side of the percentile rank.
    pub band: f64,
    /// 0.5% and 99.5% percentiles of `g(X)`.
    pub range_lo: f64,
    pub range_hi: f64,
    pub sample_size: usize,
}

/// Empirical percentile of `g(X)` over `spec.oracle_sample_size` draws,
/// evaluated without touching any evaluation counter.
pub fn oracle_percentile<R: Rng + ?Sized>(spec: &ExperimentSpec, rng: &mut R) -> Result<OracleEstimate> {
    spec.validate()?;
    let x = sample_inputs(&spec.distribution, spec.oracle_sample_size, rng)?;
    let values: Vec<f64> = x.rows().map(|r| spec.function.eval(r)).collect();
    oracle_from_values(&values, spec.alpha)
}

/// [`oracle_percentile`] from precomputed outputs.
pub fn oracle_from_values(values: &[f64], alpha: f64) -> Result<OracleEstimate> {
    let n = values.len();
    let (q_true, _) = empirical_percentile(values, alpha)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = percentile_rank(n, alpha);
    let delta = libm::ceil(3.0 * libm::sqrt(n as f64 * alpha * (1.0 - alpha))) as usize;
    let lo = sorted[k.saturating_sub(1 + delta)];
    let hi = sorted[(k - 1 + delta).min(n - 1)];
    let range_lo = sorted[percentile_rank(n, 0.005) - 1];
    let range_hi = sorted[percentile_rank(n, 0.995) - 1];
    Ok(OracleEstimate { q_true, band: 0.5 * (hi - lo), range_lo, range_hi, sample_size: n })
}

/// `100 |estimate - q_true| / (range_hi - range_lo)`
pub fn error_metric(estimate: f64, q_true: f64, range: (f64, f64)) -> Result<f64> {
    let width = range.1 - range.0;
    if !(width > 0.0 && width.is_finite()) {
        return arg_err("error range must satisfy lower < upper");
    }
    Ok(100.0 * (estimate - q_true).abs() / width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn branin_reference_points() {
        // minimizer (pi, 2.275) of the unscaled function
        let v = branin(&[(PI + 5.0) / 15.0, 2.275 / 15.0]);
        assert!((v - 0.397_887_357_729_738).abs() < 1e-12);
        let corner = branin(&[0.0, 0.0]);
        let x1: f64 = -5.0;
        let t = -5.1 * 25.0 / (4.0 * PI * PI) - 25.0 / PI - 6.0;
        assert_eq!(corner, t * t + (10.0 - 10.0 / (8.0 * PI)) * libm::cos(x1) + 10.0);
        assert!((corner - 308.129).abs() < 1e-3);
    }

    #[test]
    fn hartman_far_away_is_constant() {
        assert!((hartman4(&[1e3; 4]) + 2.58 / 1.94).abs() < 1e-15);
        assert!(hartman4(&[0.2, 0.3, 0.5, 0.6]) < -2.58 / 1.94);
    }

    #[test]
    fn ackley_origin_and_symmetry() {
        assert!(ackley(&[0.0; 6]).abs() < 1e-14);
        let a = ackley(&[0.1, -0.4, 0.7, 0.2, 0.0, 1.3]);
        let b = ackley(&[1.3, 0.0, 0.2, 0.7, -0.4, 0.1]);
        assert!((a - b).abs() < 1e-14);
        assert_eq!(ackley_first4(&[0.3, 0.1, 0.2, 0.4, 9.0, 9.0]), ackley(&[0.3, 0.1, 0.2, 0.4]));
    }

    #[test]
    fn counter_counts_calls() {
        let f = TestFunction::new(FunctionKind::Branin2).unwrap();
        for _ in 0..5 {
            f.evaluate(&[0.2, 0.3]).unwrap();
        }
        assert_eq!(f.evaluations(), 5);
        assert!(f.evaluate(&[0.1]).is_err());
        assert_eq!(f.evaluations(), 5);
    }

    #[test]
    fn lhs_strata_are_filled_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = lhs_design(10, 3, &mut rng).unwrap();
        for j in 0..3 {
            let mut seen = [0; 10];
            for r in p.rows() {
                seen[(r[j] * 10.0) as usize] += 1;
            }
            assert!(seen.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn bad_covariance_rejected() {
        let d = InputDistribution::MultivariateNormal { mean: vec![0.0, 0.0], covariance: vec![1.0, 2.0, 2.0, 1.0] };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_inputs(&d, 5, &mut rng).is_err());
    }

    #[test]
    fn error_metric_cases() {
        assert_eq!(error_metric(3.0, 3.0, (0.0, 10.0)).unwrap(), 0.0);
        assert_eq!(error_metric(13.0, 3.0, (0.0, 10.0)).unwrap(), 100.0);
        assert!(error_metric(1.0, 0.0, (1.0, 1.0)).is_err());
    }

    #[test]
    fn constant_oracle_has_zero_band() {
        let o = oracle_from_values(&vec![4.0; 20_000], 0.3).unwrap();
        assert_eq!((o.q_true, o.band), (4.0, 0.0));
    }
}
