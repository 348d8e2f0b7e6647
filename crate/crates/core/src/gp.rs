//! Universal kriging: conditional mean and covariance of a Gaussian process
//! given noiseless observations, with a generalized-least-squares trend.
//!
//! Posterior quantities are computed through the Cholesky factor `L` of
//! `K = C_n + nugget * variance * I`. For a point `x` with prior covariance
//! vector `c = c_n(x)` and trend features `f(x)` we form
//!
//! ```text
//! v = L^-1 c,   u = f(x) - (L^-1 F)^T v,   w = G^-1/2 u
//! k_n(x, y) = c(x, y) - v_x . v_y + w_x . w_y
//! ```
//!
//! where `G = F^T K^-1 F`. The `w` term is the trend-estimation correction;
//! it is absent when the trend coefficients are fixed.

use crate::error::{arg_err, Error, Result};
use crate::kernel::KernelParams;
use crate::points::Points;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Default diagonal regularization, as a fraction of the kernel variance.
pub const DEFAULT_NUGGET: f64 = 1e-8;

/// Relative tolerance below which the predictive variance at a new point is
/// treated as zero.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

const DUPLICATE_TOL: f64 = 1e-12;
const BATCH_CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TrendBasis {
    Constant,
    /// `1, x_1, ..., x_d`
    Linear,
}

impl TrendBasis {
    pub fn size(self, dim: usize) -> usize {
        match self {
            TrendBasis::Constant => 1,
            TrendBasis::Linear => dim + 1,
        }
    }

    #[inline]
    fn fill(self, x: &[f64], out: &mut [f64]) {
        out[0] = 1.0;
        if let TrendBasis::Linear = self {
            out[1..].copy_from_slice(x);
        }
    }
}

/// Prior mean `mu(x) = f(x)^T beta`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrendModel {
    pub basis: TrendBasis,
    /// Known coefficients, or the GLS estimate once a posterior is fitted.
    pub coefficients: Vec<f64>,
    /// When false, coefficients are re-estimated by GLS on every fit.
    pub fixed: bool,
}

impl TrendModel {
    /// Trend estimated jointly with the posterior.
    pub fn universal(basis: TrendBasis) -> Self {
        Self { basis, coefficients: Vec::new(), fixed: false }
    }

    pub fn known(basis: TrendBasis, coefficients: Vec<f64>) -> Self {
        Self { basis, coefficients, fixed: true }
    }

    /// Simple kriging around a zero mean.
    pub fn zero() -> Self {
        Self::known(TrendBasis::Constant, vec![0.0])
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut f = vec![0.0; self.basis.size(x.len())];
        self.basis.fill(x, &mut f);
        f.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }
}

/// Observed sample: design points and their responses.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Design {
    points: Points,
    values: Vec<f64>,
}

impl Design {
    pub fn new(points: Points, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return arg_err("design has different numbers of points and values");
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return arg_err(alloc::format!("non-finite value at design row {i}"));
        }
        if points.as_slice().iter().any(|v| !v.is_finite()) {
            return arg_err("non-finite design coordinate");
        }
        for i in 1..points.len() {
            if (0..i).any(|j| same_point(points.row(i), points.row(j))) {
                return Err(Error::DuplicatePoint { row: i });
            }
        }
        Ok(Self { points, values })
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    /// Row of an existing design point equal to `x` within the duplicate
    /// tolerance.
    pub fn find_duplicate(&self, x: &[f64]) -> Option<usize> {
        self.points.rows().position(|p| same_point(p, x))
    }

    pub fn with_observation(&self, x: &[f64], g: f64) -> Result<Self> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        if !g.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return arg_err("new observation must be finite");
        }
        if self.find_duplicate(x).is_some() {
            return Err(Error::DuplicatePoint { row: self.len() });
        }
        let mut points = self.points.clone();
        points.push(x)?;
        let mut values = self.values.clone();
        values.push(g);
        Ok(Self { points, values })
    }
}

fn same_point(a: &[f64], b: &[f64]) -> bool {
    let mut scale: f64 = 1.0;
    let mut diff: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        scale = scale.max(x.abs()).max(y.abs());
        diff = diff.max((x - y).abs());
    }
    diff <= DUPLICATE_TOL * scale
}

/// Per-point quantities reused for covariance evaluation.
#[derive(Debug, Clone)]
pub(crate) struct Features {
    pub mean: f64,
    pub var: f64,
    pub v: DVector<f64>,
    pub w: DVector<f64>,
}

/// A batch of points with posterior means, variances and the factors needed
/// to evaluate cross-covariances with any further point in O(n) each.
#[derive(Debug, Clone)]
pub struct PreparedPoints {
    pub(crate) points: Points,
    pub(crate) means: Vec<f64>,
    pub(crate) vars: Vec<f64>,
    v: DMatrix<f64>,
    w: DMatrix<f64>,
}

impl PreparedPoints {
    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn variances(&self) -> &[f64] {
        &self.vars
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }
}

/// Conditional GP given a design. Immutable; updates return new values.
#[derive(Debug, Clone)]
pub struct GpPosterior {
    design: Design,
    kernel: KernelParams,
    trend: TrendModel,
    nugget: f64,
    chol: Cholesky<f64, Dyn>,
    /// `K^-1 (y - F beta)`
    alpha: DVector<f64>,
    /// `L^-1 F`, empty when the trend is fixed
    ft: DMatrix<f64>,
    gram: Option<Cholesky<f64, Dyn>>,
}

/// Conditions the GP on `design`. `nugget` is relative to the kernel variance.
pub fn fit_posterior(design: Design, kernel: KernelParams, trend: TrendModel, nugget: f64) -> Result<GpPosterior> {
    kernel.validate()?;
    if kernel.dim() != design.dim() {
        return Err(Error::Dimension { expected: kernel.dim(), got: design.dim() });
    }
    if !(nugget >= 0.0 && nugget.is_finite()) {
        return arg_err("nugget must be finite and non-negative");
    }
    let p = trend.basis.size(design.dim());
    if trend.fixed && trend.coefficients.len() != p {
        return Err(Error::Dimension { expected: p, got: trend.coefficients.len() });
    }
    let n = design.len();
    if n == 0 {
        return arg_err("cannot condition on an empty design");
    }
    if !trend.fixed && n < p {
        return arg_err(alloc::format!("{n} observations cannot identify {p} trend coefficients"));
    }
    let pts = design.points();
    let diag = kernel.variance * (1.0 + nugget);
    let k = DMatrix::from_fn(n, n, |i, j| if i == j { diag } else { kernel.cov(pts.row(i), pts.row(j)) });
    let chol = Cholesky::new(k).ok_or(Error::Factorization { suggested_nugget: suggest_nugget(nugget) })?;
    GpPosterior::from_factor(design, kernel, trend, nugget, chol)
}

fn suggest_nugget(nugget: f64) -> f64 {
    (nugget * 100.0).max(1e-10)
}

impl GpPosterior {
    fn from_factor(
        design: Design,
        kernel: KernelParams,
        mut trend: TrendModel,
        nugget: f64,
        chol: Cholesky<f64, Dyn>,
    ) -> Result<Self> {
        let n = design.len();
        let dim = design.dim();
        let p = trend.basis.size(dim);
        if (0..n).any(|i| !(chol.l_dirty()[(i, i)] > 0.0)) {
            return Err(Error::Factorization { suggested_nugget: suggest_nugget(nugget) });
        }
        let y = DVector::from_column_slice(design.values());
        let mut f = DMatrix::zeros(n, p);
        let mut row = vec![0.0; p];
        for i in 0..n {
            trend.basis.fill(design.points().row(i), &mut row);
            for (j, v) in row.iter().enumerate() {
                f[(i, j)] = *v;
            }
        }

        let (ft, gram) = if trend.fixed {
            (DMatrix::zeros(n, 0), None)
        } else {
            let l = chol.l_dirty();
            let ft = l
                .solve_lower_triangular(&f)
                .ok_or(Error::Factorization { suggested_nugget: suggest_nugget(nugget) })?;
            let yt = l
                .solve_lower_triangular(&y)
                .ok_or(Error::Factorization { suggested_nugget: suggest_nugget(nugget) })?;
            let gram = Cholesky::new(ft.tr_mul(&ft))
                .ok_or_else(|| Error::Argument("trend basis is not identifiable from the design".into()))?;
            let beta = gram.solve(&ft.tr_mul(&yt));
            trend.coefficients = beta.iter().copied().collect();
            (ft, Some(gram))
        };
        let beta = DVector::from_column_slice(&trend.coefficients);
        let resid = &y - &f * &beta;
        let alpha = chol.solve(&resid);
        if alpha.iter().any(|v| !v.is_finite()) {
            return Err(Error::Factorization { suggested_nugget: suggest_nugget(nugget) });
        }
        Ok(Self { design, kernel, trend, nugget, chol, alpha, ft, gram })
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn kernel(&self) -> &KernelParams {
        &self.kernel
    }

    /// Trend with resolved (fixed or GLS-estimated) coefficients.
    pub fn trend(&self) -> &TrendModel {
        &self.trend
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn dim(&self) -> usize {
        self.design.dim()
    }

    pub fn prior_variance(&self) -> f64 {
        self.kernel.variance
    }

    /// Diagonal regularization added to the covariance matrix, in output units.
    pub fn noise_variance(&self) -> f64 {
        self.nugget * self.kernel.variance
    }

    /// Lower Cholesky factor of the regularized covariance matrix.
    pub fn cholesky_factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// `log det K` of the regularized covariance matrix.
    pub(crate) fn log_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        (0..self.design.len()).map(|i| 2.0 * libm::log(l[(i, i)])).sum()
    }

    /// `(y - F beta)^T K^-1 (y - F beta)`
    pub(crate) fn residual_quadratic(&self) -> f64 {
        let beta = &self.trend.coefficients;
        let pts = self.design.points();
        let mut acc = 0.0;
        for i in 0..self.design.len() {
            let r = self.design.values()[i] - trend_dot(self.trend.basis, pts.row(i), beta);
            acc += r * self.alpha[i];
        }
        acc
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return arg_err("prediction point must be finite");
        }
        Ok(())
    }

    pub(crate) fn features(&self, x: &[f64]) -> Features {
        let n = self.design.len();
        let pts = self.design.points();
        let mut c = DVector::zeros(n);
        for i in 0..n {
            c[i] = self.kernel.cov(pts.row(i), x);
        }
        let mean = trend_dot(self.trend.basis, x, &self.trend.coefficients) + c.dot(&self.alpha);
        self.chol.l_dirty().solve_lower_triangular_mut(&mut c);
        let v = c;
        let w = match &self.gram {
            Some(gram) => {
                let p = self.ft.ncols();
                let mut u = DVector::zeros(p);
                let mut row = vec![0.0; p];
                self.trend.basis.fill(x, &mut row);
                for j in 0..p {
                    u[j] = row[j] - self.ft.column(j).dot(&v);
                }
                gram.l_dirty().solve_lower_triangular_mut(&mut u);
                u
            }
            None => DVector::zeros(0),
        };
        let var = self.clamp_var(self.kernel.variance - v.norm_squared() + w.norm_squared());
        Features { mean, var, v, w }
    }

    /// Rounding can push tiny variances below zero. There is no upper clamp:
    /// trend uncertainty may lift the variance above the kernel's.
    #[inline]
    fn clamp_var(&self, v: f64) -> f64 {
        v.max(0.0)
    }

    /// Posterior mean and variance `(m_n(x), s_n^2(x))`.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check_dim(x)?;
        let f = self.features(x);
        Ok((f.mean, f.var))
    }

    /// Posterior covariance `k_n(x, y)`.
    pub fn predict_cov(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        let fx = self.features(x);
        let fy = self.features(y);
        Ok(self.cov_from(&fx, &fy, self.kernel.cov(x, y)))
    }

    #[inline]
    fn cov_from(&self, fx: &Features, fy: &Features, prior: f64) -> f64 {
        prior - fx.v.dot(&fy.v) + fx.w.dot(&fy.w)
    }

    /// Means and variances over a batch, computed with blocked triangular solves.
    pub fn predict_batch(&self, points: &Points) -> Result<Vec<(f64, f64)>> {
        let prepared = self.prepare_impl(points, false)?;
        Ok(prepared.means.into_iter().zip(prepared.vars).collect())
    }

    /// Precomputes the factors of `points` for repeated cross-covariance
    /// evaluations against new candidates.
    pub fn prepare(&self, points: &Points) -> Result<PreparedPoints> {
        self.prepare_impl(points, true)
    }

    fn prepare_impl(&self, points: &Points, keep: bool) -> Result<PreparedPoints> {
        if points.dim() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: points.dim() });
        }
        if points.as_slice().iter().any(|v| !v.is_finite()) {
            return arg_err("prediction points must be finite");
        }
        let n = self.design.len();
        let p = self.ft.ncols();
        let m = points.len();
        let pts = self.design.points();
        let mut means = Vec::with_capacity(m);
        let mut vars = Vec::with_capacity(m);
        let (mut v_all, mut w_all) = if keep {
            (DMatrix::zeros(n, m), DMatrix::zeros(p, m))
        } else {
            (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0))
        };
        let mut frow = vec![0.0; self.trend.basis.size(self.dim())];
        let mut start = 0;
        while start < m {
            let width = BATCH_CHUNK.min(m - start);
            let mut c = DMatrix::from_fn(n, width, |i, j| self.kernel.cov(pts.row(i), points.row(start + j)));
            for j in 0..width {
                let x = points.row(start + j);
                means.push(trend_dot(self.trend.basis, x, &self.trend.coefficients) + c.column(j).dot(&self.alpha));
            }
            self.chol.l_dirty().solve_lower_triangular_mut(&mut c);
            let mut u = DMatrix::zeros(p, width);
            if let Some(gram) = &self.gram {
                for j in 0..width {
                    self.trend.basis.fill(points.row(start + j), &mut frow);
                    for r in 0..p {
                        u[(r, j)] = frow[r] - self.ft.column(r).dot(&c.column(j));
                    }
                }
                gram.l_dirty().solve_lower_triangular_mut(&mut u);
            }
            for j in 0..width {
                let var = self.kernel.variance - c.column(j).norm_squared() + u.column(j).norm_squared();
                vars.push(self.clamp_var(var));
            }
            if keep {
                v_all.columns_mut(start, width).copy_from(&c);
                w_all.columns_mut(start, width).copy_from(&u);
            }
            start += width;
        }
        Ok(PreparedPoints { points: points.clone(), means, vars, v: v_all, w: w_all })
    }

    /// `k_n(x_i, x)` for every prepared point `x_i`, plus the features of `x`.
    pub(crate) fn cross_cov(&self, prepared: &PreparedPoints, x: &[f64]) -> (Features, Vec<f64>) {
        let fx = self.features(x);
        let vt = prepared.v.tr_mul(&fx.v);
        let wt = if fx.w.is_empty() { None } else { Some(prepared.w.tr_mul(&fx.w)) };
        let out = (0..prepared.len())
            .map(|i| {
                let prior = self.kernel.cov(prepared.points.row(i), x);
                prior - vt[i] + wt.as_ref().map_or(0.0, |w| w[i])
            })
            .collect();
        (fx, out)
    }

    /// Conditions on one more observation. Equivalent to refitting on the
    /// extended design with the same hyperparameters; costs O(n^2).
    pub fn update_posterior(&self, x_new: &[f64], g_new: f64) -> Result<GpPosterior> {
        self.check_dim(x_new)?;
        let (_, var) = self.predict(x_new)?;
        if var <= DEGENERATE_VARIANCE * self.kernel.variance {
            return Err(Error::DegenerateUpdate { variance: var });
        }
        let design = self.design.with_observation(x_new, g_new)?;
        let n = self.design.len();
        let pts = self.design.points();
        let mut col = DVector::zeros(n + 1);
        for i in 0..n {
            col[i] = self.kernel.cov(pts.row(i), x_new);
        }
        col[n] = self.kernel.variance * (1.0 + self.nugget);
        let chol = self.chol.insert_column(n, col);
        let trend = if self.trend.fixed { self.trend.clone() } else { TrendModel::universal(self.trend.basis) };
        GpPosterior::from_factor(design, self.kernel.clone(), trend, self.nugget, chol)
    }

    /// Variance of the observation at `x` given the current data:
    /// `s_n^2(x)` plus the diagonal regularization. This is the denominator
    /// of the one-step update.
    pub fn innovation_variance(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict(x)?.1 + self.noise_variance())
    }
}

#[inline]
fn trend_dot(basis: TrendBasis, x: &[f64], beta: &[f64]) -> f64 {
    match basis {
        TrendBasis::Constant => beta[0],
        TrendBasis::Linear => beta[0] + x.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>(),
    }
}

/// One-step update of the mean at a point, given step-n quantities:
/// `m_n(x) + k_n(x, x_new) (g_new - m_n(x_new)) / S` with `S` the
/// innovation variance at `x_new`.
#[inline]
pub fn updated_mean(mean_x: f64, cov_x_new: f64, mean_new: f64, innovation_var: f64, g_new: f64) -> f64 {
    mean_x + cov_x_new * standardized_innovation(g_new, mean_new, innovation_var)
}

/// `(g_new - m_n(x_new)) / S`: the common factor of every updated mean.
#[inline]
pub fn standardized_innovation(g_new: f64, mean_new: f64, innovation_var: f64) -> f64 {
    (g_new - mean_new) / innovation_var
}

/// One-step update of a covariance: `k_n(x, y) - k_n(x, x_new) k_n(y, x_new) / S`.
#[inline]
pub fn updated_cov(cov_xy: f64, cov_x_new: f64, cov_y_new: f64, innovation_var: f64) -> f64 {
    cov_xy - cov_x_new * cov_y_new / innovation_var
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelFamily;
    use approx::assert_abs_diff_eq;

    fn design_1d(xs: &[f64], ys: &[f64]) -> Design {
        Design::new(Points::new(1, xs.to_vec()).unwrap(), ys.to_vec()).unwrap()
    }

    #[test]
    fn single_point_known_trend() {
        let k = KernelParams::isotropic(KernelFamily::Matern32, 2.0, 0.7, 1).unwrap();
        let beta = 1.5;
        let (x1, g1) = (0.2, 3.0);
        let post =
            fit_posterior(design_1d(&[x1], &[g1]), k.clone(), TrendModel::known(TrendBasis::Constant, vec![beta]), 0.0)
                .unwrap();
        for &x in &[-1.0, 0.0, 0.2, 0.5, 3.0] {
            let expected = beta + k.cov(&[x], &[x1]) / k.cov(&[x1], &[x1]) * (g1 - beta);
            assert_abs_diff_eq!(post.predict(&[x]).unwrap().0, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn interpolates_without_nugget() {
        let xs = [0.0, 0.15, 0.4, 0.55, 0.9];
        let ys = [1.0, -0.3, 0.8, 2.0, 0.1];
        let k = KernelParams::isotropic(KernelFamily::Matern32, 1.3, 0.3, 1).unwrap();
        let post = fit_posterior(design_1d(&xs, &ys), k, TrendModel::universal(TrendBasis::Linear), 0.0).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            let (m, v) = post.predict(&[*x]).unwrap();
            assert_abs_diff_eq!(m, *y, epsilon = 1e-6);
            assert!(v < 1e-6);
            assert_abs_diff_eq!(post.predict_cov(&[*x], &[0.33]).unwrap(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn reverts_to_prior_far_away() {
        let k = KernelParams::isotropic(KernelFamily::Matern32, 1.0, 0.2, 1).unwrap();
        let beta = vec![0.5];
        let post =
            fit_posterior(design_1d(&[0.0, 0.3], &[1.0, 2.0]), k, TrendModel::known(TrendBasis::Constant, beta), 0.0)
                .unwrap();
        let (m, v) = post.predict(&[1e3]).unwrap();
        assert_abs_diff_eq!(m, 0.5, epsilon = 1e-6 * 0.5);
        assert_abs_diff_eq!(v, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn symmetric_design_gives_even_mean() {
        let xs = [-0.8, -0.3, 0.3, 0.8];
        let ys = [1.0, -2.0, -2.0, 1.0];
        let k = KernelParams::isotropic(KernelFamily::SquaredExponential, 1.0, 0.4, 1).unwrap();
        let post = fit_posterior(design_1d(&xs, &ys), k, TrendModel::universal(TrendBasis::Constant), 0.0).unwrap();
        for &x in &[0.1, 0.45, 1.7] {
            assert_abs_diff_eq!(post.predict(&[x]).unwrap().0, post.predict(&[-x]).unwrap().0, epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_duplicates_and_bad_shapes() {
        let pts = Points::new(1, vec![0.1, 0.1]).unwrap();
        assert_eq!(Design::new(pts, vec![1.0, 1.0]), Err(Error::DuplicatePoint { row: 1 }));
        let k = KernelParams::isotropic(KernelFamily::Matern32, 1.0, 0.3, 2).unwrap();
        let err = fit_posterior(design_1d(&[0.0], &[1.0]), k, TrendModel::zero(), 0.0).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn update_at_known_point_is_degenerate() {
        let k = KernelParams::isotropic(KernelFamily::Matern32, 1.0, 0.3, 1).unwrap();
        let post = fit_posterior(design_1d(&[0.0, 0.5], &[1.0, 2.0]), k, TrendModel::zero(), 0.0).unwrap();
        assert!(matches!(post.update_posterior(&[0.5], 2.0), Err(Error::DegenerateUpdate { .. })));
    }

    #[test]
    fn nearly_singular_matrix_suggests_nugget() {
        let k = KernelParams::isotropic(KernelFamily::SquaredExponential, 1.0, 50.0, 1).unwrap();
        let xs: Vec<f64> = (0..30).map(|i| i as f64 * 1e-3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        match fit_posterior(design_1d(&xs, &ys), k, TrendModel::zero(), 0.0) {
            Err(Error::Factorization { suggested_nugget }) => assert!(suggested_nugget > 0.0),
            Ok(_) => panic!("expected factorization failure"),
            Err(e) => panic!("unexpected error {e}"),
        }
    }
}
