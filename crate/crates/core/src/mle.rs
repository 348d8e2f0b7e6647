//! Maximum-likelihood estimation of kernel hyperparameters.
//!
//! The kernel variance and GLS trend coefficients are profiled out in closed
//! form, leaving a `d`-dimensional search over log-lengthscales. Each start
//! runs a bounded Nelder–Mead simplex search.

use crate::error::{arg_err, Error, Result};
use crate::gp::{fit_posterior, Design, TrendModel, DEFAULT_NUGGET};
use crate::kernel::{KernelFamily, KernelParams};
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MleOptions {
    pub starts: usize,
    /// Lengthscale search box in normalized input units (each dimension is
    /// scaled by the design's range along it).
    pub lower: f64,
    pub upper: f64,
    /// Relative nugget used while fitting.
    pub nugget: f64,
    pub max_evals_per_start: usize,
    pub seed: u64,
    /// Lengthscales tried as an extra start, e.g. the previous optimum.
    pub warm_start: Option<Vec<f64>>,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            starts: 10,
            lower: 1e-2,
            upper: 10.0,
            nugget: DEFAULT_NUGGET,
            max_evals_per_start: 250,
            seed: 0,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub kernel: KernelParams,
    pub log_likelihood: f64,
    /// Log-likelihood at every start point, in evaluation order.
    pub start_log_likelihoods: Vec<f64>,
}

/// Profile log-likelihood at the given lengthscales, with the optimal
/// variance. Returns `(log_likelihood, variance)`.
pub fn profile_log_likelihood(
    design: &Design,
    family: KernelFamily,
    lengthscales: &[f64],
    trend: &TrendModel,
    nugget: f64,
) -> Result<(f64, f64)> {
    let unit = KernelParams::new(family, 1.0, lengthscales.to_vec())?;
    let post = fit_posterior(design.clone(), unit, trend.clone(), nugget)?;
    let n = design.len() as f64;
    let variance = (post.residual_quadratic() / n).max(variance_floor(design.values()));
    let ll = -0.5 * (n * (LN_2PI + libm::log(variance)) + post.log_det() + n);
    Ok((ll, variance))
}

fn variance_floor(values: &[f64]) -> f64 {
    let ms = values.iter().map(|v| v * v).sum::<f64>() / values.len().max(1) as f64;
    if ms > 0.0 {
        1e-10 * ms
    } else {
        1e-10
    }
}

/// Multi-start maximum likelihood over lengthscales.
pub fn fit_hyperparameters(
    design: &Design,
    family: KernelFamily,
    trend: &TrendModel,
    opts: &MleOptions,
) -> Result<MleFit> {
    let d = design.dim();
    if design.len() < d + 2 {
        return arg_err(alloc::format!("need at least {} observations to fit {} lengthscales", d + 2, d));
    }
    if !(opts.lower > 0.0 && opts.upper > opts.lower) {
        return arg_err("lengthscale bounds must satisfy 0 < lower < upper");
    }
    let scale = input_scale(design);
    let lo: Vec<f64> = scale.iter().map(|s| libm::log(opts.lower * s)).collect();
    let hi: Vec<f64> = scale.iter().map(|s| libm::log(opts.upper * s)).collect();

    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(opts.starts + 1);
    if let Some(ws) = &opts.warm_start {
        if ws.len() == d && ws.iter().all(|l| *l > 0.0 && l.is_finite()) {
            starts.push(ws.iter().zip(lo.iter().zip(&hi)).map(|(l, (a, b))| libm::log(*l).clamp(*a, *b)).collect());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.starts.max(1) {
        starts.push(lo.iter().zip(&hi).map(|(a, b)| rng.random_range(*a..*b)).collect());
    }

    let objective = |theta: &[f64]| -> f64 {
        let ls: Vec<f64> = theta.iter().map(|t| libm::exp(*t)).collect();
        match profile_log_likelihood(design, family, &ls, trend, opts.nugget) {
            Ok((ll, _)) if ll.is_finite() => -ll,
            _ => f64::INFINITY,
        }
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut start_lls = Vec::with_capacity(starts.len());
    for s in &starts {
        let f0 = objective(s);
        start_lls.push(-f0);
        if !f0.is_finite() {
            continue;
        }
        let (x, fx) = nelder_mead(&objective, s, f0, &lo, &hi, opts.max_evals_per_start);
        if best.as_ref().is_none_or(|(fb, _)| fx < *fb) {
            best = Some((fx, x));
        }
    }
    let (fbest, theta) = best.ok_or_else(|| Error::Fitting("covariance factorization failed at every start".into()))?;
    let lengthscales: Vec<f64> = theta.iter().map(|t| libm::exp(*t)).collect();
    let (ll, variance) = profile_log_likelihood(design, family, &lengthscales, trend, opts.nugget)?;
    debug_assert!((ll + fbest).abs() <= 1e-9 * (1.0 + ll.abs()));
    Ok(MleFit {
        kernel: KernelParams::new(family, variance, lengthscales)?,
        log_likelihood: ll,
        start_log_likelihoods: start_lls,
    })
}

/// Range of the design along each axis (1 where degenerate).
fn input_scale(design: &Design) -> Vec<f64> {
    let d = design.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for row in design.points().rows() {
        for j in 0..d {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    lo.iter().zip(&hi).map(|(a, b)| if b - a > 0.0 { b - a } else { 1.0 }).collect()
}

/// Box-constrained Nelder–Mead; points are projected onto the box. Never
/// returns a value worse than `f0`.
fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    f0: f64,
    lo: &[f64],
    hi: &[f64],
    max_evals: usize,
) -> (Vec<f64>, f64) {
    let d = x0.len();
    let project = |x: &mut Vec<f64>| {
        for j in 0..d {
            x[j] = x[j].clamp(lo[j], hi[j]);
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    simplex.push((x0.to_vec(), f0));
    let mut evals = 1;
    for j in 0..d {
        let mut x = x0.to_vec();
        let step = 0.25 * (hi[j] - lo[j]);
        x[j] = if x[j] + step <= hi[j] { x[j] + step } else { x[j] - step };
        project(&mut x);
        let fx = f(&x);
        evals += 1;
        simplex.push((x, fx));
    }

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (fb, fw) = (simplex[0].1, simplex[d].1);
        if fw.is_finite() && (fw - fb).abs() <= 1e-9 * (1.0 + fb.abs()) {
            let size = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if size < 1e-6 {
                break;
            }
        }
        let mut centroid = vec![0.0; d];
        for (x, _) in &simplex[..d] {
            for j in 0..d {
                centroid[j] += x[j] / d as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut x: Vec<f64> = (0..d).map(|j| centroid[j] + t * (simplex[d].0[j] - centroid[j])).collect();
            project(&mut x);
            x
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            evals += 1;
            simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[d - 1].1 {
            simplex[d] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[d].1 {
            let x = along(-0.5);
            let fx = f(&x);
            (x, fx)
        } else {
            let x = along(0.5);
            let fx = f(&x);
            (x, fx)
        };
        evals += 1;
        if fc < simplex[d].1.min(fr) {
            simplex[d] = (xc, fc);
            continue;
        }
        // shrink toward the best vertex
        let best = simplex[0].0.clone();
        for (x, fx) in simplex.iter_mut().skip(1) {
            for j in 0..d {
                x[j] = best[j] + 0.5 * (x[j] - best[j]);
            }
            *fx = f(x);
            evals += 1;
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, fx) = simplex.swap_remove(0);
    if fx <= f0 {
        (x, fx)
    } else {
        (x0.to_vec(), f0)
    }
}
