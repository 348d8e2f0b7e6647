//! Candidate generation and refinement for criterion optimization.

use crate::error::{arg_err, Result};
use crate::gp::{GpPosterior, DEGENERATE_VARIANCE};
use crate::points::Points;
use crate::special::norm_pdf;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

/// Subset of a candidate pool.
#[derive(Debug, Clone, PartialEq)]
pub struct Shortlist {
    pub points: Points,
    /// Pool rows of the selected points.
    pub indices: Vec<usize>,
    /// Number of points drawn uniformly because too few had positive weight.
    pub uniform_draws: usize,
}

/// Draws `size` pool points without replacement, with probability
/// proportional to `phi((q - m_n(x)) / s_n(x))`. Points with no predictive
/// variance get weight zero; if fewer than `size` points carry weight the
/// remainder is drawn uniformly.
pub fn select_candidates<R: Rng + ?Sized>(
    posterior: &GpPosterior,
    q: f64,
    pool: &Points,
    size: usize,
    rng: &mut R,
) -> Result<Shortlist> {
    if size > pool.len() {
        return arg_err(alloc::format!("shortlist of {size} from a pool of {}", pool.len()));
    }
    let floor = DEGENERATE_VARIANCE * posterior.prior_variance();
    let predictions = posterior.predict_batch(pool)?;
    let weights: Vec<f64> =
        predictions.iter().map(|&(m, v)| if v > floor { norm_pdf((q - m) / libm::sqrt(v)) } else { 0.0 }).collect();
    Ok(weighted_sample(pool, &weights, size, rng))
}

/// Weighted sampling without replacement with exponential keys: each item
/// gets `ln(u) / w` and the largest keys win.
pub(crate) fn weighted_sample<R: Rng + ?Sized>(pool: &Points, weights: &[f64], size: usize, rng: &mut R) -> Shortlist {
    let mut keyed: Vec<(f64, usize)> = Vec::with_capacity(weights.len());
    let mut zero: Vec<usize> = Vec::new();
    for (i, &w) in weights.iter().enumerate() {
        let u: f64 = rng.random();
        if w > 0.0 && w.is_finite() {
            keyed.push((libm::log(u.max(f64::MIN_POSITIVE)) / w, i));
        } else {
            zero.push(i);
        }
    }
    let take = size.min(keyed.len());
    if take > 0 && take < keyed.len() {
        keyed.select_nth_unstable_by(take - 1, |a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    }
    keyed.truncate(take);
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut indices: Vec<usize> = keyed.into_iter().map(|(_, i)| i).collect();
    let uniform_draws = size - indices.len();
    // partial Fisher-Yates over the zero-weight items
    for t in 0..uniform_draws {
        let j = rng.random_range(t..zero.len());
        zero.swap(t, j);
        indices.push(zero[t]);
    }
    Shortlist { points: pool.select(&indices), indices, uniform_draws }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOptions {
    pub max_iterations: usize,
    /// Finite-difference step, per dimension.
    pub fd_step: Vec<f64>,
    /// Largest move per line search, per dimension.
    pub max_step: Vec<f64>,
    /// Optional box the search stays in.
    pub bounds: Option<(Vec<f64>, Vec<f64>)>,
}

impl RefineOptions {
    /// Steps proportional to a characteristic input scale per dimension.
    pub fn with_scale(scale: &[f64]) -> Self {
        Self {
            max_iterations: 50,
            fd_step: scale.iter().map(|s| 1e-4 * s).collect(),
            max_step: scale.iter().map(|s| 0.1 * s).collect(),
            bounds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refined {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Quasi-Newton (BFGS) local search from `start` with forward-difference
/// gradients and backtracking. `criterion` returns `None` where it cannot be
/// evaluated; such probes are treated as failures of that step. Never
/// returns a point worse than `start`.
pub fn local_refine<F>(mut criterion: F, start: &[f64], maximize: bool, opts: &RefineOptions) -> Result<Refined>
where
    F: FnMut(&[f64]) -> Option<f64>,
{
    let d = start.len();
    if opts.fd_step.len() != d || opts.max_step.len() != d {
        return arg_err("refinement step sizes do not match the dimension");
    }
    let sign = if maximize { 1.0 } else { -1.0 };
    let project = |x: &mut [f64]| {
        if let Some((lo, hi)) = &opts.bounds {
            for j in 0..d {
                x[j] = x[j].clamp(lo[j], hi[j]);
            }
        }
    };
    let mut evaluations = 0;
    let mut eval = |x: &[f64], evaluations: &mut usize| -> Option<f64> {
        *evaluations += 1;
        criterion(x).filter(|v| v.is_finite()).map(|v| sign * v)
    };

    let mut x = start.to_vec();
    project(&mut x);
    let mut fx = match eval(&x, &mut evaluations) {
        Some(v) => v,
        None => return arg_err("criterion cannot be evaluated at the start point"),
    };
    let start_value = fx;
    let start_point = x.clone();

    let gradient = |x: &[f64], fx: f64, eval: &mut dyn FnMut(&[f64]) -> Option<f64>| -> Option<Vec<f64>> {
        let mut g = vec![0.0; d];
        let mut probe = x.to_vec();
        for j in 0..d {
            let mut h = opts.fd_step[j];
            if let Some((_, hi)) = &opts.bounds {
                if x[j] + h > hi[j] {
                    h = -h;
                }
            }
            probe[j] = x[j] + h;
            g[j] = (eval(&probe)? - fx) / h;
            probe[j] = x[j];
        }
        Some(g)
    };

    // inverse Hessian of -f, started as a scaled identity
    let mut hinv: Vec<f64> = vec![0.0; d * d];
    let mut g = match gradient(&x, fx, &mut |p| eval(p, &mut evaluations)) {
        Some(g) => g,
        None => return Ok(Refined { point: x, value: sign * fx, evaluations }),
    };
    let reset = |hinv: &mut Vec<f64>| {
        hinv.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..d {
            hinv[j * d + j] = 1.0;
        }
    };
    reset(&mut hinv);

    for _ in 0..opts.max_iterations {
        if g.iter().all(|v| *v == 0.0) {
            break;
        }
        // ascent direction p = H g
        let mut p: Vec<f64> = (0..d).map(|i| (0..d).map(|j| hinv[i * d + j] * g[j]).sum()).collect();
        let slope: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope > 0.0) {
            reset(&mut hinv);
            p.clone_from(&g);
        }
        let ratio = p.iter().zip(&opts.max_step).map(|(pi, m)| pi.abs() / m).fold(0.0, f64::max);
        if ratio > 1.0 {
            p.iter_mut().for_each(|v| *v /= ratio);
        }
        let slope: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..20 {
            let mut xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + t * b).collect();
            project(&mut xn);
            if let Some(fnew) = eval(&xn, &mut evaluations) {
                if fnew > fx + 1e-4 * t * slope {
                    accepted = Some((xn, fnew));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fnew)) = accepted else { break };
        let Some(gn) = gradient(&xn, fnew, &mut |p| eval(p, &mut evaluations)) else {
            x = xn;
            fx = fnew;
            break;
        };
        // BFGS update for minimizing -f: s = step, y = -(gn - g)
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g.iter().zip(&gn).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 * libm::sqrt(s.iter().map(|v| v * v).sum::<f64>() * y.iter().map(|v| v * v).sum::<f64>()) {
            let hy: Vec<f64> = (0..d).map(|i| (0..d).map(|j| hinv[i * d + j] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            let rho = 1.0 / sy;
            for i in 0..d {
                for j in 0..d {
                    hinv[i * d + j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
        }
        let gain = fnew - fx;
        x = xn;
        fx = fnew;
        g = gn;
        if gain <= 1e-12 * fx.abs().max(1e-300) {
            break;
        }
    }
    if fx >= start_value {
        Ok(Refined { point: x, value: sign * fx, evaluations })
    } else {
        Ok(Refined { point: start_point, value: sign * start_value, evaluations })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn refine_climbs_a_concave_bump() {
        let f = |x: &[f64]| Some(-(x[0] - 0.3).powi(2) - 4.0 * (x[1] + 0.2).powi(2));
        let opts = RefineOptions::with_scale(&[1.0, 1.0]);
        let r = local_refine(f, &[1.0, 1.0], true, &opts).unwrap();
        assert!((r.point[0] - 0.3).abs() < 1e-3 && (r.point[1] + 0.2).abs() < 1e-3, "{:?}", r.point);
        let r = local_refine(|x: &[f64]| f(x).map(|v| -v), &[1.0, 1.0], false, &opts).unwrap();
        assert!((r.point[0] - 0.3).abs() < 1e-3);
    }

    #[test]
    fn refine_flat_criterion_stays() {
        let opts = RefineOptions::with_scale(&[1.0]);
        let r = local_refine(|_: &[f64]| Some(2.0), &[0.4], true, &opts).unwrap();
        assert_eq!(r.point, vec![0.4]);
        assert_eq!(r.value, 2.0);
    }

    #[test]
    fn refine_respects_bounds() {
        let mut opts = RefineOptions::with_scale(&[1.0]);
        opts.bounds = Some((vec![0.0], vec![1.0]));
        let r = local_refine(|x: &[f64]| Some(x[0]), &[0.5], true, &opts).unwrap();
        assert!(r.point[0] <= 1.0 && r.point[0] > 0.9);
    }

    #[test]
    fn weighted_sample_prefers_heavy_items() {
        let pool = Points::new(1, (0..10).map(|i| i as f64).collect()).unwrap();
        let mut w = vec![1e-6; 10];
        w[7] = 1e6;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = weighted_sample(&pool, &w, 3, &mut rng);
        assert_eq!(s.indices[0], 7);
        assert_eq!(s.uniform_draws, 0);
        let mut uniq = s.indices.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 3);
    }

    #[test]
    fn zero_weights_fall_back_to_uniform() {
        let pool = Points::new(1, (0..10).map(|i| i as f64).collect()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = weighted_sample(&pool, &[0.0; 10], 4, &mut rng);
        assert_eq!(s.uniform_draws, 4);
        assert_eq!(s.points.len(), 4);
    }
}
