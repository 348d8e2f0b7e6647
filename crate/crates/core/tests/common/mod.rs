#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surq_core::{
    build_cloud, fit_posterior, Design, GpPosterior, KernelFamily, KernelParams, McCloud, Points, TrendBasis,
    TrendModel,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_points(rng: &mut impl Rng, n: usize, d: usize) -> Points {
    Points::new(d, (0..n * d).map(|_| rng.random::<f64>()).collect()).unwrap()
}

/// A smooth random response surface.
pub fn wavy(x: &[f64], phase: &[f64]) -> f64 {
    x.iter().zip(phase).map(|(v, p)| (4.0 * v + p).sin() + 0.5 * v * v).sum()
}

/// Random posterior on `[0, 1]^d` with `n` observations.
pub fn random_posterior(rng: &mut impl Rng, d: usize, n: usize, nugget: f64) -> GpPosterior {
    let family = if rng.random::<bool>() { KernelFamily::Matern32 } else { KernelFamily::SquaredExponential };
    random_posterior_with(rng, family, d, n, nugget)
}

pub fn random_posterior_with(rng: &mut impl Rng, family: KernelFamily, d: usize, n: usize, nugget: f64) -> GpPosterior {
    let ls: Vec<f64> = (0..d).map(|_| rng.random_range(0.15..0.8)).collect();
    let kernel = KernelParams::new(family, rng.random_range(0.3..3.0), ls).unwrap();
    let phase: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..6.0)).collect();
    let pts = uniform_points(rng, n, d);
    let ys = pts.rows().map(|r| wavy(r, &phase)).collect();
    let basis = if rng.random::<bool>() { TrendBasis::Linear } else { TrendBasis::Constant };
    fit_posterior(Design::new(pts, ys).unwrap(), kernel, TrendModel::universal(basis), nugget).unwrap()
}

/// Posterior, cloud and candidate for criterion checks.
pub struct Case {
    pub posterior: GpPosterior,
    pub cloud: McCloud,
    pub x_new: Vec<f64>,
}

pub fn random_case(seed: u64, cloud_size: usize) -> Case {
    let mut r = rng(seed);
    let n = r.random_range(4..12);
    let posterior = random_posterior(&mut r, 2, n, 1e-8);
    let alpha = r.random_range(0.05..0.95);
    let cloud = build_cloud(&posterior, &uniform_points(&mut r, cloud_size, 2), alpha).unwrap();
    let x_new = vec![r.random::<f64>(), r.random::<f64>()];
    Case { posterior, cloud, x_new }
}

/// `(value, smallest index)` of the `rank`-th smallest entry, by full sort.
pub fn order_statistic(values: &[f64], rank: usize) -> (f64, usize) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let v = values[idx[rank - 1]];
    let first = idx.iter().copied().filter(|&i| values[i] == v).min().unwrap();
    (v, first)
}

/// Evaluation grid spanning `breakpoints`: half uniform over their range
/// (padded), half at midpoints of consecutive breakpoints so that every
/// region with dense crossings is probed.
pub fn klevel_grid(breakpoints: &[f64], size: usize) -> Vec<f64> {
    let mut grid = Vec::with_capacity(size);
    let (lo, hi) = match (breakpoints.first(), breakpoints.last()) {
        (Some(&a), Some(&b)) => {
            let pad = 0.05 * (b - a) + 1.0;
            (a - pad, b + pad)
        }
        _ => (-1.0, 1.0),
    };
    let uniform = if breakpoints.len() < 2 { size } else { size / 2 };
    for i in 0..uniform {
        grid.push(lo + (hi - lo) * (i as f64 + 0.5) / uniform as f64);
    }
    let gaps = breakpoints.len().saturating_sub(1);
    let rest = size - uniform;
    for t in 0..rest.min(gaps) {
        let i = if gaps <= rest { t } else { t * gaps / rest };
        grid.push(0.5 * (breakpoints[i] + breakpoints[i + 1]));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Compares the k-level profiles for every `k` against a full sort of the
/// line values at each grid point. Lines with identical coefficients resolve
/// to their smallest index. Where two lines cross within `1e-9` relative of a
/// grid point, identities are not compared (float rounding decides the sort
/// there) but the level values must still agree.
///
/// Returns `(grid points, mismatches)`.
pub fn klevel_mismatches(slopes: &[f64], intercepts: &[f64], grid_size: usize) -> (usize, usize) {
    use surq_core::{compute_klevel, LineFamily};
    let l = slopes.len();
    let profiles: Vec<_> =
        (1..=l).map(|k| compute_klevel(&LineFamily::new(slopes.to_vec(), intercepts.to_vec(), k).unwrap())).collect();
    let rep: Vec<usize> =
        (0..l).map(|i| (0..l).find(|&j| slopes[j] == slopes[i] && intercepts[j] == intercepts[i]).unwrap()).collect();
    let mut bps: Vec<f64> = profiles.iter().flat_map(|p| p.breakpoints().iter().copied()).collect();
    bps.sort_by(f64::total_cmp);
    bps.dedup();
    let grid = klevel_grid(&bps, grid_size);

    let value = |i: usize, z: f64| intercepts[i] + slopes[i] * z;
    let mut perm: Vec<usize> = (0..l).collect();
    let mut cursor = vec![0usize; l];
    let mut mismatches = 0;
    for &z in &grid {
        perm.sort_by(|&i, &j| value(i, z).total_cmp(&value(j, z)).then(i.cmp(&j)));
        let tol = 1e-9 * z.abs().max(1.0);
        let at = bps.partition_point(|&b| b < z);
        let near = bps.get(at).is_some_and(|b| b - z <= tol) || (at > 0 && z - bps[at - 1] <= tol);
        for k in 0..l {
            let p = &profiles[k];
            while cursor[k] < p.breakpoints().len() && p.breakpoints()[cursor[k]] <= z {
                cursor[k] += 1;
            }
            let line = p.segments()[cursor[k]];
            let expected = perm[k];
            let ok = if near {
                let (a, b) = (value(line, z), value(expected, z));
                (a - b).abs() <= 1e-9 * (1.0 + a.abs())
            } else {
                rep[expected] == line
            };
            if !ok {
                mismatches += 1;
            }
        }
    }
    (grid.len(), mismatches)
}

/// Step-n quantities at a case's candidate, recomputed through the public
/// prediction API rather than the prepared cloud.
pub struct CaseLines {
    pub b: Vec<f64>,
    pub a: Vec<f64>,
    pub var: Vec<f64>,
    pub s2: f64,
}

pub fn case_lines(case: &Case) -> CaseLines {
    let p = &case.posterior;
    let pts = case.cloud.points();
    let (b, var) = pts.rows().map(|r| p.predict(r).unwrap()).unzip();
    let a = pts.rows().map(|r| p.predict_cov(r, &case.x_new).unwrap()).collect();
    let s2 = p.innovation_variance(&case.x_new).unwrap();
    CaseLines { b, a, var, s2 }
}

/// Mean, unbiased variance and fourth central moment.
pub fn moments(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    (m, v, m4)
}

/// Monte Carlo variance of the updated percentile over draws of the new
/// observation, with its standard error.
pub fn mc_percentile_variance(case: &Case, draws: usize, seed: u64) -> (f64, f64) {
    use rand_distr::StandardNormal;
    let l = case_lines(case);
    let mut r = rng(seed);
    let rank = case.cloud.rank();
    let mut updated = vec![0.0; l.b.len()];
    let qs: Vec<f64> = (0..draws)
        .map(|_| {
            let eps: f64 = r.sample(StandardNormal);
            let z = eps / l.s2.sqrt();
            for ((u, b), a) in updated.iter_mut().zip(&l.b).zip(&l.a) {
                *u = b + a * z;
            }
            *updated.select_nth_unstable_by(rank - 1, f64::total_cmp).1
        })
        .collect();
    let (_, v, m4) = moments(&qs);
    (v, ((m4 - v * v) / draws as f64).sqrt())
}

/// Monte Carlo average over the cloud of `P(G(x) >= q_{n+1})` after a drawn
/// observation, with its standard error.
pub fn mc_exceedance(case: &Case, draws: usize, seed: u64) -> (f64, f64) {
    use rand_distr::StandardNormal;
    let l = case_lines(case);
    let mut r = rng(seed);
    let rank = case.cloud.rank();
    let n = l.b.len();
    let next_sd: Vec<f64> = (0..n).map(|i| (l.var[i] - l.a[i] * l.a[i] / l.s2).max(0.0).sqrt()).collect();
    let mut updated = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let gammas: Vec<f64> = (0..draws)
        .map(|_| {
            let eps: f64 = r.sample(StandardNormal);
            let z = eps / l.s2.sqrt();
            for i in 0..n {
                updated[i] = l.b[i] + l.a[i] * z;
            }
            scratch.copy_from_slice(&updated);
            let q = *scratch.select_nth_unstable_by(rank - 1, f64::total_cmp).1;
            let total: f64 = (0..n)
                .map(|i| {
                    if next_sd[i] > 0.0 {
                        0.5 * libm::erfc((q - updated[i]) / (next_sd[i] * core::f64::consts::SQRT_2))
                    } else if updated[i] >= q {
                        1.0
                    } else {
                        0.0
                    }
                })
                .sum();
            total / n as f64
        })
        .collect();
    let (m, v, _) = moments(&gammas);
    (m, (v / draws as f64).sqrt())
}

fn std_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Adaptive Simpson integration of `f` on `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            left + right + diff / 15.0
        } else {
            rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `P(S <= h, T <= k)` for a standard bivariate normal with correlation
/// `rho` (`|rho| < 1`), as the integral over `s <= h` of
/// `phi(s) Phi((k - rho s) / sqrt(1 - rho^2))`.
pub fn bvn_quadrature(h: f64, k: f64, rho: f64) -> f64 {
    let c = (1.0 - rho * rho).sqrt();
    let f = move |s: f64| (-0.5 * s * s).exp() / (2.0 * core::f64::consts::PI).sqrt() * std_cdf((k - rho * s) / c);
    let lo = -40.0f64;
    if h <= lo {
        return 0.0;
    }
    // split so the integrand's features are resolved
    let mut cuts = vec![lo, -8.0, -4.0, -2.0, 0.0, 2.0, 4.0, 8.0];
    if rho != 0.0 {
        cuts.push(k / rho);
    }
    cuts.retain(|&x| x >= lo && x < h);
    cuts.push(h);
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2).map(|w| adaptive_simpson(&f, w[0], w[1], 1e-14)).sum()
}

/// One draw of a standard normal conditioned on `(a, b)`, by rejection from
/// a uniform, exponential or normal proposal depending on the interval.
pub fn truncated_standard_normal(r: &mut impl Rng, a: f64, b: f64) -> f64 {
    use rand_distr::StandardNormal;
    if b <= 0.0 {
        return -truncated_standard_normal(r, -b, -a);
    }
    if a <= 0.0 {
        if b - a >= 1.0 {
            loop {
                let z: f64 = r.sample(StandardNormal);
                if z > a && z < b {
                    return z;
                }
            }
        }
        loop {
            let z = a + (b - a) * r.random::<f64>();
            if r.random::<f64>() <= (-0.5 * z * z).exp() {
                return z;
            }
        }
    }
    if (b - a) * (b + a) <= 3.0 {
        loop {
            let z = a + (b - a) * r.random::<f64>();
            if r.random::<f64>() <= (0.5 * (a * a - z * z)).exp() {
                return z;
            }
        }
    }
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let z = a - (1.0 - r.random::<f64>()).ln() / lambda;
        if z < b && r.random::<f64>() <= (-0.5 * (z - lambda).powi(2)).exp() {
            return z;
        }
    }
}

/// Monte Carlo mean and variance of `N(mu, sigma^2)` conditioned on
/// `(u, v)`: `(mean, se_mean, variance, se_variance)`.
pub fn mc_truncated_moments(mu: f64, sigma: f64, u: f64, v: f64, n: usize, seed: u64) -> (f64, f64, f64, f64) {
    let mut r = rng(seed);
    let (a, b) = ((u - mu) / sigma, (v - mu) / sigma);
    let xs: Vec<f64> = (0..n).map(|_| mu + sigma * truncated_standard_normal(&mut r, a, b)).collect();
    let (m, var, m4) = moments(&xs);
    (m, (var / n as f64).sqrt(), var, ((m4 - var * var) / n as f64).sqrt())
}

/// Evaluation grid for the bivariate normal CDF: `(h, k)` on a 20 x 20
/// lattice over `[-5, 5]^2` and nine correlations.
pub fn bvn_grid() -> Vec<(f64, f64, f64)> {
    let axis: Vec<f64> = (0..20).map(|i| -5.0 + 10.0 * i as f64 / 19.0).collect();
    let rhos = [-0.95, -0.7, -0.4, -0.1, 0.0, 0.1, 0.4, 0.7, 0.95];
    let mut grid = Vec::with_capacity(3600);
    for &h in &axis {
        for &k in &axis {
            for &rho in &rhos {
                grid.push((h, k, rho));
            }
        }
    }
    grid
}

/// Thirty `(mu, sigma, u, v)` truncation cases: two-sided, one-sided, far
/// tails and short intervals.
pub fn truncation_cases() -> Vec<(f64, f64, f64, f64)> {
    let inf = f64::INFINITY;
    vec![
        (0.0, 1.0, 0.0, inf),
        (0.0, 1.0, -inf, 0.0),
        (0.0, 1.0, -1.0, 1.0),
        (0.0, 1.0, -0.1, 2.5),
        (1.0, 2.0, -3.0, 0.5),
        (-2.0, 0.5, -2.5, -1.0),
        (0.0, 1.0, 2.0, inf),
        (0.0, 1.0, 4.0, inf),
        (0.0, 1.0, 7.5, inf),
        (0.0, 1.0, -inf, -3.0),
        (0.0, 1.0, -inf, -6.0),
        (3.0, 0.2, 3.9, inf),
        (0.0, 1.0, 1.0, 1.2),
        (0.0, 1.0, 3.0, 3.05),
        (0.0, 1.0, 6.0, 6.01),
        (0.0, 1.0, -5.3, -5.25),
        (0.0, 1.0, -0.01, 0.01),
        (0.0, 1.0, 0.3, 0.7),
        (10.0, 3.0, 0.0, 12.0),
        (-1.0, 0.1, -1.35, -1.3),
        (0.5, 1.5, -inf, 0.2),
        (0.0, 1.0, -2.0, 6.0),
        (0.0, 1.0, 2.5, 3.5),
        (0.0, 1.0, 5.0, 9.0),
        (0.0, 1.0, -9.0, -4.5),
        (2.0, 0.7, 0.0, 0.5),
        (-3.0, 4.0, 5.0, 25.0),
        (0.0, 1.0, 0.9, 1.1),
        (0.0, 1.0, -1.5, -0.5),
        (1e3, 10.0, 1005.0, 1040.0),
    ]
}
