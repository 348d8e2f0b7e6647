//! SUR infill criteria for percentile estimation.
//!
//! Both criteria integrate over the unknown observation at the candidate
//! through the standardized innovation `Z ~ N(0, 1/S)`. On each segment
//! `[I_i, I_{i+1})` of the k-level the updated percentile is the single line
//! `b_j + a_j Z`, which reduces both expectations to one-dimensional
//! truncated-normal and bivariate-normal terms.
//!
//! * [`j_prob`]: distance between `1 - alpha` and the expected proportion of
//!   the input space lying above `q_{n+1}`. Lower is better.
//! * [`j_var`]: variance of `q_{n+1}` over the unknown observation. Higher is
//!   better: the most informative point is the one whose outcome would move
//!   the estimate the most.

use crate::error::{Error, Result};
use crate::gp::{GpPosterior, PreparedPoints};
use crate::percentile::{candidate_lines, CandidateUpdate, McCloud};
use crate::special::{bvn_lower, gaussian_mass, trunc_norm_moments};
use alloc::vec::Vec;

/// Half-width, in standard deviations of `Z`, of the window on which the
/// criteria resolve the k-level. The probability outside is below 1e-22.
pub const Z_WINDOW: f64 = 10.0;

/// Segments whose probability under `Z` is below this are merged into a
/// neighbour before moments are taken.
pub const MIN_INTERVAL_MASS: f64 = 1e-14;

/// Beyond these standardized thresholds the bivariate terms saturate in
/// double precision.
const UPPER_SATURATION: f64 = 8.5;
const LOWER_SATURATION: f64 = -38.5;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CriterionEval {
    pub value: f64,
    pub candidate: Vec<f64>,
    /// Number of k-level segments that carried probability.
    pub n_intervals: usize,
    /// `J^prob` only: the expected exceedance proportion `Gamma`.
    pub expected_proportion: Option<f64>,
}

/// Distribution of `Z` restricted to one k-level segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalStats {
    pub lower: f64,
    pub upper: f64,
    /// Index of the cloud point whose line is the k-th lowest here.
    pub line: usize,
    /// `P(Z in segment)`
    pub probability: f64,
    /// `E[Z | Z in segment]`
    pub mean: f64,
    /// `Var[Z | Z in segment]`
    pub variance: f64,
}

impl IntervalStats {
    /// Conditional mean of the updated percentile on this segment.
    pub fn percentile_mean(&self, slope: f64, intercept: f64) -> f64 {
        intercept + slope * self.mean
    }
}

/// Segment statistics for `Z ~ N(0, 1/S)`, after merging negligible segments.
pub fn interval_stats(update: &CandidateUpdate) -> Result<Vec<IntervalStats>> {
    let s = libm::sqrt(update.lines.innovation_variance);
    let sd = 1.0 / s;
    let mut merged: Vec<(f64, f64, usize)> = Vec::with_capacity(update.profile.n_segments());
    let mut carry: Option<f64> = None;
    for (lo, hi, line) in update.profile.intervals() {
        if gaussian_mass(s * lo, s * hi) < MIN_INTERVAL_MASS {
            match merged.last_mut() {
                Some(last) => last.1 = hi,
                None => carry = carry.or(Some(lo)),
            }
            continue;
        }
        merged.push((carry.take().unwrap_or(lo), hi, line));
    }
    if merged.is_empty() {
        return Err(Error::Argument("k-level carries no probability".into()));
    }
    if let Some(lo) = carry {
        merged[0].0 = lo;
    }
    merged
        .into_iter()
        .map(|(lower, upper, line)| {
            let m = trunc_norm_moments(0.0, sd, lower, upper)?;
            Ok(IntervalStats { lower, upper, line, probability: m.mass, mean: m.mean, variance: m.variance })
        })
        .collect()
}

/// `Var[q_{n+1}]` assembled from segment statistics, by the law of total
/// variance with the between-segment part taken around the overall mean.
pub fn variance_from_stats(stats: &[IntervalStats], slopes: &[f64], intercepts: &[f64]) -> f64 {
    let total: f64 = stats.iter().map(|st| st.probability).sum();
    let overall =
        stats.iter().map(|st| st.probability * st.percentile_mean(slopes[st.line], intercepts[st.line])).sum::<f64>()
            / total;
    let value: f64 = stats
        .iter()
        .map(|st| {
            let a = slopes[st.line];
            let dev = st.percentile_mean(a, intercepts[st.line]) - overall;
            st.probability * (a * a * st.variance + dev * dev)
        })
        .sum::<f64>()
        / total;
    value.max(0.0)
}

fn guarded(posterior: &GpPosterior, x_new: &[f64]) -> Option<CriterionEval> {
    posterior.design().find_duplicate(x_new).map(|_| CriterionEval {
        value: 0.0,
        candidate: x_new.to_vec(),
        n_intervals: 1,
        expected_proportion: None,
    })
}

/// Expected variance of the percentile estimate after observing at `x_new`.
///
/// At an existing design point the observation is already known, so the
/// value is the limit 0.
pub fn j_var(posterior: &GpPosterior, cloud: &McCloud, x_new: &[f64]) -> Result<CriterionEval> {
    if let Some(e) = guarded(posterior, x_new) {
        return Ok(e);
    }
    let update = cloud.candidate_window(posterior, x_new, Z_WINDOW)?;
    j_var_from(&update, cloud, x_new)
}

/// [`j_var`] from a precomputed candidate update.
pub fn j_var_from(update: &CandidateUpdate, cloud: &McCloud, x_new: &[f64]) -> Result<CriterionEval> {
    let stats = interval_stats(update)?;
    let value = variance_from_stats(&stats, &update.lines.slopes, cloud.means());
    Ok(CriterionEval { value, candidate: x_new.to_vec(), n_intervals: stats.len(), expected_proportion: None })
}

/// Points over which `J^prob` averages exceedance probabilities.
#[derive(Debug, Clone, Copy)]
pub enum Integration<'a> {
    /// The Monte Carlo cloud itself.
    Cloud,
    /// A separate prepared sample.
    Points(&'a PreparedPoints),
}

/// Standardized quantities for `P(G(x) >= q_{n+1}, Z in segment)`.
///
/// With `W = q_{n+1} - G(x)` on a segment with line `j`,
/// `P(W <= 0, Z in [u, v)) = P(S' <= e, s u <= T < s v)` for a standard
/// bivariate normal `(S', T)` with correlation `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExceedanceTerms {
    pub e: f64,
    pub r: f64,
    pub sd_w: f64,
}

/// Terms for one integration point: `mean`, `var` are `m_n(x)`, `s_n^2(x)`,
/// `cov` is `k_n(x, x_new)`, `(slope, intercept)` the segment's line and `s2`
/// the innovation variance.
pub fn exceedance_terms(mean: f64, var: f64, cov: f64, slope: f64, intercept: f64, s2: f64) -> ExceedanceTerms {
    let var_next = (var - cov * cov / s2).max(0.0);
    let c = slope - cov;
    let var_w = var_next + c * c / s2;
    let scale = var + (slope * slope + cov * cov) / s2;
    if !(var_w > 1e-15 * scale) {
        let e = if mean - intercept >= 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
        return ExceedanceTerms { e, r: 0.0, sd_w: 0.0 };
    }
    let sd_w = libm::sqrt(var_w);
    let e = (mean - intercept) / sd_w;
    let r = (c / (libm::sqrt(s2) * sd_w)).clamp(-1.0, 1.0);
    ExceedanceTerms { e, r, sd_w }
}

/// `P(S' <= e, lo < T <= hi)` for a standard bivariate normal with
/// correlation `r`.
fn strip_probability(e: f64, lo: f64, hi: f64, r: f64, mass: f64) -> f64 {
    if e >= UPPER_SATURATION {
        return mass;
    }
    if e <= LOWER_SATURATION {
        return 0.0;
    }
    let p = if lo > 0.0 {
        // upper tails keep the difference well conditioned
        bvn_lower(e, -lo, -r) - if hi.is_finite() { bvn_lower(e, -hi, -r) } else { 0.0 }
    } else {
        let upper = if hi.is_finite() { bvn_lower(e, hi, r) } else { crate::special::norm_cdf(e) };
        upper - bvn_lower(e, lo, r)
    };
    p.clamp(0.0, mass)
}

// Gauss-Legendre (weight, node) pairs on [-1, 1].
const GL2: [(f64, f64); 2] = [(1.0, 0.577_350_269_189_625_8), (1.0, -0.577_350_269_189_625_8)];
const GL3: [(f64, f64); 3] = [
    (0.888_888_888_888_888_9, 0.0),
    (0.555_555_555_555_555_6, 0.774_596_669_241_483_4),
    (0.555_555_555_555_555_6, -0.774_596_669_241_483_4),
];
const GL4: [(f64, f64); 4] = [
    (0.652_145_154_862_546_1, 0.339_981_043_584_856_3),
    (0.652_145_154_862_546_1, -0.339_981_043_584_856_3),
    (0.347_854_845_137_453_9, 0.861_136_311_594_052_6),
    (0.347_854_845_137_453_9, -0.861_136_311_594_052_6),
];

/// Largest `width * max(1, |t|, |slope|)` handed to the two-, three- and
/// four-point rules, where `t` is the standardized innovation and `slope`
/// the rate at which the standardized exceedance margin moves with `t`.
/// Within these the error is below about 1e-10 of the strip's mass, so
/// below 1e-10 in `Gamma`. Wider strips are cut into pieces, and steeper
/// ones use the bivariate CDF.
const GL2_REACH: f64 = 0.01;
const GL3_REACH: f64 = 0.1;
const GL4_REACH: f64 = 0.3;
const MAX_PIECES: usize = 64;

/// Mass dropped from the two tails of `Z` in [`j_prob`]; bounds the
/// absolute error this introduces in `Gamma`.
const TAIL_MASS: f64 = 1e-12;

/// A margin below this contributes less than `1e-19` of a strip's mass.
const NEGLIGIBLE_MARGIN: f64 = -9.0;

/// Quadrature node: position in `Z`, weight (including the density of
/// `T = sqrt(S) Z`) and the updated percentile there.
#[derive(Debug, Clone, Copy)]
struct Node {
    z: f64,
    weight: f64,
    q: f64,
}

/// A segment of the k-level in standardized units `T = sqrt(S) Z`.
#[derive(Debug, Clone)]
struct Strip {
    lo: f64,
    hi: f64,
    mass: f64,
    line: usize,
    /// Width of one quadrature piece.
    piece: f64,
    /// `piece * max(1, |t|)` over the strip.
    reach: f64,
    gl2: core::ops::Range<usize>,
    gl3: core::ops::Range<usize>,
    gl4: core::ops::Range<usize>,
}

/// Exceedance margins and what the strips need from one integration point.
#[derive(Debug, Clone, Copy)]
struct PointTerms {
    mean: f64,
    var: f64,
    cov: f64,
    /// `1 / sd` of `G(x)` after the observation; zero when that variance
    /// vanishes relative to the point's own.
    inv_sd_next: f64,
}

impl PointTerms {
    fn new(mean: f64, var: f64, cov: f64, s2: f64) -> Self {
        let var_next = var - cov * cov / s2;
        let inv_sd_next = if var_next > 1e-13 * var { 1.0 / libm::sqrt(var_next) } else { 0.0 };
        Self { mean, var, cov, inv_sd_next }
    }
}

impl Strip {
    fn new(
        lo: f64,
        hi: f64,
        mass: f64,
        line: usize,
        slope: f64,
        intercept: f64,
        s: f64,
        nodes: &mut Vec<Node>,
    ) -> Self {
        let (clo, chi) = (lo.max(-Z_WINDOW), hi.min(Z_WINDOW));
        let width = chi - clo;
        let scale = clo.abs().max(chi.abs()).max(1.0);
        let pieces =
            if width > 0.0 { (libm::ceil(width * scale / GL4_REACH) as usize).clamp(1, MAX_PIECES) } else { 1 };
        let piece = width.max(0.0) / pieces as f64;
        let push = |rule: &[(f64, f64)], nodes: &mut Vec<Node>| {
            let start = nodes.len();
            let h = 0.5 * piece;
            for p in 0..pieces {
                let c = clo + (p as f64 + 0.5) * piece;
                for &(w, x) in rule {
                    let t = c + h * x;
                    let z = t / s;
                    nodes.push(Node { z, weight: w * h * crate::special::norm_pdf(t), q: intercept + slope * z });
                }
            }
            start..nodes.len()
        };
        let reach = piece * scale;
        let gl2 = if pieces == 1 && reach <= GL2_REACH { push(&GL2, nodes) } else { 0..0 };
        let gl3 = if pieces == 1 && reach <= GL3_REACH { push(&GL3, nodes) } else { 0..0 };
        let gl4 = push(&GL4, nodes);
        Strip { lo, hi, mass, line, piece, reach, gl2, gl3, gl4 }
    }

    /// `P(G(x) >= q_{n+1}, T in strip)` for an integration point with
    /// current moments `p`, given the segment line `(slope, intercept)`.
    #[inline]
    fn probability(&self, nodes: &[Node], p: PointTerms, slope: f64, intercept: f64, s2: f64, s: f64) -> f64 {
        let c = slope - p.cov;
        let inv = p.inv_sd_next;
        if inv > 0.0 {
            // margin (m + k z - q(z)) / sd_next at the strip ends
            let (zlo, zhi) = (self.lo.max(-Z_WINDOW) / s, self.hi.min(Z_WINDOW) / s);
            let (u, v) = ((p.mean - intercept - c * zlo) * inv, (p.mean - intercept - c * zhi) * inv);
            if u.min(v) >= UPPER_SATURATION {
                return self.mass;
            }
            if u.max(v) <= NEGLIGIBLE_MARGIN {
                return 0.0;
            }
            let reach = self.reach.max(self.piece * c.abs() * inv / s);
            let range = if reach <= GL2_REACH && !self.gl2.is_empty() {
                Some(self.gl2.clone())
            } else if reach <= GL3_REACH && !self.gl3.is_empty() {
                Some(self.gl3.clone())
            } else if reach <= GL4_REACH {
                Some(self.gl4.clone())
            } else {
                None
            };
            if let Some(range) = range {
                let sum: f64 = nodes[range]
                    .iter()
                    .map(|n| n.weight * crate::special::norm_cdf_fast((p.mean + p.cov * n.z - n.q) * inv))
                    .sum();
                return sum.clamp(0.0, self.mass);
            }
        }
        let t = exceedance_terms(p.mean, p.var, p.cov, slope, intercept, s2);
        strip_probability(t.e, self.lo, self.hi, t.r, self.mass)
    }
}

/// Strips carrying the `Z` mass, without the two tails of total mass at
/// most [`TAIL_MASS`].
fn strips(stats: &[IntervalStats], s: f64, slopes: &[f64], intercepts: &[f64]) -> (Vec<Strip>, Vec<Node>) {
    let n = stats.len();
    let (mut first, mut last) = (0, n);
    let mut dropped = 0.0;
    while first < last && dropped + stats[first].probability <= 0.5 * TAIL_MASS {
        dropped += stats[first].probability;
        first += 1;
    }
    dropped = 0.0;
    while last > first && dropped + stats[last - 1].probability <= 0.5 * TAIL_MASS {
        dropped += stats[last - 1].probability;
        last -= 1;
    }
    let mut nodes = Vec::new();
    let strips = stats[first..last]
        .iter()
        .map(|st| {
            let j = st.line;
            Strip::new(s * st.lower, s * st.upper, st.probability, j, slopes[j], intercepts[j], s, &mut nodes)
        })
        .collect();
    (strips, nodes)
}

/// SUR criterion on the exceedance proportion.
///
/// Returns `|Gamma - (1 - alpha)|` where `Gamma` is the expected fraction of
/// integration points `x` with `P_{n+1}(G(x) >= q_{n+1})`, averaged over
/// the unknown observation at `x_new`. `Gamma` is reported in
/// [`CriterionEval::expected_proportion`].
pub fn j_prob(
    posterior: &GpPosterior,
    cloud: &McCloud,
    integration: Integration<'_>,
    x_new: &[f64],
) -> Result<CriterionEval> {
    if let Some(mut e) = guarded(posterior, x_new) {
        // nothing changes: every point keeps its current exceedance probability
        let gamma = current_proportion(cloud, integration);
        e.value = (gamma - (1.0 - cloud.alpha())).abs();
        e.expected_proportion = Some(gamma);
        return Ok(e);
    }
    let update = cloud.candidate_window(posterior, x_new, Z_WINDOW)?;
    j_prob_from(posterior, &update, cloud, integration, x_new)
}

/// Average of `P_n(G(x) >= q_n)` over the integration points: the value of
/// `Gamma` when nothing is learned.
pub fn current_proportion(cloud: &McCloud, integration: Integration<'_>) -> f64 {
    let (means, vars) = match integration {
        Integration::Cloud => (cloud.means(), cloud.variances()),
        Integration::Points(p) => (p.means(), p.variances()),
    };
    let q = cloud.q();
    let total: f64 = means
        .iter()
        .zip(vars)
        .map(|(m, v)| {
            if *v > 0.0 {
                crate::special::norm_cdf((m - q) / libm::sqrt(*v))
            } else if *m >= q {
                1.0
            } else {
                0.0
            }
        })
        .sum();
    total / means.len() as f64
}

/// [`j_prob`] from a precomputed candidate update.
pub fn j_prob_from(
    posterior: &GpPosterior,
    update: &CandidateUpdate,
    cloud: &McCloud,
    integration: Integration<'_>,
    x_new: &[f64],
) -> Result<CriterionEval> {
    let stats = interval_stats(update)?;
    let lines = &update.lines;
    let s2 = lines.innovation_variance;
    let s = libm::sqrt(s2);
    let a = &lines.slopes;
    let b = cloud.means();

    let owned;
    let (means, vars, covs): (&[f64], &[f64], &[f64]) = match integration {
        Integration::Cloud => (cloud.means(), cloud.variances(), &lines.slopes),
        Integration::Points(p) => {
            owned = candidate_lines(posterior, p, x_new)?;
            (p.means(), p.variances(), &owned.slopes)
        }
    };
    let (strips, nodes) = strips(&stats, s, a, b);

    let mut total = 0.0;
    for ((&mean, &var), &cov) in means.iter().zip(vars).zip(covs) {
        let p = PointTerms::new(mean, var, cov, s2);
        total += strips.iter().map(|st| st.probability(&nodes, p, a[st.line], b[st.line], s2, s)).sum::<f64>();
    }
    let gamma = total / means.len() as f64;
    Ok(CriterionEval {
        value: (gamma - (1.0 - cloud.alpha())).abs(),
        candidate: x_new.to_vec(),
        n_intervals: stats.len(),
        expected_proportion: Some(gamma),
    })
}
