//! Plug-in percentile of the posterior mean over a Monte Carlo cloud, and its
//! value after a hypothetical new observation.
//!
//! After observing `g` at `x_new`, every cloud mean moves along a line in the
//! standardized innovation `z = (g - m_n(x_new)) / S`:
//! `m_{n+1}(x_i) = m_n(x_i) + k_n(x_i, x_new) z`. The updated percentile is
//! the k-level of these lines.

use crate::error::{arg_err, Error, Result};
use crate::gp::{standardized_innovation, GpPosterior, PreparedPoints, DEGENERATE_VARIANCE};
use crate::klevel::{compute_klevel, compute_klevel_window, KLevelProfile, LineFamily};
use crate::points::Points;
use alloc::vec::Vec;
use core::cmp::Ordering;

/// 1-based rank of the empirical `alpha`-percentile among `l` values:
/// `floor(l * alpha) + 1`, capped at `l`.
pub fn percentile_rank(l: usize, alpha: f64) -> usize {
    ((libm::floor(l as f64 * alpha) as usize) + 1).min(l)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return arg_err(alloc::format!("percentile level {alpha} outside (0, 1)"));
    }
    Ok(())
}

/// Empirical `alpha`-percentile: the `floor(l alpha) + 1`-th smallest value,
/// and the smallest index attaining it.
pub fn empirical_percentile(values: &[f64], alpha: f64) -> Result<(f64, usize)> {
    check_alpha(alpha)?;
    if values.is_empty() {
        return arg_err("percentile of an empty sample");
    }
    if values.iter().any(|v| v.is_nan()) {
        return arg_err("percentile of a sample containing NaN");
    }
    let rank = percentile_rank(values.len(), alpha);
    let mut scratch = values.to_vec();
    let (_, q, _) = scratch.select_nth_unstable_by(rank - 1, |a, b| a.total_cmp(b));
    let q = *q;
    let index = values.iter().position(|v| v.total_cmp(&q) == Ordering::Equal).unwrap_or(0);
    Ok((q, index))
}

/// Monte Carlo sample of the input distribution, prepared against the
/// current posterior.
#[derive(Debug, Clone)]
pub struct McCloud {
    prepared: PreparedPoints,
    alpha: f64,
    rank: usize,
    q: f64,
    q_index: usize,
}

pub fn build_cloud(posterior: &GpPosterior, points: &Points, alpha: f64) -> Result<McCloud> {
    check_alpha(alpha)?;
    if points.is_empty() {
        return arg_err("Monte Carlo cloud must contain at least one point");
    }
    let prepared = posterior.prepare(points)?;
    let (q, q_index) = empirical_percentile(prepared.means(), alpha)?;
    let rank = percentile_rank(points.len(), alpha);
    Ok(McCloud { prepared, alpha, rank, q, q_index })
}

impl McCloud {
    pub fn points(&self) -> &Points {
        self.prepared.points()
    }

    pub fn prepared(&self) -> &PreparedPoints {
        &self.prepared
    }

    pub fn means(&self) -> &[f64] {
        self.prepared.means()
    }

    pub fn variances(&self) -> &[f64] {
        self.prepared.variances()
    }

    pub fn len(&self) -> usize {
        self.prepared.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prepared.is_empty()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// 1-based rank of the percentile among the cloud means.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Current plug-in estimate `q_n`.
    pub fn q(&self) -> f64 {
        self.q
    }

    /// Cloud index of the point whose mean is `q_n`.
    pub fn q_index(&self) -> usize {
        self.q_index
    }

    /// Lines and k-level describing the percentile after observing at `x_new`.
    pub fn candidate(&self, posterior: &GpPosterior, x_new: &[f64]) -> Result<CandidateUpdate> {
        let lines = candidate_lines(posterior, &self.prepared, x_new)?;
        let family = LineFamily::new(lines.slopes.clone(), self.means().to_vec(), self.rank)?;
        let profile = compute_klevel(&family);
        Ok(CandidateUpdate { lines, profile })
    }

    /// [`McCloud::candidate`] with the k-level resolved only where
    /// `|Z| <= half_width` standard deviations.
    pub fn candidate_window(&self, posterior: &GpPosterior, x_new: &[f64], half_width: f64) -> Result<CandidateUpdate> {
        let lines = candidate_lines(posterior, &self.prepared, x_new)?;
        let family = LineFamily::new(lines.slopes.clone(), self.means().to_vec(), self.rank)?;
        let w = half_width / libm::sqrt(lines.innovation_variance);
        let profile = compute_klevel_window(&family, -w, w);
        Ok(CandidateUpdate { lines, profile })
    }
}

/// Step-n quantities at a candidate `x_new`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateLines {
    /// `k_n(x_i, x_new)` for each prepared point.
    pub slopes: Vec<f64>,
    /// `m_n(x_new)`
    pub mean: f64,
    /// `s_n^2(x_new)`
    pub variance: f64,
    /// Innovation variance `S = s_n^2(x_new) + nugget variance`.
    pub innovation_variance: f64,
}

/// Cross-covariances between prepared points and `x_new`. Fails when the
/// predictive variance at `x_new` is negligible.
pub fn candidate_lines(posterior: &GpPosterior, prepared: &PreparedPoints, x_new: &[f64]) -> Result<CandidateLines> {
    if x_new.len() != posterior.dim() {
        return Err(Error::Dimension { expected: posterior.dim(), got: x_new.len() });
    }
    if x_new.iter().any(|v| !v.is_finite()) {
        return arg_err("candidate point must be finite");
    }
    let (features, slopes) = posterior.cross_cov(prepared, x_new);
    if features.var <= DEGENERATE_VARIANCE * posterior.prior_variance() {
        return Err(Error::DegenerateUpdate { variance: features.var });
    }
    Ok(CandidateLines {
        slopes,
        mean: features.mean,
        variance: features.var,
        innovation_variance: features.var + posterior.noise_variance(),
    })
}

/// Lines and their k-level for one candidate.
#[derive(Debug, Clone)]
pub struct CandidateUpdate {
    pub lines: CandidateLines,
    pub profile: KLevelProfile,
}

impl CandidateUpdate {
    /// Updated percentile and the cloud index attaining it, given that `g_new`
    /// is observed.
    pub fn percentile_given(&self, means: &[f64], g_new: f64) -> (f64, usize) {
        let l = &self.lines;
        let z = standardized_innovation(g_new, l.mean, l.innovation_variance);
        let j = self.profile.line_at(z);
        (means[j] + l.slopes[j] * z, j)
    }
}

/// k-level of the cloud's lines for candidate `x_new`.
pub fn klevel_for_candidate(posterior: &GpPosterior, cloud: &McCloud, x_new: &[f64]) -> Result<KLevelProfile> {
    Ok(cloud.candidate(posterior, x_new)?.profile)
}

/// `q_{n+1}` if `g_new` were observed at `x_new`, with the index of the cloud
/// point attaining it.
pub fn updated_percentile(posterior: &GpPosterior, cloud: &McCloud, x_new: &[f64], g_new: f64) -> Result<(f64, usize)> {
    if !g_new.is_finite() {
        return arg_err("hypothetical observation must be finite");
    }
    Ok(cloud.candidate(posterior, x_new)?.percentile_given(cloud.means(), g_new))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rank_convention() {
        assert_eq!(percentile_rank(10, 0.85), 9);
        assert_eq!(percentile_rank(1000, 0.85), 851);
        assert_eq!(percentile_rank(4, 0.999), 4);
        assert_eq!(percentile_rank(1, 0.5), 1);
    }

    #[test]
    fn percentile_picks_order_statistic() {
        let v = [5.0, 1.0, 4.0, 2.0, 3.0];
        assert_eq!(empirical_percentile(&v, 0.5).unwrap(), (3.0, 4));
        assert_eq!(empirical_percentile(&v, 0.1).unwrap(), (1.0, 1));
        assert_eq!(empirical_percentile(&v, 0.99).unwrap(), (5.0, 0));
    }

    #[test]
    fn ties_resolve_to_smallest_index() {
        let v = [2.0, 1.0, 2.0, 2.0, 0.0];
        assert_eq!(empirical_percentile(&v, 0.6).unwrap(), (2.0, 0));
    }

    #[test]
    fn invalid_inputs() {
        assert!(empirical_percentile(&[], 0.5).is_err());
        assert!(empirical_percentile(&[1.0], 1.0).is_err());
        assert!(empirical_percentile(&[1.0, f64::NAN], 0.5).is_err());
        assert!(empirical_percentile(&vec![1.0; 3], 0.0).is_err());
    }
}
