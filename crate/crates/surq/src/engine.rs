//! The sequential design loop and the random-search baseline.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use surq_core::criteria::{current_proportion, j_prob, j_var, Integration};
use surq_core::gp::DEGENERATE_VARIANCE;
use surq_core::infill::{local_refine, select_candidates, RefineOptions};
use surq_core::testbed::{lhs_design, sample_inputs};
use surq_core::{
    build_cloud, fit_hyperparameters, fit_posterior, Design, Error as CoreError, ExperimentSpec, GpPosterior,
    InputDistribution, KernelFamily, KernelParams, McCloud, MleOptions, Points, PreparedPoints, TestFunction,
    TrendBasis, TrendModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Exceedance-proportion criterion, minimized.
    Prob,
    /// Variance of the updated percentile, maximized.
    Var,
    /// Points drawn from the input law.
    #[serde(rename = "rs")]
    RandomSearch,
}

impl Criterion {
    pub const ALL: [Criterion; 3] = [Criterion::Prob, Criterion::Var, Criterion::RandomSearch];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Prob => "prob",
            Criterion::Var => "var",
            Criterion::RandomSearch => "rs",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Where the next point is searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Candidates {
    /// Every point of the Monte Carlo cloud.
    Cloud,
    /// A fresh pool from the input law each iteration, thinned to a
    /// shortlist weighted by closeness to the current estimate.
    Pool { pool_size: usize, shortlist_size: usize },
}

/// Surrogate model settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSettings {
    pub kernel: KernelFamily,
    pub trend: TrendBasis,
    /// Relative nugget of the first fit.
    pub nugget: f64,
    /// Largest nugget tried when factorization fails; each retry multiplies
    /// the nugget by 100.
    pub max_nugget: f64,
    pub mle_starts: usize,
    /// Refit hyperparameters after every `refit_every` observations; in
    /// between, the posterior is updated with fixed hyperparameters.
    pub refit_every: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            kernel: KernelFamily::Matern32,
            trend: TrendBasis::Linear,
            nugget: 1e-8,
            max_nugget: 1e-2,
            mle_starts: 10,
            refit_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurConfig {
    pub criterion: Criterion,
    pub n_initial: usize,
    pub budget: usize,
    pub cloud_size: usize,
    /// Draw a new Monte Carlo cloud at every iteration.
    pub cloud_renewal: bool,
    pub candidates: Candidates,
    /// Quasi-Newton refinement of the best candidate (variance criterion only).
    pub local_refine: bool,
    /// Number of cloud points used as integration points by the proportion
    /// criterion; `None` uses the whole cloud.
    pub integration_points: Option<usize>,
    pub alpha: f64,
    pub seed: u64,
    pub model: ModelSettings,
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] CoreError),
}

impl SurConfig {
    pub fn validate(&self, spec: &ExperimentSpec) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::Config(m));
        let d = spec.dim();
        if self.n_initial < d + 2 {
            return bad(format!("n_initial = {} must be at least dimension + 2 = {}", self.n_initial, d + 2));
        }
        if self.budget < self.n_initial {
            return bad(format!("budget = {} is below n_initial = {}", self.budget, self.n_initial));
        }
        if self.cloud_size < 2 {
            return bad("cloud_size must be at least 2".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} outside (0, 1)", self.alpha));
        }
        if let Candidates::Pool { pool_size, shortlist_size } = self.candidates {
            if shortlist_size == 0 || shortlist_size > pool_size {
                return bad(format!("shortlist_size = {shortlist_size} must lie in 1..=pool_size ({pool_size})"));
            }
        }
        if self.integration_points == Some(0) {
            return bad("integration_points must be positive".into());
        }
        let m = &self.model;
        if !(m.nugget >= 0.0 && m.max_nugget >= m.nugget) {
            return bad("model nugget must satisfy 0 <= nugget <= max_nugget".into());
        }
        if m.mle_starts == 0 || m.refit_every == 0 {
            return bad("model.mle_starts and model.refit_every must be positive".into());
        }
        Ok(())
    }
}

/// One row of the trace. Iteration 0 is the initial design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub n_evaluations: usize,
    /// Point evaluated at this iteration and its value.
    pub point: Option<Vec<f64>>,
    pub value: Option<f64>,
    /// Criterion value at the chosen point.
    pub criterion_value: Option<f64>,
    /// Percentile estimate after this iteration's observation.
    pub estimate: f64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: SurConfig,
    pub initial_points: Vec<Vec<f64>>,
    pub initial_values: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
    pub final_kernel: Option<KernelParams>,
    /// Calls made to the test function.
    pub evaluations: u64,
    /// Set when the run stopped early; the trace is then partial.
    pub failure: Option<String>,
}

impl RunRecord {
    pub fn estimates(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.estimate).collect()
    }

    pub fn observations(&self) -> usize {
        self.initial_values.len() + self.iterations.iter().filter(|r| r.value.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy)]
enum Stream {
    Design = 1,
    Cloud = 2,
    Pool = 3,
    Shortlist = 4,
    Baseline = 5,
    Likelihood = 6,
}

fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// Runs the configured criterion.
pub fn run(spec: &ExperimentSpec, config: &SurConfig) -> Result<RunRecord, EngineError> {
    spec.validate()?;
    config.validate(spec)?;
    let mut state = Runner::new(spec, config)?;
    state.execute();
    Ok(state.finish())
}

pub fn run_sur(spec: &ExperimentSpec, config: &SurConfig) -> Result<RunRecord, EngineError> {
    if config.criterion == Criterion::RandomSearch {
        return Err(EngineError::Config("run_sur needs the prob or var criterion".into()));
    }
    run(spec, config)
}

pub fn run_random_search(spec: &ExperimentSpec, config: &SurConfig) -> Result<RunRecord, EngineError> {
    let config = SurConfig { criterion: Criterion::RandomSearch, ..config.clone() };
    run(spec, &config)
}

struct Runner<'a> {
    spec: &'a ExperimentSpec,
    config: &'a SurConfig,
    function: TestFunction,
    design: Design,
    posterior: Option<GpPosterior>,
    kernel: Option<KernelParams>,
    nugget: f64,
    /// Cloud built from the current posterior; the next point is chosen
    /// against it.
    cloud: Option<McCloud>,
    cloud_points: Option<Points>,
    cloud_rng: ChaCha8Rng,
    pool_rng: ChaCha8Rng,
    shortlist_rng: ChaCha8Rng,
    baseline_rng: ChaCha8Rng,
    likelihood_rng: ChaCha8Rng,
    record: RunRecord,
}

impl<'a> Runner<'a> {
    fn new(spec: &'a ExperimentSpec, config: &'a SurConfig) -> Result<Self, EngineError> {
        let function = TestFunction::new(spec.function)?;
        let d = spec.dim();
        let unit = lhs_design(config.n_initial, d, &mut stream(config.seed, Stream::Design))?;
        let points = spec.distribution.from_unit(&unit)?;
        let values = points.rows().map(|x| function.evaluate(x)).collect::<Result<Vec<_>, _>>()?;
        let design = Design::new(points.clone(), values.clone())?;
        Ok(Self {
            spec,
            config,
            function,
            design,
            posterior: None,
            kernel: None,
            nugget: config.model.nugget,
            cloud: None,
            cloud_points: None,
            cloud_rng: stream(config.seed, Stream::Cloud),
            pool_rng: stream(config.seed, Stream::Pool),
            shortlist_rng: stream(config.seed, Stream::Shortlist),
            baseline_rng: stream(config.seed, Stream::Baseline),
            likelihood_rng: stream(config.seed, Stream::Likelihood),
            record: RunRecord {
                config: config.clone(),
                initial_points: points.rows().map(<[f64]>::to_vec).collect(),
                initial_values: values,
                iterations: Vec::new(),
                final_kernel: None,
                evaluations: 0,
                failure: None,
            },
        })
    }

    fn execute(&mut self) {
        let iterations = self.config.budget - self.config.n_initial;
        for t in 0..=iterations {
            let start = Instant::now();
            if let Err(e) = self.step(t, start) {
                log::warn!("run with seed {} stopped at iteration {t}: {e}", self.config.seed);
                self.record.failure = Some(format!("iteration {t}: {e}"));
                return;
            }
        }
    }

    fn finish(mut self) -> RunRecord {
        self.record.final_kernel = self.kernel.take();
        self.record.evaluations = self.function.evaluations();
        self.record
    }

    /// Iteration `t`: pick and evaluate a point (for `t > 0`), update the
    /// model, and record the new estimate.
    fn step(&mut self, t: usize, start: Instant) -> Result<(), EngineError> {
        let mut chosen = None;
        if t > 0 {
            let (x, criterion_value) = self.choose()?;
            let g = self.function.evaluate(&x)?;
            self.design = self.design.with_observation(&x, g)?;
            chosen = Some((x, g, criterion_value));
        }
        self.update_model(t, chosen.as_ref().map(|(x, g, _)| (x.as_slice(), *g)))?;

        if self.config.cloud_renewal || self.cloud_points.is_none() {
            self.cloud_points =
                Some(sample_inputs(&self.spec.distribution, self.config.cloud_size, &mut self.cloud_rng)?);
        }
        let posterior = self.posterior.as_ref().expect("model fitted");
        let cloud = build_cloud(posterior, self.cloud_points.as_ref().expect("cloud drawn"), self.config.alpha)?;
        let estimate = cloud.q();
        self.cloud = Some(cloud);

        let (point, value, criterion_value) = match chosen {
            Some((x, g, v)) => (Some(x), Some(g), v),
            None => (None, None, None),
        };
        self.record.iterations.push(IterationRecord {
            iteration: t,
            n_evaluations: self.design.len(),
            point,
            value,
            criterion_value,
            estimate,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        Ok(())
    }

    fn update_model(&mut self, t: usize, observed: Option<(&[f64], f64)>) -> Result<(), EngineError> {
        if t % self.config.model.refit_every != 0 {
            if let (Some(post), Some((x, g))) = (&self.posterior, observed) {
                match post.update_posterior(x, g) {
                    Ok(p) => {
                        self.posterior = Some(p);
                        return Ok(());
                    }
                    Err(e) => log::debug!("one-step update failed ({e}); refitting"),
                }
            }
        }
        self.refit()
    }

    /// Maximum likelihood fit, retried with a larger nugget on failure.
    fn refit(&mut self) -> Result<(), EngineError> {
        let m = &self.config.model;
        let trend = TrendModel::universal(m.trend);
        let seed = self.likelihood_rng.random();
        loop {
            let opts = MleOptions {
                starts: m.mle_starts,
                nugget: self.nugget,
                seed,
                warm_start: self.kernel.as_ref().map(|k| k.lengthscales.clone()),
                ..MleOptions::default()
            };
            let attempt = fit_hyperparameters(&self.design, m.kernel, &trend, &opts).and_then(|fit| {
                let post = fit_posterior(self.design.clone(), fit.kernel.clone(), trend.clone(), self.nugget)?;
                Ok((post, fit.kernel))
            });
            match attempt {
                Ok((post, kernel)) => {
                    self.posterior = Some(post);
                    self.kernel = Some(kernel);
                    return Ok(());
                }
                Err(e) if self.nugget * 100.0 <= m.max_nugget => {
                    let next = if self.nugget > 0.0 { self.nugget * 100.0 } else { 1e-10 };
                    log::warn!("model fit failed with nugget {:e} ({e}); retrying with {:e}", self.nugget, next);
                    self.nugget = next;
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    fn choose(&mut self) -> Result<(Vec<f64>, Option<f64>), EngineError> {
        let posterior = self.posterior.as_ref().expect("model fitted");
        let cloud = self.cloud.as_ref().expect("cloud built");
        let criterion = self.config.criterion;
        if criterion == Criterion::RandomSearch {
            let x = sample_inputs(&self.spec.distribution, 1, &mut self.baseline_rng)?;
            return Ok((x.row(0).to_vec(), None));
        }
        let candidates = match self.config.candidates {
            Candidates::Cloud => cloud.points().clone(),
            Candidates::Pool { pool_size, shortlist_size } => {
                let pool = sample_inputs(&self.spec.distribution, pool_size, &mut self.pool_rng)?;
                let shortlist =
                    select_candidates(posterior, cloud.q(), &pool, shortlist_size, &mut self.shortlist_rng)?;
                if shortlist.uniform_draws > 0 {
                    log::info!("{} shortlist points drawn uniformly (zero weights)", shortlist.uniform_draws);
                }
                shortlist.points
            }
        };
        let integration = match self.config.integration_points {
            Some(m) if criterion == Criterion::Prob && m < cloud.len() => Some(Subset::new(posterior, cloud, m)?),
            _ => None,
        };
        let eval = |x: &[f64]| evaluate(criterion, posterior, cloud, integration.as_ref(), x);
        let values: Vec<Option<f64>> = (0..candidates.len())
            .into_par_iter()
            .map(|i| {
                let x = candidates.row(i);
                if !admissible(posterior, x) {
                    return None;
                }
                eval(x)
            })
            .collect();
        let maximize = criterion == Criterion::Var;
        let best = best_index(&values, maximize);
        let Some(i) = best else {
            log::warn!("no candidate could be evaluated; drawing a random point");
            let x = sample_inputs(&self.spec.distribution, 1, &mut self.baseline_rng)?;
            return Ok((x.row(0).to_vec(), None));
        };
        let start = candidates.row(i).to_vec();
        let start_value = values[i];
        if criterion == Criterion::Var && self.config.local_refine {
            let opts = refine_options(&self.spec.distribution);
            let refined =
                local_refine(|x: &[f64]| if admissible(posterior, x) { eval(x) } else { None }, &start, true, &opts)?;
            return Ok((refined.point, Some(refined.value)));
        }
        Ok((start, start_value))
    }
}

/// Integration points for the proportion criterion when the cloud is too
/// large to integrate over in full.
///
/// The cloud is an i.i.d. sample, so its first `m` points are a uniform
/// subset. The subset estimate of `Gamma` is shifted by the gap between the
/// current proportion on the whole cloud and on the subset (a control
/// variate): it stays centred on the whole-cloud value, and most of the
/// subsampling noise cancels because both subset terms share their points.
struct Subset {
    points: PreparedPoints,
    offset: f64,
}

impl Subset {
    fn new(posterior: &GpPosterior, cloud: &McCloud, m: usize) -> Result<Self, CoreError> {
        let idx: Vec<usize> = (0..m).collect();
        let points = posterior.prepare(&cloud.points().select(&idx))?;
        let offset =
            current_proportion(cloud, Integration::Cloud) - current_proportion(cloud, Integration::Points(&points));
        Ok(Self { points, offset })
    }
}

fn evaluate(
    criterion: Criterion,
    posterior: &GpPosterior,
    cloud: &McCloud,
    subset: Option<&Subset>,
    x: &[f64],
) -> Option<f64> {
    let value = match criterion {
        Criterion::Var => j_var(posterior, cloud, x).ok()?.value,
        Criterion::Prob => match subset {
            None => j_prob(posterior, cloud, Integration::Cloud, x).ok()?.value,
            Some(sub) => {
                let e = j_prob(posterior, cloud, Integration::Points(&sub.points), x).ok()?;
                (e.expected_proportion? + sub.offset - (1.0 - cloud.alpha())).abs()
            }
        },
        Criterion::RandomSearch => return None,
    };
    Some(value).filter(|v| v.is_finite())
}

/// A candidate must not repeat a design point and must carry predictive
/// variance, otherwise observing it teaches nothing.
fn admissible(posterior: &GpPosterior, x: &[f64]) -> bool {
    if posterior.design().find_duplicate(x).is_some() {
        return false;
    }
    match posterior.predict(x) {
        Ok((_, v)) => v > DEGENERATE_VARIANCE * posterior.prior_variance(),
        Err(_) => false,
    }
}

/// Index of the best value, earliest on ties.
pub fn best_index(values: &[Option<f64>], maximize: bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        let Some(v) = *v else { continue };
        let better = match best {
            None => true,
            Some((_, b)) => {
                if maximize {
                    v > b
                } else {
                    v < b
                }
            }
        };
        if better {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

fn refine_options(dist: &InputDistribution) -> RefineOptions {
    match dist {
        InputDistribution::UniformHypercube { lower, upper } => {
            let scale: Vec<f64> = lower.iter().zip(upper).map(|(a, b)| b - a).collect();
            let mut opts = RefineOptions::with_scale(&scale);
            opts.bounds = Some((lower.clone(), upper.clone()));
            opts
        }
        InputDistribution::MultivariateNormal { mean, covariance } => {
            let d = mean.len();
            let scale: Vec<f64> = (0..d).map(|j| covariance[j * d + j].sqrt()).collect();
            RefineOptions::with_scale(&scale)
        }
    }
}
