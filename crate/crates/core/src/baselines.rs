//! Comparison methods sharing the loop, budget accounting and logging of
//! the main optimizer: ParEGO-style random scalarization and uniform random
//! search.

use std::time::Instant;

use rand::{Rng, RngExt};
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::acquisition::log_ei;
use crate::benchmarks::Problem;
use crate::error::{check_dims, Error, Result};
use crate::gp::{GpModel, RefitOptions, RefitReport, SeKernelParams};
use crate::moo::{minimize_scalar, Nsga2Config};
use crate::pareto::{BoxDomain, Evaluation};
use crate::usemo::{derive_seed, update_model, RunOutcome, RunRecord, SearchState, UsemoConfig};

/// Augmentation coefficient of the Tchebycheff scalarization.
pub const DEFAULT_RHO: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarizationWeights {
    pub lambda: Vec<f64>,
    pub rho: f64,
}

impl ScalarizationWeights {
    pub fn new(lambda: Vec<f64>, rho: f64) -> Result<Self> {
        let sum: f64 = lambda.iter().sum();
        if lambda.iter().any(|l| !(*l >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Contract(format!("weights must be non-negative and sum to 1, got {lambda:?}")));
        }
        if !(rho > 0.0) {
            return Err(Error::Contract(format!("rho must be positive, got {rho}")));
        }
        Ok(Self { lambda, rho })
    }
}

/// Uniform draw from the simplex by normalizing exponential variates.
pub fn sample_weights<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<ScalarizationWeights> {
    if k < 2 {
        return Err(Error::Contract(format!("need k >= 2 objectives, got {k}")));
    }
    let e: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let sum: f64 = e.iter().sum();
    let mut lambda: Vec<f64> = e.iter().map(|v| v / sum).collect();
    // push the rounding residue into the largest weight
    let resid = 1.0 - lambda.iter().sum::<f64>();
    let imax = (0..k).max_by(|&a, &b| lambda[a].total_cmp(&lambda[b])).unwrap_or(0);
    lambda[imax] += resid;
    Ok(ScalarizationWeights {
        lambda,
        rho: DEFAULT_RHO,
    })
}

/// Augmented Tchebycheff value `max_i(l_i y_i) + rho * sum_i l_i y_i`.
pub fn scalarize(y: &[f64], w: &ScalarizationWeights) -> Result<f64> {
    check_dims(w.lambda.len(), y.len())?;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for (l, v) in w.lambda.iter().zip(y) {
        max = max.max(l * v);
        sum += l * v;
    }
    Ok(max + w.rho * sum)
}

/// Min-max normalizes each objective column of `data` to `[0, 1]`.
pub fn normalized_objectives(data: &[Evaluation]) -> Vec<Vec<f64>> {
    let k = data.first().map_or(0, |e| e.output.k());
    let mut lo = vec![f64::INFINITY; k];
    let mut hi = vec![f64::NEG_INFINITY; k];
    for e in data {
        for i in 0..k {
            lo[i] = lo[i].min(e.output[i]);
            hi[i] = hi[i].max(e.output[i]);
        }
    }
    data.iter()
        .map(|e| {
            (0..k)
                .map(|i| {
                    let range = hi[i] - lo[i];
                    if range > 0.0 {
                        (e.output[i] - lo[i]) / range
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Settings shared by the baselines; a subset of the main loop's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub nsga2: Nsga2Config,
    pub max_iterations: usize,
    pub initial_points: usize,
    pub refit_every: usize,
    pub seed: u64,
    pub refit: RefitOptions,
    pub noise_variance: f64,
    pub rho: f64,
}

impl From<&UsemoConfig> for BaselineConfig {
    fn from(c: &UsemoConfig) -> Self {
        Self {
            nsga2: c.nsga2.clone(),
            max_iterations: c.max_iterations,
            initial_points: c.initial_points,
            refit_every: c.refit_every,
            seed: c.seed,
            refit: c.refit.clone(),
            noise_variance: c.noise_variance,
            rho: DEFAULT_RHO,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.initial_points < 2 {
            return Err(Error::config("initial_points", "must be at least 2"));
        }
        if self.refit_every == 0 {
            return Err(Error::config("refit_every", "must be at least 1"));
        }
        self.nsga2.validate()
    }
}

#[derive(Debug, Clone)]
pub struct ParegoState {
    pub search: SearchState,
    pub model: Option<GpModel>,
    pub refits: Vec<RefitReport>,
    pub last_weights: Option<ScalarizationWeights>,
}

impl ParegoState {
    pub fn initialize(cfg: &BaselineConfig, problem: &dyn Problem) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            search: SearchState::initialize(problem, cfg.initial_points, cfg.seed)?,
            model: None,
            refits: Vec::new(),
            last_weights: None,
        })
    }

    /// Fresh weights, a GP on the scalarized data, and the EI maximizer
    /// found by the single-objective solver.
    pub fn step(&mut self, cfg: &BaselineConfig, problem: &dyn Problem) -> Result<RunRecord> {
        let t = self.search.iteration + 1;
        let domain = problem.domain();
        let d = domain.dim();
        let mut w = sample_weights(problem.num_objectives(), &mut self.search.rng)?;
        w.rho = cfg.rho;
        let targets = normalized_objectives(&self.search.data)
            .iter()
            .map(|y| scalarize(y, &w))
            .collect::<Result<Vec<f64>>>()?;
        let inputs = self.search.unit_inputs(domain);
        let n = inputs.len();
        let refit = self.model.is_none() || n % cfg.refit_every == 0;
        let mut prior = SeKernelParams::default_for(d);
        prior.noise_variance = cfg.noise_variance;
        let opts = RefitOptions {
            seed: derive_seed(cfg.seed, &[2, n as u64]),
            ..cfg.refit.clone()
        };
        let model = update_model(
            self.model.as_ref(),
            &inputs,
            &targets,
            prior,
            refit.then_some(&opts),
            &mut self.refits,
        )?;

        let start = Instant::now();
        let tau = model.best_target();
        let neg_ei = |x: &[f64]| -log_ei(model.posterior(x), tau);
        let nsga = Nsga2Config {
            seed: derive_seed(cfg.seed, &[4, t as u64]),
            ..cfg.nsga2.clone()
        };
        let (u, _) = minimize_scalar(&neg_ei, &BoxDomain::unit(d), &nsga)?;
        let acq_time_s = start.elapsed().as_secs_f64();

        self.model = Some(model);
        self.last_weights = Some(w);
        self.search.iteration = t;
        let e = self.search.evaluate(problem, &domain.from_unit(&u))?.clone();
        Ok(RunRecord::new(&e, acq_time_s, 1))
    }
}

pub fn run_parego(cfg: &BaselineConfig, problem: &dyn Problem) -> Result<RunOutcome> {
    let mut state = ParegoState::initialize(cfg, problem)?;
    let initial = state.search.data.clone();
    let mut records = Vec::with_capacity(cfg.max_iterations);
    for _ in 0..cfg.max_iterations {
        records.push(state.step(cfg, problem)?);
    }
    Ok(RunOutcome {
        initial,
        records,
        archive: state.search.archive,
        refits: state.refits,
    })
}

/// One uniformly random evaluation.
pub fn random_search_step(state: &mut SearchState, problem: &dyn Problem) -> Result<RunRecord> {
    let start = Instant::now();
    let x = problem.domain().sample_uniform(&mut state.rng);
    let acq_time_s = start.elapsed().as_secs_f64();
    state.iteration += 1;
    let e = state.evaluate(problem, &x)?.clone();
    Ok(RunRecord::new(&e, acq_time_s, 1))
}

pub fn run_random_search(cfg: &BaselineConfig, problem: &dyn Problem) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut state = SearchState::initialize(problem, cfg.initial_points, cfg.seed)?;
    let initial = state.data.clone();
    let mut records = Vec::with_capacity(cfg.max_iterations);
    for _ in 0..cfg.max_iterations {
        records.push(random_search_step(&mut state, problem)?);
    }
    Ok(RunOutcome {
        initial,
        records,
        archive: state.archive,
        refits: Vec::new(),
    })
}
