//! The outer optimization loop: per-objective GP surrogates, a cheap
//! multi-objective problem over their acquisition functions solved with
//! NSGA-II, and selection of the next expensive evaluation by the volume of
//! its uncertainty hyper-rectangle.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionKind, AcquisitionSpec, BoundAcquisition};
use crate::benchmarks::{evaluate_checked, Problem};
use crate::design::sobol_design;
use crate::error::{Error, Result};
use crate::gp::{refit_hyperparameters, GpModel, RefitOptions, RefitReport, SeKernelParams, DEFAULT_NOISE_VARIANCE};
use crate::moo::{solve_vector, Nsga2Config};
use crate::pareto::{BoxDomain, Evaluation, InputPoint, ObjectiveVector, ParetoArchive};

/// How the next input is picked from the cheap problem's Pareto set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SelectionPolicy {
    #[default]
    UncertaintyMax,
    Random,
}

impl fmt::Display for SelectionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            SelectionPolicy::UncertaintyMax => "uncertainty_max",
            SelectionPolicy::Random => "random",
        })
    }
}

impl FromStr for SelectionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uncertainty_max" => Ok(SelectionPolicy::UncertaintyMax),
            "random" => Ok(SelectionPolicy::Random),
            other => Err(Error::config(
                "selection_policy",
                format!("expected uncertainty_max or random, got `{other}`"),
            )),
        }
    }
}

/// Default initial design size for a `d`-dimensional problem.
pub fn default_initial_points(d: usize) -> usize {
    (2 * (d + 1)).max(5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsemoConfig {
    pub acquisition: AcquisitionSpec,
    pub nsga2: Nsga2Config,
    pub max_iterations: usize,
    pub initial_points: usize,
    pub refit_every: usize,
    pub selection_policy: SelectionPolicy,
    pub seed: u64,
    pub refit: RefitOptions,
    /// Noise variance of the kernel before the first refit.
    pub noise_variance: f64,
}

impl UsemoConfig {
    pub fn new(kind: AcquisitionKind, d: usize, max_iterations: usize, seed: u64) -> Self {
        Self {
            acquisition: AcquisitionSpec::new(kind),
            nsga2: Nsga2Config::default(),
            max_iterations,
            initial_points: default_initial_points(d),
            refit_every: 10,
            selection_policy: SelectionPolicy::UncertaintyMax,
            seed,
            refit: RefitOptions::default(),
            noise_variance: DEFAULT_NOISE_VARIANCE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.initial_points < 2 {
            return Err(Error::config("initial_points", "must be at least 2"));
        }
        if self.refit_every == 0 {
            return Err(Error::config("refit_every", "must be at least 1"));
        }
        if !(self.noise_variance > 0.0) {
            return Err(Error::config("noise_variance", "must be positive"));
        }
        self.nsga2.validate()
    }
}

/// One outer iteration of any method. Metric fields are filled in after
/// the run by the harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub iteration: usize,
    pub input: InputPoint,
    pub objectives: ObjectiveVector,
    /// Wall-clock seconds spent solving the cheap problem and selecting.
    pub acq_time_s: f64,
    /// Size of the candidate set the input was selected from.
    pub candidates: usize,
    pub phv_difference: Option<f64>,
    pub r2_distance: Option<f64>,
    pub regret: Option<f64>,
}

impl RunRecord {
    pub(crate) fn new(e: &Evaluation, acq_time_s: f64, candidates: usize) -> Self {
        Self {
            iteration: e.iteration,
            input: e.input.clone(),
            objectives: e.output.clone(),
            acq_time_s,
            candidates,
            phv_difference: None,
            r2_distance: None,
            regret: None,
        }
    }
}

/// Result of a complete run of any method.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub initial: Vec<Evaluation>,
    pub records: Vec<RunRecord>,
    pub archive: ParetoArchive,
    pub refits: Vec<RefitReport>,
}

/// Mixes `tags` into `base` to give independent, reproducible RNG streams.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut h = base ^ 0x9e37_79b9_7f4a_7c15;
    for &t in tags {
        h = splitmix(h ^ splitmix(t.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    splitmix(h)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Evaluation history and archive shared by every method.
#[derive(Debug, Clone)]
pub struct SearchState {
    pub data: Vec<Evaluation>,
    pub archive: ParetoArchive,
    /// Number of completed outer iterations.
    pub iteration: usize,
    pub rng: ChaCha8Rng,
}

impl SearchState {
    /// Evaluates the first `n` points of a seeded Sobol design.
    pub fn initialize(problem: &dyn Problem, n: usize, seed: u64) -> Result<Self> {
        let mut state = Self {
            data: Vec::new(),
            archive: ParetoArchive::new(),
            iteration: 0,
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, &[1])),
        };
        for x in sobol_design(problem.domain(), n, derive_seed(seed, &[0]))? {
            state.evaluate(problem, &x)?;
        }
        Ok(state)
    }

    /// Snaps, evaluates and records `x`, tagging it with the current iteration.
    pub fn evaluate(&mut self, problem: &dyn Problem, x: &[f64]) -> Result<&Evaluation> {
        let x = problem.snap(x);
        let y = evaluate_checked(problem, &x)?;
        let e = Evaluation {
            input: InputPoint(x),
            output: y,
            iteration: self.iteration,
        };
        self.archive.insert(e.clone())?;
        self.data.push(e);
        Ok(self.data.last().expect("just pushed"))
    }

    /// Training inputs mapped onto the unit cube of `domain`.
    pub fn unit_inputs(&self, domain: &BoxDomain) -> Vec<Vec<f64>> {
        self.data.iter().map(|e| domain.to_unit(&e.input)).collect()
    }

    pub fn objective_column(&self, i: usize) -> Vec<f64> {
        self.data.iter().map(|e| e.output[i]).collect()
    }
}

/// Fits a GP to `targets`, refitting hyperparameters when `refit` is set.
pub(crate) fn update_model(
    previous: Option<&GpModel>,
    inputs: &[Vec<f64>],
    targets: &[f64],
    prior: SeKernelParams,
    refit: Option<&RefitOptions>,
    reports: &mut Vec<RefitReport>,
) -> Result<GpModel> {
    let base = match previous {
        Some(m) => m.condition_on(inputs, targets)?,
        None => GpModel::fit(inputs, targets, prior)?,
    };
    match refit {
        Some(opts) => {
            let (model, report) = refit_hyperparameters(&base, opts)?;
            if let Some(w) = &report.warning {
                log::warn!("{w}");
            }
            reports.push(report);
            Ok(model)
        }
        None => Ok(base),
    }
}

/// `prod_i 2 sqrt(beta) sigma_i(x)`, with `sigma_i` in normalized target space.
pub fn uncertainty_volume(models: &[GpModel], x: &[f64], beta: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(Error::Contract(format!("beta must be non-negative, got {beta}")));
    }
    let width = 2.0 * beta.sqrt();
    Ok(models.iter().map(|m| width * m.posterior(x).stddev).product())
}

/// Index of the chosen candidate: the largest uncertainty volume (lowest
/// index on ties) or a uniform draw.
pub fn select_next<P: AsRef<[f64]>>(
    candidates: &[P],
    models: &[GpModel],
    beta: f64,
    policy: SelectionPolicy,
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    match candidates.len() {
        0 => Err(Error::Contract("candidate set is empty".into())),
        1 => Ok(0),
        n => match policy {
            SelectionPolicy::Random => Ok(rng.random_range(0..n)),
            SelectionPolicy::UncertaintyMax => {
                let mut best = (0, f64::NEG_INFINITY);
                for (i, c) in candidates.iter().enumerate() {
                    let v = uncertainty_volume(models, c.as_ref(), beta)?;
                    if v > best.1 {
                        best = (i, v);
                    }
                }
                Ok(best.0)
            }
        },
    }
}

/// Loop state: shared history plus one surrogate per objective, all fitted
/// on unit-cube coordinates.
#[derive(Debug, Clone)]
pub struct UsemoState {
    pub search: SearchState,
    pub models: Vec<GpModel>,
    pub refits: Vec<RefitReport>,
    /// Candidate set of the most recent iteration, in the problem's domain.
    pub last_candidates: Vec<InputPoint>,
}

impl UsemoState {
    pub fn initialize(cfg: &UsemoConfig, problem: &dyn Problem) -> Result<Self> {
        cfg.validate()?;
        let search = SearchState::initialize(problem, cfg.initial_points, cfg.seed)?;
        let mut state = Self {
            search,
            models: Vec::new(),
            refits: Vec::new(),
            last_candidates: Vec::new(),
        };
        state.update_models(cfg, problem, true)?;
        Ok(state)
    }

    fn update_models(&mut self, cfg: &UsemoConfig, problem: &dyn Problem, force_refit: bool) -> Result<()> {
        let domain = problem.domain();
        let inputs = self.search.unit_inputs(domain);
        let n = inputs.len();
        let refit = force_refit || n % cfg.refit_every == 0;
        let mut prior = SeKernelParams::default_for(domain.dim());
        prior.noise_variance = cfg.noise_variance;
        let mut models = Vec::with_capacity(problem.num_objectives());
        for i in 0..problem.num_objectives() {
            let opts = RefitOptions {
                seed: derive_seed(cfg.seed, &[2, n as u64, i as u64]),
                ..cfg.refit.clone()
            };
            let model = update_model(
                self.models.get(i),
                &inputs,
                &self.search.objective_column(i),
                prior.clone(),
                refit.then_some(&opts),
                &mut self.refits,
            )?;
            models.push(model);
        }
        self.models = models;
        Ok(())
    }

    /// One outer iteration. Returns the record of the new evaluation.
    pub fn step(&mut self, cfg: &UsemoConfig, problem: &dyn Problem) -> Result<RunRecord> {
        let t = self.search.iteration + 1;
        let d = problem.domain().dim();
        let unit = BoxDomain::unit(d);

        let start = Instant::now();
        let acqs = self
            .models
            .iter()
            .enumerate()
            .map(|(i, m)| BoundAcquisition::new(&cfg.acquisition, m, t, derive_seed(cfg.seed, &[3, t as u64, i as u64])))
            .collect::<Result<Vec<_>>>()?;
        let mut cheap = |x: &[f64]| acqs.iter().map(|a| a.value(x)).collect::<Vec<f64>>();
        let nsga = Nsga2Config {
            seed: derive_seed(cfg.seed, &[4, t as u64]),
            ..cfg.nsga2.clone()
        };
        let front = solve_vector(&mut cheap, &unit, &nsga)?;
        let candidates: Vec<Vec<f64>> = front.into_iter().map(|ind| ind.point).collect();
        let beta = cfg.acquisition.beta.beta(t);
        let chosen = select_next(&candidates, &self.models, beta, cfg.selection_policy, &mut self.search.rng)?;
        let acq_time_s = start.elapsed().as_secs_f64();

        let x = problem.domain().from_unit(&candidates[chosen]);
        self.last_candidates = candidates.iter().map(|u| InputPoint(problem.domain().from_unit(u))).collect();
        self.search.iteration = t;
        let e = self.search.evaluate(problem, &x)?.clone();
        self.update_models(cfg, problem, false)?;
        Ok(RunRecord::new(&e, acq_time_s, candidates.len()))
    }
}

/// Initial design followed by `cfg.max_iterations` outer iterations.
pub fn run(cfg: &UsemoConfig, problem: &dyn Problem) -> Result<RunOutcome> {
    let mut state = UsemoState::initialize(cfg, problem)?;
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
