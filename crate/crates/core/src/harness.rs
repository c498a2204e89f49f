//! Experiment harness: configuration, repeated runs with per-run CSV logs,
//! cross-run summaries, manifests for exact re-execution, timing reports,
//! long-format plot data and ideal-front cache maintenance.

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acquisition::{AcquisitionKind, AcquisitionSpec, BetaSchedule};
use crate::baselines::{random_search_step, BaselineConfig, ParegoState};
use crate::benchmarks::{
    self, analytic_front, benchmark_names, format_front_csv, front_cache_path, generate_front, ideal_front_of,
    load_tabular, make_benchmark, read_front_csv, read_front_manifest, write_front_cache, BenchmarkProblem,
    FrontManifest, FrontSource, Problem,
};
use crate::design::sobol_design;
use crate::error::{Error, Result};
use crate::gp::RefitOptions;
use crate::metrics::{hypervolume, r2_distance, regret_curve, IdealFront, PhvTracker, ReferencePoint};
use crate::moo::Nsga2Config;
use crate::pareto::{Evaluation, ObjectiveVector};
use crate::usemo::{default_initial_points, RunRecord, SearchState, SelectionPolicy, UsemoConfig, UsemoState};

/// Environment variable overriding the root of relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "USEMO_OUTPUT_ROOT";
/// Sobol probe size used to bound the objective ranges for the reference point.
pub const REFERENCE_PROBES: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "usemo-ei")]
    UsemoEi,
    #[serde(rename = "usemo-ts")]
    UsemoTs,
    #[serde(rename = "usemo-lcb")]
    UsemoLcb,
    #[serde(rename = "usemo-ucb")]
    UsemoUcb,
    #[serde(rename = "parego")]
    Parego,
    #[serde(rename = "random-search")]
    RandomSearch,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::UsemoEi,
        Method::UsemoTs,
        Method::UsemoLcb,
        Method::UsemoUcb,
        Method::Parego,
        Method::RandomSearch,
    ];

    pub fn acquisition(self) -> Option<AcquisitionKind> {
        match self {
            Method::UsemoEi => Some(AcquisitionKind::Ei),
            Method::UsemoTs => Some(AcquisitionKind::Ts),
            Method::UsemoLcb => Some(AcquisitionKind::Lcb),
            Method::UsemoUcb => Some(AcquisitionKind::Ucb),
            Method::Parego | Method::RandomSearch => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Method::UsemoEi => "usemo-ei",
            Method::UsemoTs => "usemo-ts",
            Method::UsemoLcb => "usemo-lcb",
            Method::UsemoUcb => "usemo-ucb",
            Method::Parego => "parego",
            Method::RandomSearch => "random-search",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.to_string() == s).ok_or_else(|| {
            let names: Vec<String> = Method::ALL.iter().map(Method::to_string).collect();
            Error::config("method", format!("unknown method `{s}`; expected one of {}", names.join(", ")))
        })
    }
}

/// Everything needed to reproduce a set of runs. Unset optional fields are
/// resolved before execution and written back into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Registered benchmark name or path to a tabular CSV dataset.
    pub benchmark: String,
    pub method: Method,
    pub selection_policy: SelectionPolicy,
    pub iterations: usize,
    pub repetitions: usize,
    /// Base seed; repetition `r` uses `seed + r` unless `seeds` is given.
    pub seed: u64,
    pub seeds: Option<Vec<u64>>,
    pub output: Option<PathBuf>,
    pub initial_points: Option<usize>,
    pub refit_every: usize,
    pub nsga2_population: usize,
    pub nsga2_budget: usize,
    pub cardinality_proxy: f64,
    pub delta: f64,
    pub ts_features: usize,
    pub noise_variance: f64,
    pub refit_starts: usize,
    pub refit_max_iters: usize,
    pub ard: bool,
    pub rho: f64,
    pub reference_point: Option<Vec<f64>>,
    pub reference_margin: f64,
    pub front_dir: Option<PathBuf>,
    pub workers: usize,
    /// Write wall-clock acquisition times into the CSVs (makes them
    /// non-reproducible byte-for-byte).
    pub record_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let usemo = UsemoConfig::new(AcquisitionKind::Ei, 1, 100, 0);
        Self {
            benchmark: "BC-2,2".into(),
            method: Method::UsemoEi,
            selection_policy: SelectionPolicy::UncertaintyMax,
            iterations: 100,
            repetitions: 10,
            seed: 0,
            seeds: None,
            output: None,
            initial_points: None,
            refit_every: usemo.refit_every,
            nsga2_population: usemo.nsga2.population_size,
            nsga2_budget: usemo.nsga2.evaluation_budget,
            cardinality_proxy: usemo.acquisition.beta.cardinality_proxy,
            delta: usemo.acquisition.beta.delta,
            ts_features: usemo.acquisition.ts_features,
            noise_variance: usemo.noise_variance,
            refit_starts: usemo.refit.starts,
            refit_max_iters: usemo.refit.max_iters,
            ard: usemo.refit.ard,
            rho: crate::baselines::DEFAULT_RHO,
            reference_point: None,
            reference_margin: 0.1,
            front_dir: None,
            workers: 1,
            record_timing: false,
        }
    }
}

impl ExperimentConfig {
    pub fn new(benchmark: &str, method: Method, iterations: usize, repetitions: usize, seed: u64) -> Self {
        Self {
            benchmark: benchmark.to_string(),
            method,
            iterations,
            repetitions,
            seed,
            ..Self::default()
        }
    }

    /// Parses a TOML file of top-level `key = value` pairs.
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config { field, reason } => Error::config(format!("{}: {field}", path.display()), reason),
            other => other,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e.message().split('`').nth(1).unwrap_or("config").to_string();
            Error::config(field, e.message().to_string())
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::config("repetitions", "must be at least 1"));
        }
        if let Some(seeds) = &self.seeds {
            if seeds.len() != self.repetitions {
                return Err(Error::config(
                    "seeds",
                    format!("{} seeds listed for {} repetitions", seeds.len(), self.repetitions),
                ));
            }
        }
        if matches!(self.initial_points, Some(n) if n < 2) {
            return Err(Error::config("initial_points", "must be at least 2"));
        }
        if self.refit_every == 0 {
            return Err(Error::config("refit_every", "must be at least 1"));
        }
        if self.ts_features == 0 {
            return Err(Error::config("ts_features", "must be at least 1"));
        }
        if self.refit_starts == 0 {
            return Err(Error::config("refit_starts", "must be at least 1"));
        }
        if !(self.noise_variance > 0.0) {
            return Err(Error::config("noise_variance", "must be positive"));
        }
        if !(self.rho > 0.0) {
            return Err(Error::config("rho", "must be positive"));
        }
        if !(self.reference_margin >= 0.0) {
            return Err(Error::config("reference_margin", "must be non-negative"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        BetaSchedule::new(self.cardinality_proxy, self.delta)
            .map_err(|e| Error::config("cardinality_proxy/delta", e.to_string()))?;
        Nsga2Config::with_budget(self.nsga2_population, self.nsga2_budget, 0)
            .validate()
            .map_err(|e| Error::config("nsga2_population/nsga2_budget", e.to_string()))
    }

    pub fn seed_list(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.repetitions as u64).map(|r| self.seed + r).collect(),
        }
    }

    pub fn front_dir(&self) -> PathBuf {
        self.front_dir.clone().unwrap_or_else(benchmarks::default_front_dir)
    }

    /// Output directory, relative paths resolved against `USEMO_OUTPUT_ROOT`
    /// (default `runs`).
    pub fn output_dir(&self) -> PathBuf {
        let rel = self.output.clone().unwrap_or_else(|| {
            let stem = Path::new(&self.benchmark)
                .file_stem()
                .map(|s| s.to_string_lossy().replace(',', "_"))
                .unwrap_or_else(|| "benchmark".into());
            let mut leaf = self.method.to_string();
            if self.selection_policy == SelectionPolicy::Random {
                leaf.push_str("-random-selection");
            }
            Path::new(&stem).join(leaf)
        });
        resolve_output(&rel)
    }

    /// Main-loop configuration for repetition seed `seed` on a `d`-dimensional problem.
    pub fn usemo_config(&self, d: usize, seed: u64) -> UsemoConfig {
        let kind = self.method.acquisition().unwrap_or(AcquisitionKind::Ei);
        UsemoConfig {
            acquisition: AcquisitionSpec {
                kind,
                beta: BetaSchedule {
                    cardinality_proxy: self.cardinality_proxy,
                    delta: self.delta,
                },
                ts_features: self.ts_features,
            },
            nsga2: Nsga2Config::with_budget(self.nsga2_population, self.nsga2_budget, 0),
            max_iterations: self.iterations,
            initial_points: self.initial_points.unwrap_or_else(|| default_initial_points(d)),
            refit_every: self.refit_every,
            selection_policy: self.selection_policy,
            seed,
            refit: RefitOptions {
                starts: self.refit_starts,
                max_iters: self.refit_max_iters,
                ard: self.ard,
                seed: 0,
            },
            noise_variance: self.noise_variance,
        }
    }
}

pub fn resolve_output(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    let root = std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"));
    root.join(path)
}

/// A problem resolved from a benchmark identifier.
pub enum LoadedProblem {
    Benchmark(BenchmarkProblem),
    Tabular(benchmarks::TabularProblem),
}

impl LoadedProblem {
    pub fn load(benchmark: &str) -> Result<Self> {
        if let Ok(p) = make_benchmark(benchmark) {
            return Ok(LoadedProblem::Benchmark(p));
        }
        let path = Path::new(benchmark);
        if path.extension().is_some_and(|e| e == "csv") && path.exists() {
            return Ok(LoadedProblem::Tabular(load_tabular(path)?));
        }
        make_benchmark(benchmark).map(LoadedProblem::Benchmark)
    }

    pub fn problem(&self) -> &dyn Problem {
        match self {
            LoadedProblem::Benchmark(p) => p,
            LoadedProblem::Tabular(p) => p,
        }
    }

    pub fn ideal_front(&self, front_dir: &Path) -> Result<IdealFront> {
        match self {
            LoadedProblem::Benchmark(p) => ideal_front_of(p, front_dir, false),
            LoadedProblem::Tabular(t) => Ok(t.ideal_front()),
        }
    }

    /// Bytes identifying the ideal front's source, for checksums.
    fn front_bytes(&self, front_dir: &Path, ideal: &IdealFront) -> Result<Vec<u8>> {
        match self {
            LoadedProblem::Benchmark(p) if p.front_source() == FrontSource::Cached => {
                let path = front_cache_path(front_dir, p.name());
                fs::read(&path).map_err(|e| Error::io(&path, e))
            }
            LoadedProblem::Benchmark(p) => Ok(format_front_csv(ideal.points(), p.k()).into_bytes()),
            LoadedProblem::Tabular(t) => {
                let mut s = String::new();
                for (x, y) in t.rows() {
                    let _ = writeln!(s, "{:?},{:?}", &x[..], &y[..]);
                }
                Ok(s.into_bytes())
            }
        }
    }

    /// A known Pareto-optimal objective vector, when the problem has one.
    pub fn x_star_values(&self) -> Option<Vec<f64>> {
        self.problem().known_optima().first().map(|(_, y)| y.to_vec())
    }

    /// Objective values of a fixed Sobol probe of the domain (all rows for
    /// tabular problems).
    pub fn probe_objectives(&self) -> Result<Vec<ObjectiveVector>> {
        match self {
            LoadedProblem::Tabular(t) => Ok(t.rows().iter().map(|(_, y)| y.clone()).collect()),
            LoadedProblem::Benchmark(p) => sobol_design(p.domain(), REFERENCE_PROBES, 0)?
                .iter()
                .map(|x| benchmarks::evaluate_checked(p, x))
                .collect(),
        }
    }
}

/// Reference point enclosing the ideal front and a fixed probe of the
/// objective space, so it is identical for every method on a problem.
pub fn default_reference_point(problem: &LoadedProblem, ideal: &IdealFront, margin: f64) -> Result<ReferencePoint> {
    let probes = problem.probe_objectives()?;
    ReferencePoint::enclosing(ideal.points().iter().chain(&probes).map(|p| &p[..]), margin)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub toolkit_version: String,
    pub config: ExperimentConfig,
    pub objectives: usize,
    pub dimensions: usize,
    pub reference_point: Vec<f64>,
    pub ideal_front_points: usize,
    pub ideal_front_sha256: String,
    pub ideal_front_hypervolume: f64,
}

/// A resolved experiment ready to execute.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub problem: LoadedProblem,
    pub ideal: IdealFront,
    pub reference: ReferencePoint,
    pub front_sha256: String,
    pub x_star: Option<Vec<f64>>,
}

impl Experiment {
    /// Validates `config`, loads the problem and its ideal front, and fills
    /// in every unset parameter.
    pub fn prepare(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let problem = LoadedProblem::load(&config.benchmark)?;
        let p = problem.problem();
        let front_dir = config.front_dir();
        let ideal = problem.ideal_front(&front_dir)?;
        let reference = match &config.reference_point {
            Some(r) => {
                if r.len() != p.num_objectives() {
                    return Err(Error::config(
                        "reference_point",
                        format!("expected {} coordinates, got {}", p.num_objectives(), r.len()),
                    ));
                }
                ReferencePoint(r.clone())
            }
            None => default_reference_point(&problem, &ideal, config.reference_margin)?,
        };
        let front_sha256 = sha256_hex(&problem.front_bytes(&front_dir, &ideal)?);
        let mut resolved = config.clone();
        resolved.seeds = Some(config.seed_list());
        resolved.initial_points = Some(config.initial_points.unwrap_or_else(|| default_initial_points(p.domain().dim())));
        resolved.reference_point = Some(reference.0.clone());
        let x_star = problem.x_star_values();
        Ok(Self {
            config: resolved,
            problem,
            ideal,
            reference,
            front_sha256,
            x_star,
        })
    }

    pub fn manifest(&self) -> Result<Manifest> {
        let p = self.problem.problem();
        Ok(Manifest {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.config.clone(),
            objectives: p.num_objectives(),
            dimensions: p.domain().dim(),
            reference_point: self.reference.0.clone(),
            ideal_front_points: self.ideal.len(),
            ideal_front_sha256: self.front_sha256.clone(),
            ideal_front_hypervolume: self.tracker()?.ideal_hypervolume(),
        })
    }

    fn tracker(&self) -> Result<PhvTracker> {
        let k = self.reference.0.len();
        let mut lower = vec![f64::INFINITY; k];
        for p in self.ideal.points() {
            for (l, v) in lower.iter_mut().zip(p.iter()) {
                *l = l.min(*v);
            }
        }
        let ideal = IdealFront::filtered(inside(self.ideal.points(), &self.reference));
        PhvTracker::new(&ideal, &self.reference, &lower)
    }

    /// Runs one repetition. On failure the records gathered so far are
    /// returned together with the error.
    pub fn run_repetition(&self, seed: u64) -> RepetitionResult {
        let p = self.problem.problem();
        let ucfg = self.config.usemo_config(p.domain().dim(), seed);
        let mut bcfg = BaselineConfig::from(&ucfg);
        bcfg.rho = self.config.rho;

        let mut initial = Vec::new();
        let mut records = Vec::new();
        let result: Result<()> = (|| {
            match self.config.method {
                Method::Parego => {
                    let mut s = ParegoState::initialize(&bcfg, p)?;
                    initial = s.search.data.clone();
                    for _ in 0..self.config.iterations {
                        records.push(s.step(&bcfg, p)?);
                    }
                }
                Method::RandomSearch => {
                    bcfg.validate()?;
                    let mut s = SearchState::initialize(p, bcfg.initial_points, seed)?;
                    initial = s.data.clone();
                    for _ in 0..self.config.iterations {
                        records.push(random_search_step(&mut s, p)?);
                    }
                }
                _ => {
                    let mut s = UsemoState::initialize(&ucfg, p)?;
                    initial = s.search.data.clone();
                    for _ in 0..self.config.iterations {
                        records.push(s.step(&ucfg, p)?);
                    }
                }
            }
            Ok(())
        })();
        let error = result.err();
        if let Err(e) = self.annotate(&initial, &mut records) {
            return RepetitionResult {
                seed,
                initial,
                records,
                error: Some(error.unwrap_or(e)),
            };
        }
        RepetitionResult {
            seed,
            initial,
            records,
            error,
        }
    }

    /// Fills the metric fields of `records` given the initial design.
    pub fn annotate(&self, initial: &[Evaluation], records: &mut [RunRecord]) -> Result<()> {
        let mut tracker = self.tracker()?;
        let mut archive = crate::pareto::ParetoArchive::from_evaluations(initial)?;
        let mut pending: Vec<ObjectiveVector> = inside(&archive.front(), &self.reference);
        let trace: Vec<Evaluation> = records
            .iter()
            .map(|r| Evaluation {
                input: r.input.clone(),
                output: r.objectives.clone(),
                iteration: r.iteration,
            })
            .collect();
        let regrets = match &self.x_star {
            Some(star) => Some(regret_curve(&trace, star)?),
            None => None,
        };
        for (i, (rec, e)) in records.iter_mut().zip(trace).enumerate() {
            if archive.insert(e.clone())? && inside(std::slice::from_ref(&e.output), &self.reference).len() == 1 {
                pending.push(e.output.clone());
            }
            let front = inside(&archive.front(), &self.reference);
            rec.phv_difference = Some(tracker.update(&front, &pending)?);
            pending.clear();
            rec.r2_distance = Some(r2_distance(&archive.front(), &self.ideal)?);
            rec.regret = regrets.as_ref().map(|r| r[i]);
        }
        Ok(())
    }
}

/// Points strictly inside the reference box; others add no hypervolume.
fn inside(points: &[ObjectiveVector], reference: &ReferencePoint) -> Vec<ObjectiveVector> {
    points
        .iter()
        .filter(|p| p.iter().zip(&reference.0).all(|(a, r)| a <= r))
        .cloned()
        .collect()
}

#[derive(Debug)]
pub struct RepetitionResult {
    pub seed: u64,
    pub initial: Vec<Evaluation>,
    pub records: Vec<RunRecord>,
    pub error: Option<Error>,
}

fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Per-run CSV: `t,x1..xd,f1..fk,phv_diff,log10_phv_diff,r2,regret,acq_time_s`.
pub fn format_run_csv(records: &[RunRecord], d: usize, k: usize, record_timing: bool) -> String {
    let mut out = String::from("t");
    for j in 1..=d {
        let _ = write!(out, ",x{j}");
    }
    for i in 1..=k {
        let _ = write!(out, ",f{i}");
    }
    out.push_str(",phv_diff,log10_phv_diff,r2,regret,acq_time_s\n");
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in records {
        let _ = write!(out, "{}", r.iteration);
        for v in r.input.iter().chain(r.objectives.iter()) {
            let _ = write!(out, ",{}", fmt_f64(*v));
        }
        let _ = write!(
            out,
            ",{},{},{},{},{}",
            opt(r.phv_difference),
            opt(r.phv_difference.map(f64::log10)),
            opt(r.r2_distance),
            opt(r.regret),
            if record_timing { fmt_f64(r.acq_time_s) } else { String::new() }
        );
        out.push('\n');
    }
    out
}

/// Initial-design CSV: `x1..xd,f1..fk`.
pub fn format_initial_csv(initial: &[Evaluation], d: usize, k: usize) -> String {
    let cols: Vec<String> = (1..=d).map(|j| format!("x{j}")).chain((1..=k).map(|i| format!("f{i}"))).collect();
    let mut out = cols.join(",") + "\n";
    for e in initial {
        let row: Vec<String> = e.input.iter().chain(e.output.iter()).map(|v| fmt_f64(*v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Per-iteration statistics across repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub benchmark: String,
    pub method: String,
    pub selection_policy: SelectionPolicy,
    pub repetitions: usize,
    pub iterations: usize,
    pub initial_points: usize,
    pub t: Vec<usize>,
    pub metrics: BTreeMap<String, SeriesStats>,
}

/// Mean and sample standard deviation (zero for a single value), skipping
/// non-finite entries.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize(config: &ExperimentConfig, runs: &[Vec<RunRecord>]) -> Summary {
    let iterations = runs.iter().map(Vec::len).min().unwrap_or(0);
    let mut metrics = BTreeMap::new();
    let mut series = |name: &str, get: &dyn Fn(&RunRecord) -> Option<f64>| {
        if runs.iter().flatten().all(|r| get(r).is_none()) {
            return;
        }
        let mut stats = SeriesStats {
            mean: Vec::with_capacity(iterations),
            std: Vec::with_capacity(iterations),
        };
        for t in 0..iterations {
            let vals: Vec<f64> = runs.iter().filter_map(|r| get(&r[t])).collect();
            let (m, s) = mean_std(&vals);
            stats.mean.push(m);
            stats.std.push(s);
        }
        metrics.insert(name.to_string(), stats);
    };
    series("phv_diff", &|r| r.phv_difference);
    series("log10_phv_diff", &|r| r.phv_difference.map(f64::log10));
    series("r2", &|r| r.r2_distance);
    series("regret", &|r| r.regret);
    if config.record_timing {
        series("acq_time_s", &|r| Some(r.acq_time_s));
    }
    Summary {
        benchmark: config.benchmark.clone(),
        method: config.method.to_string(),
        selection_policy: config.selection_policy,
        repetitions: runs.len(),
        iterations,
        initial_points: config.initial_points.unwrap_or(0),
        t: (1..=iterations).collect(),
        metrics,
    }
}

/// Outcome of [`execute`].
#[derive(Debug)]
pub struct ExecutionReport {
    pub output_dir: PathBuf,
    pub summary: Summary,
    pub repetitions: Vec<RepetitionResult>,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Runs every repetition (in parallel up to `workers`) and writes
/// `run_XX.csv`, `initial_XX.csv`, `summary.json` and `manifest.json` into
/// the output directory. Logs of failed repetitions are still written; the
/// first failure is returned after all output is flushed.
pub fn execute(config: &ExperimentConfig) -> Result<ExecutionReport> {
    let exp = Experiment::prepare(config)?;
    execute_prepared(&exp, &config.output_dir())
}

pub fn execute_prepared(exp: &Experiment, out_dir: &Path) -> Result<ExecutionReport> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let manifest = exp.manifest()?;
    write_file(
        &out_dir.join("manifest.json"),
        (serde_json::to_string_pretty(&manifest)? + "\n").as_bytes(),
    )?;

    let seeds = exp.config.seed_list();
    let p = exp.problem.problem();
    let (d, k) = (p.domain().dim(), p.num_objectives());
    let write_lock = Mutex::new(());
    let write_rep = |rep: usize, r: &RepetitionResult| -> Result<()> {
        let _guard = write_lock.lock().unwrap_or_else(|e| e.into_inner());
        write_file(
            &out_dir.join(format!("run_{rep:02}.csv")),
            format_run_csv(&r.records, d, k, exp.config.record_timing).as_bytes(),
        )?;
        write_file(
            &out_dir.join(format!("initial_{rep:02}.csv")),
            format_initial_csv(&r.initial, d, k).as_bytes(),
        )
    };
    let results = parallel_map(seeds.len(), exp.config.workers, |rep| {
        let r = exp.run_repetition(seeds[rep]);
        log::info!(
            "{} {} repetition {rep} (seed {}): {} iterations, final phv_diff {:?}",
            exp.config.benchmark,
            exp.config.method,
            seeds[rep],
            r.records.len(),
            r.records.last().and_then(|x| x.phv_difference)
        );
        let w = write_rep(rep, &r);
        (r, w)
    });

    let mut reps = Vec::with_capacity(results.len());
    let mut first_error = None;
    for (r, w) in results {
        if let Err(e) = w {
            first_error.get_or_insert(e);
        }
        reps.push(r);
    }
    let runs: Vec<Vec<RunRecord>> = reps.iter().map(|r| r.records.clone()).collect();
    let summary = summarize(&exp.config, &runs);
    write_file(
        &out_dir.join("summary.json"),
        (serde_json::to_string_pretty(&summary)? + "\n").as_bytes(),
    )?;
    for (rep, r) in reps.iter_mut().enumerate() {
        if let Some(e) = r.error.take() {
            first_error.get_or_insert(Error::Contract(format!("repetition {rep} (seed {}) failed: {e}", r.seed)));
        }
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(ExecutionReport {
            output_dir: out_dir.to_path_buf(),
            summary,
            repetitions: reps,
        }),
    }
}

/// Maps `f` over `0..n` on up to `workers` scoped threads, preserving order.
pub fn parallel_map<T: Send>(n: usize, workers: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    if workers <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers.min(n) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let v = f(i);
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(v);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().unwrap_or_else(|e| e.into_inner()).expect("every index visited"))
        .collect()
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Re-executes the runs described by a manifest into `out_dir`, refusing
/// if the ideal front no longer matches the recorded checksum.
pub fn execute_manifest(manifest_path: &Path, out_dir: &Path) -> Result<ExecutionReport> {
    let manifest = read_manifest(manifest_path)?;
    let mut config = manifest.config.clone();
    config.output = Some(out_dir.to_path_buf());
    let exp = Experiment::prepare(&config)?;
    if exp.front_sha256 != manifest.ideal_front_sha256 {
        return Err(Error::Contract(format!(
            "ideal front of {} changed since {} was written (sha256 {} != {})",
            manifest.config.benchmark,
            manifest_path.display(),
            exp.front_sha256,
            manifest.ideal_front_sha256
        )));
    }
    execute_prepared(&exp, out_dir)
}

// ---------------------------------------------------------------------------
// timing

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub benchmark: String,
    pub method: Method,
    pub mean_s: f64,
    pub std_s: f64,
    /// Median over repetitions of each repetition's mean.
    pub median_of_means_s: f64,
    pub samples: usize,
}

impl fmt::Display for TimingRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<12} {:<14} {:.4} ± {:.4} s",
            self.benchmark, self.method, self.mean_s, self.std_s
        )
    }
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Per-iteration cheap-solve plus selection time (GP fitting excluded)
/// for one benchmark and method. Repetitions run sequentially so the
/// measurements do not compete for cores.
pub fn timing(config: &ExperimentConfig) -> Result<TimingRow> {
    let exp = Experiment::prepare(config)?;
    let mut all = Vec::new();
    let mut per_rep = Vec::new();
    for seed in config.seed_list() {
        let r = exp.run_repetition(seed);
        if let Some(e) = r.error {
            return Err(e);
        }
        let times: Vec<f64> = r.records.iter().map(|x| x.acq_time_s).collect();
        per_rep.push(mean_std(&times).0);
        all.extend(times);
    }
    let (mean_s, std_s) = mean_std(&all);
    Ok(TimingRow {
        benchmark: config.benchmark.clone(),
        method: config.method,
        mean_s,
        std_s,
        median_of_means_s: median(&mut per_rep),
        samples: all.len(),
    })
}

// ---------------------------------------------------------------------------
// plot data

/// One row of the merged long-format plot data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub method: String,
    pub benchmark: String,
    pub t: usize,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

/// Externally produced convergence curve (`iteration,phv_diff,r2`).
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalCurve {
    pub method: String,
    pub benchmark: String,
    pub path: PathBuf,
}

impl FromStr for ExternalCurve {
    type Err = Error;

    /// `METHOD@BENCHMARK=PATH`
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("external", format!("expected METHOD@BENCHMARK=PATH, got `{s}`"));
        let (label, path) = s.split_once('=').ok_or_else(bad)?;
        let (method, benchmark) = label.split_once('@').ok_or_else(bad)?;
        if method.is_empty() || benchmark.is_empty() || path.is_empty() {
            return Err(bad());
        }
        Ok(Self {
            method: method.to_string(),
            benchmark: benchmark.to_string(),
            path: PathBuf::from(path),
        })
    }
}

#[derive(Debug, Deserialize)]
struct ExternalRow {
    iteration: usize,
    phv_diff: f64,
    r2: f64,
}

pub fn read_summary(dir: &Path) -> Result<Summary> {
    let path = dir.join("summary.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let summary: Summary = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.clone(),
        line: e.line(),
        reason: format!("incompatible summary: {e}"),
    })?;
    for (name, s) in &summary.metrics {
        if s.mean.len() != summary.t.len() || s.std.len() != summary.t.len() {
            return Err(Error::Parse {
                path,
                line: 0,
                reason: format!("metric `{name}` length does not match t"),
            });
        }
    }
    Ok(summary)
}

/// Merges run-directory summaries and external curves into long format.
pub fn collect_plot_rows(dirs: &[PathBuf], externals: &[ExternalCurve]) -> Result<Vec<PlotRow>> {
    let mut rows = Vec::new();
    for dir in dirs {
        let s = read_summary(dir)?;
        let mut method = s.method.clone();
        if s.selection_policy == SelectionPolicy::Random {
            method.push_str("+random-selection");
        }
        for (metric, stats) in &s.metrics {
            for (i, t) in s.t.iter().enumerate() {
                rows.push(PlotRow {
                    method: method.clone(),
                    benchmark: s.benchmark.clone(),
                    t: *t,
                    metric: metric.clone(),
                    mean: stats.mean[i],
                    std: stats.std[i],
                });
            }
        }
    }
    for ext in externals {
        let mut reader = csv::Reader::from_path(&ext.path).map_err(|e| Error::Parse {
            path: ext.path.clone(),
            line: 0,
            reason: e.to_string(),
        })?;
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["iteration", "phv_diff", "r2"] {
            return Err(Error::Parse {
                path: ext.path.clone(),
                line: 1,
                reason: "expected header `iteration,phv_diff,r2`".into(),
            });
        }
        for (i, row) in reader.deserialize::<ExternalRow>().enumerate() {
            let row = row.map_err(|e| Error::Parse {
                path: ext.path.clone(),
                line: i + 2,
                reason: e.to_string(),
            })?;
            for (metric, v) in [("phv_diff", row.phv_diff), ("log10_phv_diff", row.phv_diff.log10()), ("r2", row.r2)] {
                rows.push(PlotRow {
                    method: ext.method.clone(),
                    benchmark: ext.benchmark.clone(),
                    t: row.iteration,
                    metric: metric.to_string(),
                    mean: v,
                    std: 0.0,
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_plot_csv(rows: &[PlotRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Contract(format!("{other:?}")),
    })?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Line chart of `mean` against `t`, one polyline per method.
pub fn render_svg(rows: &[PlotRow], benchmark: &str, metric: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    const COLORS: [&str; 8] = [
        "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    ];
    let mut series: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.benchmark == benchmark && r.metric == metric && r.mean.is_finite()) {
        series.entry(&r.method).or_default().push((r.t as f64, r.mean));
    }
    let pts = series.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in pts {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    let _ = writeln!(svg, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\">{benchmark}: {metric}</text>",
        W / 2.0
    );
    let _ = writeln!(
        svg,
        "<path d=\"M{M} {M} V{} H{}\" stroke=\"black\" fill=\"none\"/>",
        H - M,
        W - M
    );
    let _ = writeln!(svg, "<text x=\"{M}\" y=\"{}\">{x0}</text>", H - M + 15.0);
    let _ = writeln!(svg, "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{x1}</text>", W - M, H - M + 15.0);
    let _ = writeln!(svg, "<text x=\"5\" y=\"{}\">{y0:.3e}</text>", H - M);
    let _ = writeln!(svg, "<text x=\"5\" y=\"{}\">{y1:.3e}</text>", M);
    for (i, (method, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let d: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" stroke=\"{color}\" fill=\"none\" stroke-width=\"1.5\"/>",
            d.join(" ")
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\" text-anchor=\"end\">{method}</text>",
            W - M,
            M + 15.0 * (i as f64 + 1.0)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `plot_data.csv` and, when `svg` is set, one chart per
/// (benchmark, metric). Returns the paths written.
pub fn plotdata(dirs: &[PathBuf], externals: &[ExternalCurve], out_dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    let rows = collect_plot_rows(dirs, externals)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let csv_path = out_dir.join("plot_data.csv");
    write_plot_csv(&rows, &csv_path)?;
    let mut written = vec![csv_path];
    if svg {
        let mut pairs: Vec<(String, String)> = rows.iter().map(|r| (r.benchmark.clone(), r.metric.clone())).collect();
        pairs.sort();
        pairs.dedup();
        for (b, m) in pairs {
            let path = out_dir.join(format!("plot_{}_{m}.svg", b.replace([',', '/', '\\'], "_")));
            write_file(&path, render_svg(&rows, &b, &m).as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// ideal fronts

#[derive(Debug, Clone, PartialEq)]
pub struct FrontReport {
    pub benchmark: String,
    pub points: usize,
    pub hypervolume: f64,
    pub reference: ReferencePoint,
    /// Distance of the regenerated front to the analytic one, when known.
    pub r2_to_analytic: Option<f64>,
    pub path: Option<PathBuf>,
}

impl fmt::Display for FrontReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} points, hypervolume {:.6} w.r.t. {:?}",
            self.benchmark, self.points, self.hypervolume, self.reference.0
        )?;
        if let Some(r2) = self.r2_to_analytic {
            write!(f, ", R2 distance to analytic front {r2:.5}")?;
        }
        if let Some(p) = &self.path {
            write!(f, " [{}]", p.display())?;
        }
        Ok(())
    }
}

/// Regenerates a benchmark's front with the standard NSGA-II settings.
/// Cached-front benchmarks are written to `dir` and read back for
/// verification; analytic ones are compared against the analytic front.
pub fn regenerate_front(name: &str, dir: &Path) -> Result<FrontReport> {
    let problem = make_benchmark(name)?;
    let manifest = FrontManifest::standard(name);
    let front = generate_front(&problem, &manifest)?;
    let loaded = LoadedProblem::Benchmark(problem.clone());
    let (ideal, r2, path) = match analytic_front(&problem) {
        Some(analytic) => {
            let r2 = r2_distance(&front, &analytic)?;
            (analytic, Some(r2), None)
        }
        None => {
            write_front_cache(dir, &manifest, &front, problem.k())?;
            let path = front_cache_path(dir, name);
            (read_front_csv(&path, problem.k())?, None, Some(path))
        }
    };
    let reference = default_reference_point(&loaded, &ideal, 0.1)?;
    Ok(FrontReport {
        benchmark: name.to_string(),
        points: ideal.len(),
        hypervolume: hypervolume(ideal.points(), &reference)?,
        reference,
        r2_to_analytic: r2,
        path,
    })
}

/// Checks a shipped cache: mutual non-dominance, and that regenerating
/// with the recorded settings reproduces the file byte-for-byte.
pub fn verify_front_cache(name: &str, dir: &Path) -> Result<FrontReport> {
    let problem = make_benchmark(name)?;
    if problem.front_source() == FrontSource::Analytic {
        return regenerate_front(name, dir);
    }
    let path = front_cache_path(dir, name);
    if !path.exists() {
        return Err(Error::MissingFrontCache {
            benchmark: name.to_string(),
            path,
        });
    }
    let ideal = read_front_csv(&path, problem.k())?;
    let manifest = read_front_manifest(dir, name)?;
    let regenerated = format_front_csv(&generate_front(&problem, &manifest)?, problem.k());
    let shipped = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    if regenerated != shipped {
        return Err(Error::Contract(format!(
            "{} does not match a regeneration with its manifest settings",
            path.display()
        )));
    }
    let loaded = LoadedProblem::Benchmark(problem);
    let reference = default_reference_point(&loaded, &ideal, 0.1)?;
    Ok(FrontReport {
        benchmark: name.to_string(),
        points: ideal.len(),
        hypervolume: hypervolume(ideal.points(), &reference)?,
        reference,
        r2_to_analytic: None,
        path: Some(path),
    })
}

/// One line per registered benchmark: name, k, d, front source.
pub fn benchmark_listing() -> Vec<String> {
    benchmark_names()
        .into_iter()
        .filter_map(|n| make_benchmark(n).ok())
        .map(|p| {
            let source = match p.front_source() {
                FrontSource::Analytic => "analytic",
                FrontSource::Cached => "cached",
            };
            format!("{:<12} k={} d={} front={source:<8} {}", p.name(), p.k(), p.d(), p.description())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{m}\""));
        }
        assert!("usemo".parse::<Method>().is_err());
    }

    #[test]
    fn toml_config_and_validation() {
        let cfg = ExperimentConfig::from_toml_str(
            "benchmark = \"ZDT1\"\nmethod = \"parego\"\niterations = 5\nrepetitions = 2\nseeds = [3, 9]\n",
        )
        .unwrap();
        assert_eq!(cfg.method, Method::Parego);
        assert_eq!(cfg.seed_list(), vec![3, 9]);
        assert_eq!(cfg.nsga2_budget, 1500);

        let err = ExperimentConfig::from_toml_str("iterashuns = 5\n").unwrap_err();
        assert!(err.to_string().contains("iterashuns"), "{err}");

        let mut bad = cfg.clone();
        bad.repetitions = 3;
        assert!(bad.validate().unwrap_err().to_string().contains("seeds"));
        let mut bad = cfg;
        bad.nsga2_population = 7;
        assert!(bad.validate().unwrap_err().to_string().contains("nsga2_population"));
    }

    #[test]
    fn default_seeds_are_consecutive() {
        let cfg = ExperimentConfig::new("BC-2,2", Method::UsemoEi, 1, 3, 10);
        assert_eq!(cfg.seed_list(), vec![10, 11, 12]);
    }

    #[test]
    fn mean_std_examples() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 2f64.sqrt()));
        assert_eq!(mean_std(&[4.0]), (4.0, 0.0));
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn external_curve_spec() {
        let e: ExternalCurve = "pesmo@BC-2,2=curves/p.csv".parse().unwrap();
        assert_eq!((e.method.as_str(), e.benchmark.as_str()), ("pesmo", "BC-2,2"));
        assert!("pesmo=x.csv".parse::<ExternalCurve>().is_err());
    }

    #[test]
    fn empty_run_csv_is_header_only() {
        assert_eq!(
            format_run_csv(&[], 2, 2, false),
            "t,x1,x2,f1,f2,phv_diff,log10_phv_diff,r2,regret,acq_time_s\n"
        );
    }

    #[test]
    fn parallel_map_preserves_order() {
        assert_eq!(parallel_map(7, 3, |i| i * i), vec![0, 1, 4, 9, 16, 25, 36]);
        assert_eq!(parallel_map(3, 1, |i| i), vec![0, 1, 2]);
    }
}
