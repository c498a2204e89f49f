//! Synthetic multi-objective benchmark suite, ideal-front construction and
//! caching, and an adapter for tabular (finite design space) datasets.
//!
//! Every synthetic problem lives on the unit cube `[0, 1]^d`. Composite
//! problems evaluate each constituent single-objective function after an
//! affine rescaling of the unit cube onto that function's usual domain.

use std::f64::consts::{E, PI};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::IdealFront;
use crate::moo::{evolve, Nsga2Config};
use crate::pareto::{non_dominated_indices, BoxDomain, InputPoint, ObjectiveVector};

/// Anything the optimizers can query: a box domain and a vector-valued
/// deterministic objective.
pub trait Problem: Send + Sync {
    fn name(&self) -> &str;

    fn domain(&self) -> &BoxDomain;

    fn num_objectives(&self) -> usize;

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Maps a proposal onto an admissible input. Identity for continuous
    /// problems.
    fn snap(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    /// Known Pareto-optimal inputs with their objective values.
    fn known_optima(&self) -> &[(InputPoint, ObjectiveVector)] {
        &[]
    }
}

/// Evaluates `problem` at `x`, validating the output.
pub fn evaluate_checked(problem: &dyn Problem, x: &[f64]) -> Result<ObjectiveVector> {
    let y = problem.evaluate(x).map_err(|e| match e {
        Error::Evaluation { .. } => e,
        other => Error::Evaluation {
            input: x.to_vec(),
            reason: other.to_string(),
        },
    })?;
    if y.len() != problem.num_objectives() {
        return Err(Error::Evaluation {
            input: x.to_vec(),
            reason: format!("expected {} objectives, got {}", problem.num_objectives(), y.len()),
        });
    }
    ObjectiveVector::new(y).map_err(|e| Error::Evaluation {
        input: x.to_vec(),
        reason: e.to_string(),
    })
}

// ---------------------------------------------------------------------------
// single-objective test functions (native domains)

pub fn branin(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

pub fn currin(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let fact = 1.0 - (-1.0 / (2.0 * x2)).exp();
    let num = 2300.0 * x1.powi(3) + 1900.0 * x1 * x1 + 2092.0 * x1 + 60.0;
    let den = 100.0 * x1.powi(3) + 500.0 * x1 * x1 + 4.0 * x1 + 20.0;
    fact * num / den
}

pub fn ackley(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let s1 = x.iter().map(|v| v * v).sum::<f64>() / d;
    let s2 = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / d;
    -20.0 * (-0.2 * s1.sqrt()).exp() - s2.exp() + 20.0 + E
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2))
        .sum()
}

/// Sums over complete blocks of four coordinates; trailing coordinates
/// (when `d` is not a multiple of 4) do not contribute.
pub fn powell(x: &[f64]) -> f64 {
    x.chunks_exact(4)
        .map(|b| {
            (b[0] + 10.0 * b[1]).powi(2)
                + 5.0 * (b[2] - b[3]).powi(2)
                + (b[1] - 2.0 * b[2]).powi(4)
                + 10.0 * (b[0] - b[3]).powi(4)
        })
        .sum()
}

pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64 + x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>()
}

pub fn dixon_price(x: &[f64]) -> f64 {
    (x[0] - 1.0).powi(2)
        + x.windows(2)
            .enumerate()
            .map(|(i, w)| (i + 2) as f64 * (2.0 * w[1] * w[1] - w[0]).powi(2))
            .sum::<f64>()
}

pub fn zakharov(x: &[f64]) -> f64 {
    let s1: f64 = x.iter().map(|v| v * v).sum();
    let s2: f64 = x.iter().enumerate().map(|(i, v)| 0.5 * (i + 1) as f64 * v).sum();
    s1 + s2.powi(2) + s2.powi(4)
}

pub const PERM_BETA: f64 = 0.5;

/// Perm function `d, beta`.
pub fn perm(x: &[f64], beta: f64) -> f64 {
    let d = x.len();
    (1..=d)
        .map(|i| {
            let inner: f64 = (1..=d)
                .map(|j| {
                    let jf = j as f64;
                    (jf.powi(i as i32) + beta) * ((x[j - 1] / jf).powi(i as i32) - 1.0)
                })
                .sum();
            inner * inner
        })
        .sum()
}

pub fn sum_squares(x: &[f64]) -> f64 {
    x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v * v).sum()
}

pub fn zdt1(x: &[f64]) -> [f64; 2] {
    let f1 = x[0];
    let g = 1.0 + 9.0 * x[1..].iter().sum::<f64>() / (x.len() - 1) as f64;
    [f1, g * (1.0 - (f1 / g).sqrt())]
}

/// DTLZ1 with `m` objectives; the last `d - m + 1` coordinates form the
/// distance function `g` (empty when `d < m`, in which case `g = 0`).
pub fn dtlz1(x: &[f64], m: usize) -> Vec<f64> {
    let split = (m - 1).min(x.len());
    let tail = &x[split..];
    let g = if tail.is_empty() {
        0.0
    } else {
        100.0
            * (tail.len() as f64
                + tail
                    .iter()
                    .map(|v| (v - 0.5).powi(2) - (20.0 * PI * (v - 0.5)).cos())
                    .sum::<f64>())
    };
    let pos = |i: usize| x.get(i).copied().unwrap_or(0.0);
    (0..m)
        .map(|obj| {
            let mut f = 0.5 * (1.0 + g);
            for i in 0..m - 1 - obj {
                f *= pos(i);
            }
            if obj > 0 {
                f *= 1.0 - pos(m - 1 - obj);
            }
            f
        })
        .collect()
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum Component {
    Branin,
    Currin,
    Ackley,
    Sphere,
    Rosenbrock,
    Powell,
    Rastrigin,
    DixonPrice,
    Zakharov,
    Perm,
    SumSquares,
}

impl Component {
    /// Native domain `(lower, upper)` for coordinate `j` of a `d`-dimensional input.
    fn bounds(self, j: usize, d: usize) -> (f64, f64) {
        match self {
            Component::Branin => [(-5.0, 10.0), (0.0, 15.0)][j],
            Component::Currin => (0.0, 1.0),
            Component::Ackley => (-32.768, 32.768),
            Component::Sphere | Component::Rastrigin => (-5.12, 5.12),
            Component::Rosenbrock | Component::Zakharov => (-5.0, 10.0),
            Component::Powell => (-4.0, 5.0),
            Component::DixonPrice | Component::SumSquares => (-10.0, 10.0),
            Component::Perm => (-(d as f64), d as f64),
        }
    }

    fn eval_native(self, x: &[f64]) -> f64 {
        match self {
            Component::Branin => branin(x),
            Component::Currin => currin(x),
            Component::Ackley => ackley(x),
            Component::Sphere => sphere(x),
            Component::Rosenbrock => rosenbrock(x),
            Component::Powell => powell(x),
            Component::Rastrigin => rastrigin(x),
            Component::DixonPrice => dixon_price(x),
            Component::Zakharov => zakharov(x),
            Component::Perm => perm(x, PERM_BETA),
            Component::SumSquares => sum_squares(x),
        }
    }

    fn to_native(self, u: &[f64]) -> Vec<f64> {
        let d = u.len();
        u.iter()
            .enumerate()
            .map(|(j, v)| {
                let (lo, hi) = self.bounds(j, d);
                lo + v * (hi - lo)
            })
            .collect()
    }

    fn to_unit(self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        x.iter()
            .enumerate()
            .map(|(j, v)| {
                let (lo, hi) = self.bounds(j, d);
                (v - lo) / (hi - lo)
            })
            .collect()
    }

    fn eval_unit(self, u: &[f64]) -> f64 {
        self.eval_native(&self.to_native(u))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Composite(Vec<Component>),
    Zdt1,
    Dtlz1,
}

/// How a benchmark's ideal front is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontSource {
    Analytic,
    Cached,
}

/// Registered benchmark names with `(k, d)`.
pub const BENCHMARKS: [(&str, usize, usize); 8] = [
    ("BC-2,2", 2, 2),
    ("ZDT1", 2, 4),
    ("AS-2,5", 2, 5),
    ("AR-2,5", 2, 5),
    ("RS-2,5", 2, 5),
    ("ARS-3,5", 3, 5),
    ("DTLZ1", 4, 3),
    ("PRDZPS-6,6", 6, 6),
];

#[derive(Debug, Clone)]
pub struct BenchmarkProblem {
    name: String,
    domain: BoxDomain,
    k: usize,
    kind: Kind,
    known_optima: Vec<(InputPoint, ObjectiveVector)>,
}

impl BenchmarkProblem {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.domain.dim()
    }

    pub fn front_source(&self) -> FrontSource {
        match self.kind {
            Kind::Zdt1 | Kind::Dtlz1 => FrontSource::Analytic,
            Kind::Composite(_) => FrontSource::Cached,
        }
    }

    /// Names of the constituent functions, or the suite name.
    pub fn description(&self) -> String {
        match &self.kind {
            Kind::Composite(c) => c.iter().map(|c| format!("{c:?}")).collect::<Vec<_>>().join("-"),
            Kind::Zdt1 => "ZDT1".into(),
            Kind::Dtlz1 => "DTLZ1".into(),
        }
    }

    fn eval_raw(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            Kind::Composite(cs) => cs.iter().map(|c| c.eval_unit(x)).collect(),
            Kind::Zdt1 => zdt1(x).to_vec(),
            Kind::Dtlz1 => dtlz1(x, self.k),
        }
    }
}

impl Problem for BenchmarkProblem {
    fn name(&self) -> &str {
        &self.name
    }

    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn num_objectives(&self) -> usize {
        self.k
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        if !self.domain.contains(x) {
            return Err(Error::Evaluation {
                input: x.to_vec(),
                reason: format!("outside the domain of {}", self.name),
            });
        }
        Ok(self.eval_raw(x))
    }

    fn known_optima(&self) -> &[(InputPoint, ObjectiveVector)] {
        &self.known_optima
    }
}

pub fn benchmark_names() -> Vec<&'static str> {
    BENCHMARKS.iter().map(|b| b.0).collect()
}

pub fn make_benchmark(name: &str) -> Result<BenchmarkProblem> {
    use Component::*;
    let (kind, d, optimum_unit): (Kind, usize, Vec<f64>) = match name {
        "BC-2,2" => {
            // Branin has three global minima; the one with the smallest Currin value is Pareto optimal.
            let minima = [[-PI, 12.275], [PI, 2.275], [3.0 * PI, 2.475]];
            let best = minima
                .iter()
                .map(|m| Branin.to_unit(m))
                .min_by(|a, b| Currin.eval_unit(a).total_cmp(&Currin.eval_unit(b)))
                .expect("three minima");
            (Kind::Composite(vec![Branin, Currin]), 2, best)
        }
        "ZDT1" => (Kind::Zdt1, 4, vec![0.0; 4]),
        "AS-2,5" => (Kind::Composite(vec![Ackley, Sphere]), 5, vec![0.5; 5]),
        "AR-2,5" => (Kind::Composite(vec![Ackley, Rosenbrock]), 5, vec![0.5; 5]),
        "RS-2,5" => (Kind::Composite(vec![Rosenbrock, Sphere]), 5, vec![0.5; 5]),
        "ARS-3,5" => (Kind::Composite(vec![Ackley, Rosenbrock, Sphere]), 5, vec![0.5; 5]),
        "DTLZ1" => (Kind::Dtlz1, 3, vec![0.0; 3]),
        "PRDZPS-6,6" => (
            Kind::Composite(vec![Powell, Rastrigin, DixonPrice, Zakharov, Perm, SumSquares]),
            6,
            vec![0.5; 6],
        ),
        other => {
            return Err(Error::UnknownBenchmark {
                name: other.to_string(),
                available: benchmark_names().join(", "),
            })
        }
    };
    let k = BENCHMARKS.iter().find(|b| b.0 == name).map(|b| b.1).unwrap_or(2);
    let mut problem = BenchmarkProblem {
        name: name.to_string(),
        domain: BoxDomain::unit(d),
        k,
        kind,
        known_optima: Vec::new(),
    };
    let y = ObjectiveVector::new(problem.eval_raw(&optimum_unit))?;
    problem.known_optima.push((InputPoint(optimum_unit), y));
    Ok(problem)
}

// ---------------------------------------------------------------------------
// ideal fronts

pub const ANALYTIC_FRONT_POINTS: usize = 500;

/// Settings of the one-off NSGA-II runs that produce cached fronts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontManifest {
    pub benchmark: String,
    pub evaluation_budget: usize,
    pub population_size: usize,
    pub seeds: Vec<u64>,
    pub points: usize,
    pub toolkit_version: String,
}

impl FrontManifest {
    pub fn standard(benchmark: &str) -> Self {
        Self {
            benchmark: benchmark.to_string(),
            evaluation_budget: 200_000,
            population_size: 200,
            seeds: vec![1, 2, 3, 4, 5],
            points: 0,
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Directory holding the shipped front caches; `USEMO_FRONT_DIR` overrides.
pub fn default_front_dir() -> PathBuf {
    std::env::var_os("USEMO_FRONT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("fronts"))
}

fn file_stem(benchmark: &str) -> String {
    benchmark.replace(',', "_")
}

pub fn front_cache_path(dir: &Path, benchmark: &str) -> PathBuf {
    dir.join(format!("{}.csv", file_stem(benchmark)))
}

pub fn front_manifest_path(dir: &Path, benchmark: &str) -> PathBuf {
    dir.join(format!("{}.manifest.json", file_stem(benchmark)))
}

/// Analytic front of ZDT1 or DTLZ1 (`k = 4`).
pub fn analytic_front(problem: &BenchmarkProblem) -> Option<IdealFront> {
    let n = ANALYTIC_FRONT_POINTS;
    match problem.kind {
        Kind::Zdt1 => {
            let pts = (0..n)
                .map(|i| {
                    let f1 = i as f64 / (n - 1) as f64;
                    ObjectiveVector::new(vec![f1, 1.0 - f1.sqrt()]).expect("finite")
                })
                .collect();
            Some(IdealFront::filtered(pts))
        }
        Kind::Dtlz1 => {
            // images of a Sobol sample of the position variables; g = 0 here so
            // every image lies on the simplex sum f = 0.5
            let m = problem.k;
            let domain = BoxDomain::unit(m - 1);
            let pts = crate::design::sobol_design(&domain, n, 0)
                .ok()?
                .into_iter()
                .map(|x| {
                    let mut full = x.0.clone();
                    full.resize(problem.d().max(m - 1), 0.5);
                    ObjectiveVector::new(dtlz1(&full[..problem.d()], m)).expect("finite")
                })
                .collect();
            Some(IdealFront::filtered(pts))
        }
        Kind::Composite(_) => None,
    }
}

/// Runs the seeded NSGA-II passes described by `manifest` and merges the
/// resulting fronts.
pub fn generate_front(problem: &BenchmarkProblem, manifest: &FrontManifest) -> Result<Vec<ObjectiveVector>> {
    let mut merged: Vec<Vec<f64>> = Vec::new();
    for &seed in &manifest.seeds {
        let cfg = Nsga2Config::with_budget(manifest.population_size, manifest.evaluation_budget, seed);
        let mut f = |x: &[f64]| problem.eval_raw(x);
        let pop = evolve(&mut f, &problem.domain, &cfg, None)?;
        merged.extend(pop.into_iter().filter(|i| i.rank == 0).map(|i| i.objectives));
    }
    let keep = non_dominated_indices(&merged);
    let mut front: Vec<Vec<f64>> = keep.into_iter().map(|i| merged[i].clone()).collect();
    front.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    front.into_iter().map(ObjectiveVector::new).collect()
}

pub fn format_front_csv(front: &[ObjectiveVector], k: usize) -> String {
    let mut out = String::new();
    let header: Vec<String> = (1..=k).map(|i| format!("f{i}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for p in front {
        let row: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    out
}

/// Reads a cached front, checking the header and mutual non-dominance.
pub fn read_front_csv(path: &Path, k: usize) -> Result<IdealFront> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let expected: Vec<String> = (1..=k).map(|i| format!("f{i}")).collect();
    let header = lines.next().unwrap_or_default();
    if header != expected.join(",") {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            reason: format!("expected header `{}`, got `{header}`", expected.join(",")),
        });
    }
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        let parse_err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            reason,
        };
        let vals = vals.map_err(|e| parse_err(e.to_string()))?;
        if vals.len() != k {
            return Err(parse_err(format!("expected {k} values, got {}", vals.len())));
        }
        points.push(ObjectiveVector::new(vals).map_err(|e| parse_err(e.to_string()))?);
    }
    IdealFront::new(points).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        reason: format!("cached front is not mutually non-dominated: {e}"),
    })
}

/// Writes the cache CSV and its manifest sidecar.
pub fn write_front_cache(dir: &Path, manifest: &FrontManifest, front: &[ObjectiveVector], k: usize) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = front_cache_path(dir, &manifest.benchmark);
    fs::write(&csv_path, format_front_csv(front, k)).map_err(|e| Error::io(&csv_path, e))?;
    let mut manifest = manifest.clone();
    manifest.points = front.len();
    let man_path = front_manifest_path(dir, &manifest.benchmark);
    let json = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(&man_path, json).map_err(|e| Error::io(&man_path, e))?;
    Ok(())
}

pub fn read_front_manifest(dir: &Path, benchmark: &str) -> Result<FrontManifest> {
    let path = front_manifest_path(dir, benchmark);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Ideal front of a registered benchmark: analytic where known, otherwise
/// the cache under `cache_dir`, generated on the spot when `allow_generate`.
pub fn ideal_front_of(problem: &BenchmarkProblem, cache_dir: &Path, allow_generate: bool) -> Result<IdealFront> {
    if let Some(front) = analytic_front(problem) {
        return Ok(front);
    }
    let path = front_cache_path(cache_dir, &problem.name);
    if path.exists() {
        return read_front_csv(&path, problem.k);
    }
    if !allow_generate {
        return Err(Error::MissingFrontCache {
            benchmark: problem.name.clone(),
            path,
        });
    }
    let manifest = FrontManifest::standard(&problem.name);
    let front = generate_front(problem, &manifest)?;
    write_front_cache(cache_dir, &manifest, &front, problem.k)?;
    read_front_csv(&path, problem.k)
}

// ---------------------------------------------------------------------------
// tabular problems

/// A finite design space read from CSV: header `x1..xd,f1..fk`, one design
/// per row. Proposals are snapped to the nearest row after per-dimension
/// min-max scaling.
#[derive(Debug, Clone)]
pub struct TabularProblem {
    name: String,
    rows: Vec<(InputPoint, ObjectiveVector)>,
    domain: BoxDomain,
    d: usize,
    k: usize,
}

pub fn load_tabular(path: &Path) -> Result<TabularProblem> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file);
    let parse_err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let headers = reader.headers()?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    let d = names.iter().take_while(|h| h.starts_with('x')).count();
    let k = names.len() - d;
    let expected: Vec<String> = (1..=d).map(|i| format!("x{i}")).chain((1..=k).map(|i| format!("f{i}"))).collect();
    if d == 0 || k < 2 || names != expected {
        return Err(parse_err(
            1,
            format!("header must be x1..xd,f1..fk with d >= 1 and k >= 2, got `{}`", names.join(",")),
        ));
    }

    let mut rows: Vec<(InputPoint, ObjectiveVector)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record?;
        if record.len() != d + k {
            return Err(parse_err(line, format!("expected {} cells, got {}", d + k, record.len())));
        }
        let mut vals = Vec::with_capacity(d + k);
        for cell in record.iter() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("non-numeric cell `{cell}`")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite cell `{cell}`")));
            }
            vals.push(v);
        }
        let x = InputPoint(vals[..d].to_vec());
        if let Some(j) = rows.iter().position(|(r, _)| *r == x) {
            return Err(parse_err(line, format!("duplicate input (same as line {})", j + 2)));
        }
        let y = ObjectiveVector::new(vals[d..].to_vec()).map_err(|e| parse_err(line, e.to_string()))?;
        rows.push((x, y));
    }
    if rows.is_empty() {
        return Err(parse_err(2, "no data rows".into()));
    }

    let mut lower = rows[0].0 .0.clone();
    let mut upper = lower.clone();
    for (x, _) in &rows {
        for j in 0..d {
            lower[j] = lower[j].min(x[j]);
            upper[j] = upper[j].max(x[j]);
        }
    }
    for j in 0..d {
        if upper[j] <= lower[j] {
            lower[j] -= 0.5;
            upper[j] += 0.5;
        }
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "tabular".into());
    Ok(TabularProblem {
        name,
        rows,
        domain: BoxDomain::new(lower, upper)?,
        d,
        k,
    })
}

impl TabularProblem {
    pub fn rows(&self) -> &[(InputPoint, ObjectiveVector)] {
        &self.rows
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Index of the row nearest to `x` in min-max scaled coordinates; ties
    /// go to the lowest index.
    pub fn nearest_row(&self, x: &[f64]) -> usize {
        let u = self.domain.to_unit(x);
        let mut best = (0, f64::INFINITY);
        for (i, (r, _)) in self.rows.iter().enumerate() {
            let ur = self.domain.to_unit(r);
            let dist: f64 = ur.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum();
            if dist < best.1 {
                best = (i, dist);
            }
        }
        best.0
    }

    /// The exact ideal front: the non-dominated rows.
    pub fn ideal_front(&self) -> IdealFront {
        IdealFront::filtered(self.rows.iter().map(|(_, y)| y.clone()).collect())
    }
}

impl Problem for TabularProblem {
    fn name(&self) -> &str {
        &self.name
    }

    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn num_objectives(&self) -> usize {
        self.k
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .find(|(r, _)| r.0 == x)
            .map(|(_, y)| y.to_vec())
            .ok_or_else(|| Error::Evaluation {
                input: x.to_vec(),
                reason: "no row with this input; snap proposals first".into(),
            })
    }

    fn snap(&self, x: &[f64]) -> Vec<f64> {
        self.rows[self.nearest_row(x)].0 .0.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pareto::pareto_filter;

    #[test]
    fn registry_matches_table() {
        for (name, k, d) in BENCHMARKS {
            let p = make_benchmark(name).unwrap();
            assert_eq!((p.k(), p.d()), (k, d), "{name}");
            assert_eq!(p.num_objectives(), k);
        }
        let err = make_benchmark("nope").unwrap_err().to_string();
        assert!(err.contains("BC-2,2") && err.contains("PRDZPS-6,6"));
    }

    #[test]
    fn component_optima() {
        assert_eq!(sphere(&[0.0; 5]), 0.0);
        assert!(ackley(&[0.0; 5]).abs() < 1e-12);
        assert_eq!(rosenbrock(&[1.0; 5]), 0.0);
        assert_eq!(rastrigin(&[0.0; 6]), 0.0);
        assert_eq!(zakharov(&[0.0; 6]), 0.0);
        assert_eq!(sum_squares(&[0.0; 6]), 0.0);
        assert_eq!(powell(&[0.0; 6]), 0.0);
        let perm_opt: Vec<f64> = (1..=6).map(|j| j as f64).collect();
        assert_eq!(perm(&perm_opt, PERM_BETA), 0.0);
        // Dixon-Price minimum x_i = 2^{-(2^i - 2)/2^i}
        let dp: Vec<f64> = (1..=6).map(|i: i32| 2f64.powf(-((2f64.powi(i) - 2.0) / 2f64.powi(i)))).collect();
        assert!(dixon_price(&dp).abs() < 1e-12);
    }

    #[test]
    fn branin_minimum_by_local_descent() {
        // coordinate pattern search from the published minimiser
        let mut x = [PI, 2.275];
        let mut step = 1e-2;
        while step > 1e-9 {
            let mut improved = false;
            for j in 0..2 {
                for s in [-step, step] {
                    let mut y = x;
                    y[j] += s;
                    if branin(&y) < branin(&x) {
                        x = y;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        assert!((branin(&x) - 0.397887).abs() < 1e-4);
        assert!((x[0] - PI).abs() < 1e-3 && (x[1] - 2.275).abs() < 1e-3);
    }

    #[test]
    fn evaluations_finite_and_deterministic() {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for name in benchmark_names() {
            let p = make_benchmark(name).unwrap();
            let mut probes: Vec<Vec<f64>> = (0..200).map(|_| (0..p.d()).map(|_| rng.random()).collect()).collect();
            probes.push(vec![0.0; p.d()]);
            probes.push(vec![1.0; p.d()]);
            for x in probes {
                let a = p.evaluate(&x).unwrap();
                assert!(a.iter().all(|v| v.is_finite()), "{name} at {x:?}: {a:?}");
                assert_eq!(a, p.evaluate(&x).unwrap());
            }
        }
    }

    #[test]
    fn known_optima_consistent() {
        for name in benchmark_names() {
            let p = make_benchmark(name).unwrap();
            let (x, y) = &p.known_optima()[0];
            assert_eq!(&p.evaluate(x).unwrap()[..], &y[..]);
        }
        let rs = make_benchmark("RS-2,5").unwrap();
        assert_eq!(rs.known_optima()[0].1[1], 0.0);
    }

    #[test]
    fn zdt1_analytic_front() {
        let p = make_benchmark("ZDT1").unwrap();
        let f = analytic_front(&p).unwrap();
        assert_eq!(f.len(), ANALYTIC_FRONT_POINTS);
        assert!((1.0 - 0.25f64.sqrt() - 0.5).abs() < 1e-15);
        for y in f.points() {
            assert!((y[1] - (1.0 - y[0].sqrt())).abs() < 1e-15);
        }
        // x2.. = 0 puts ZDT1 on its front
        let y = p.evaluate(&[0.25, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(y, vec![0.25, 0.5]);
    }

    #[test]
    fn dtlz1_front_on_simplex() {
        let p = make_benchmark("DTLZ1").unwrap();
        let f = analytic_front(&p).unwrap();
        assert!(f.len() > 450);
        for y in f.points() {
            assert!((y.iter().sum::<f64>() - 0.5).abs() < 1e-9);
        }
        assert_eq!(pareto_filter(f.points()).unwrap().len(), f.len());
    }

    #[test]
    fn cache_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let front = vec![
            ObjectiveVector::new(vec![0.0, 1.0]).unwrap(),
            ObjectiveVector::new(vec![0.1, 0.7]).unwrap(),
            ObjectiveVector::new(vec![1.0, 0.0]).unwrap(),
        ];
        let man = FrontManifest::standard("BC-2,2");
        write_front_cache(dir.path(), &man, &front, 2).unwrap();
        let f = read_front_csv(&front_cache_path(dir.path(), "BC-2,2"), 2).unwrap();
        assert_eq!(f.points(), &front[..]);
        assert_eq!(read_front_manifest(dir.path(), "BC-2,2").unwrap().points, 3);

        let path = front_cache_path(dir.path(), "BC-2,2");
        let mut text = fs::read_to_string(&path).unwrap();
        text.push_str("0.5,0.9\n");
        fs::write(&path, text).unwrap();
        assert!(read_front_csv(&path, 2).is_err());
    }

    #[test]
    fn missing_cache_is_explicit() {
        let dir = tempfile::tempdir().unwrap();
        let p = make_benchmark("BC-2,2").unwrap();
        let err = ideal_front_of(&p, dir.path(), false).unwrap_err();
        assert!(matches!(err, Error::MissingFrontCache { .. }));
        assert!(err.to_string().contains("usemo fronts BC-2,2"));
    }

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn tabular_loading() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "t.csv", "x1,x2,f1,f2\n0,0,1,5\n1,0,2,3\n0,2,4,1\n");
        let t = load_tabular(&p).unwrap();
        assert_eq!((t.d(), t.k()), (2, 2));
        assert_eq!(t.rows().len(), 3);
        assert_eq!(t.snap(&[1.0, 0.0]), vec![1.0, 0.0]);
        assert_eq!(t.evaluate(&[0.0, 2.0]).unwrap(), vec![4.0, 1.0]);
        assert!(t.evaluate(&[0.5, 0.5]).is_err());
        // (0.5, 0) is equidistant from rows 0 and 1 after scaling
        assert_eq!(t.nearest_row(&[0.5, 0.0]), 0);
        assert_eq!(t.ideal_front().len(), 3);
    }

    #[test]
    fn tabular_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let ragged = write(dir.path(), "r.csv", "x1,f1,f2\n0,1,2\n1,2\n");
        let e = load_tabular(&ragged).unwrap_err().to_string();
        assert!(e.contains(":3:"), "{e}");
        let nonnum = write(dir.path(), "n.csv", "x1,f1,f2\n0,1,abc\n");
        let e = load_tabular(&nonnum).unwrap_err().to_string();
        assert!(e.contains(":2:") && e.contains("abc"), "{e}");
        let dup = write(dir.path(), "d.csv", "x1,f1,f2\n0,1,2\n1,1,1\n0,3,3\n");
        let e = load_tabular(&dup).unwrap_err().to_string();
        assert!(e.contains(":4:") && e.contains("duplicate"), "{e}");
        let header = write(dir.path(), "h.csv", "a,b,c\n0,1,2\n");
        assert!(load_tabular(&header).is_err());
    }
}
