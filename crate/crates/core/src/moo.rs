//! NSGA-II: elitist evolutionary multi-objective search with non-dominated
//! sorting and crowding distance. Used for the cheap acquisition problem and
//! for generating reference fronts of the true benchmark functions.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pareto::{dominates_unchecked, BoxDomain};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nsga2Config {
    pub population_size: usize,
    /// Total objective-vector evaluations, initial population included.
    pub evaluation_budget: usize,
    pub crossover_prob: f64,
    pub crossover_eta: f64,
    /// Per-dimension mutation probability; `None` means `1/d`.
    pub mutation_prob_per_dim: Option<f64>,
    pub mutation_eta: f64,
    pub seed: u64,
}

impl Default for Nsga2Config {
    /// 50 individuals x 30 generations = 1500 evaluations.
    fn default() -> Self {
        Self {
            population_size: 50,
            evaluation_budget: 1500,
            crossover_prob: 0.9,
            crossover_eta: 15.0,
            mutation_prob_per_dim: None,
            mutation_eta: 20.0,
            seed: 0,
        }
    }
}

impl Nsga2Config {
    pub fn with_budget(population_size: usize, evaluation_budget: usize, seed: u64) -> Self {
        Self {
            population_size,
            evaluation_budget,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 || self.population_size % 2 != 0 {
            return Err(Error::config(
                "population_size",
                format!("must be even and >= 2, got {}", self.population_size),
            ));
        }
        if self.evaluation_budget < self.population_size {
            return Err(Error::config(
                "evaluation_budget",
                format!(
                    "budget {} is smaller than the population {}",
                    self.evaluation_budget, self.population_size
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return Err(Error::config("crossover_prob", "must lie in [0, 1]"));
        }
        if let Some(p) = self.mutation_prob_per_dim {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config("mutation_prob_per_dim", "must lie in [0, 1]"));
            }
        }
        if !(self.crossover_eta > 0.0) || !(self.mutation_eta > 0.0) {
            return Err(Error::config("eta", "distribution indices must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub point: Vec<f64>,
    pub objectives: Vec<f64>,
    pub rank: usize,
    pub crowding: f64,
}

/// Partitions `objs` into successive non-dominated fronts (lists of indices,
/// ascending within each front).
pub fn fast_nondominated_sort<P: AsRef<[f64]>>(objs: &[P]) -> Vec<Vec<usize>> {
    let n = objs.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (objs[i].as_ref(), objs[j].as_ref());
            if dominates_unchecked(a, b) {
                dominated_by[i].push(j);
                counts[j] += 1;
            } else if dominates_unchecked(b, a) {
                dominated_by[j].push(i);
                counts[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                counts[j] -= 1;
                if counts[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Crowding distance of each member of `front` (indices into `objs`),
/// returned in the order of `front`. Boundary members get `+inf`; an
/// objective with zero range contributes nothing.
pub fn crowding_distance<P: AsRef<[f64]>>(objs: &[P], front: &[usize]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n == 0 {
        return dist;
    }
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let k = objs[front[0]].as_ref().len();
    let mut order: Vec<usize> = (0..n).collect();
    for m in 0..k {
        let val = |pos: usize| objs[front[pos]].as_ref()[m];
        order.sort_by(|&a, &b| val(a).total_cmp(&val(b)).then(a.cmp(&b)));
        let lo = val(order[0]);
        let hi = val(order[n - 1]);
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            let gap = (val(order[w + 1]) - val(order[w - 1])) / range;
            dist[order[w]] += gap;
        }
    }
    dist
}

/// Observer called with the generation index and the surviving population.
pub type GenerationObserver<'o> = dyn FnMut(usize, &[Individual]) + 'o;

/// Runs NSGA-II on a vector-valued objective and returns the final
/// population. `evaluate` is called at most `cfg.evaluation_budget` times.
pub fn evolve(
    evaluate: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    domain: &BoxDomain,
    cfg: &Nsga2Config,
    mut observer: Option<&mut GenerationObserver<'_>>,
) -> Result<Vec<Individual>> {
    cfg.validate()?;
    let n = cfg.population_size;
    let d = domain.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pm = cfg.mutation_prob_per_dim.unwrap_or(1.0 / d as f64);

    let mut pop: Vec<Individual> = (0..n)
        .map(|_| {
            let point = domain.sample_uniform(&mut rng).0;
            let objectives = evaluate(&point);
            Individual {
                point,
                objectives,
                rank: 0,
                crowding: 0.0,
            }
        })
        .collect();
    let mut evals = n;
    assign_rank_and_crowding(&mut pop);
    if let Some(obs) = observer.as_mut() {
        obs(0, &pop);
    }

    let mut generation = 0;
    while evals < cfg.evaluation_budget {
        generation += 1;
        let n_children = n.min(cfg.evaluation_budget - evals);
        let mut children = Vec::with_capacity(n_children);
        while children.len() < n_children {
            let p1 = tournament(&pop, &mut rng);
            let p2 = tournament(&pop, &mut rng);
            let (mut c1, mut c2) = if rng.random::<f64>() < cfg.crossover_prob {
                sbx(&pop[p1].point, &pop[p2].point, cfg.crossover_eta, &mut rng)
            } else {
                (pop[p1].point.clone(), pop[p2].point.clone())
            };
            for c in [&mut c1, &mut c2] {
                polynomial_mutation(c, domain, pm, cfg.mutation_eta, &mut rng);
                domain.clip(c);
            }
            children.push(c1);
            if children.len() < n_children {
                children.push(c2);
            }
        }
        for point in children {
            let objectives = evaluate(&point);
            pop.push(Individual {
                point,
                objectives,
                rank: 0,
                crowding: 0.0,
            });
        }
        evals += n_children;
        pop = environmental_selection(pop, n);
        if let Some(obs) = observer.as_mut() {
            obs(generation, &pop);
        }
    }
    Ok(pop)
}

fn assign_rank_and_crowding(pop: &mut [Individual]) {
    let objs: Vec<&[f64]> = pop.iter().map(|i| i.objectives.as_slice()).collect();
    let fronts = fast_nondominated_sort(&objs);
    let mut ranks = vec![0; pop.len()];
    let mut crowd = vec![0.0; pop.len()];
    for (r, front) in fronts.iter().enumerate() {
        let cd = crowding_distance(&objs, front);
        for (pos, &i) in front.iter().enumerate() {
            ranks[i] = r;
            crowd[i] = cd[pos];
        }
    }
    for (i, ind) in pop.iter_mut().enumerate() {
        ind.rank = ranks[i];
        ind.crowding = crowd[i];
    }
}

fn environmental_selection(combined: Vec<Individual>, n: usize) -> Vec<Individual> {
    let objs: Vec<&[f64]> = combined.iter().map(|i| i.objectives.as_slice()).collect();
    let fronts = fast_nondominated_sort(&objs);
    let mut chosen: Vec<(usize, usize, f64)> = Vec::with_capacity(n);
    for (r, front) in fronts.iter().enumerate() {
        if chosen.len() == n {
            break;
        }
        let cd = crowding_distance(&objs, front);
        let mut members: Vec<(usize, f64)> = front.iter().copied().zip(cd).collect();
        if chosen.len() + members.len() > n {
            members.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            members.truncate(n - chosen.len());
            // crowding is recomputed on the truncated front below
        }
        chosen.extend(members.into_iter().map(|(i, c)| (i, r, c)));
    }
    let mut slots: Vec<Option<Individual>> = combined.into_iter().map(Some).collect();
    let mut next: Vec<Individual> = chosen
        .iter()
        .map(|&(i, r, c)| {
            let mut ind = slots[i].take().expect("each individual selected once");
            ind.rank = r;
            ind.crowding = c;
            ind
        })
        .collect();
    assign_rank_and_crowding(&mut next);
    next
}

/// Binary tournament on (rank, -crowding); ties go to the lower index.
fn tournament<R: Rng + ?Sized>(pop: &[Individual], rng: &mut R) -> usize {
    let a = rng.random_range(0..pop.len());
    let b = rng.random_range(0..pop.len());
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let (x, y) = (&pop[lo], &pop[hi]);
    if y.rank < x.rank || (y.rank == x.rank && y.crowding > x.crowding) {
        hi
    } else {
        lo
    }
}

/// Simulated binary crossover; each coordinate recombined with probability 1/2.
fn sbx<R: Rng + ?Sized>(a: &[f64], b: &[f64], eta: f64, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let mut c1 = a.to_vec();
    let mut c2 = b.to_vec();
    for j in 0..a.len() {
        if rng.random::<f64>() > 0.5 || (a[j] - b[j]).abs() < 1e-14 {
            continue;
        }
        let u: f64 = rng.random();
        let bq = if u <= 0.5 {
            (2.0 * u).powf(1.0 / (eta + 1.0))
        } else {
            (1.0 / (2.0 * (1.0 - u))).powf(1.0 / (eta + 1.0))
        };
        c1[j] = 0.5 * ((1.0 + bq) * a[j] + (1.0 - bq) * b[j]);
        c2[j] = 0.5 * ((1.0 - bq) * a[j] + (1.0 + bq) * b[j]);
    }
    (c1, c2)
}

/// Bounded polynomial mutation.
fn polynomial_mutation<R: Rng + ?Sized>(x: &mut [f64], domain: &BoxDomain, p: f64, eta: f64, rng: &mut R) {
    let pow = 1.0 / (eta + 1.0);
    for (j, v) in x.iter_mut().enumerate() {
        if rng.random::<f64>() >= p {
            continue;
        }
        let (lo, hi) = (domain.lower()[j], domain.upper()[j]);
        let width = hi - lo;
        let d1 = (*v - lo) / width;
        let d2 = (hi - *v) / width;
        let u: f64 = rng.random();
        let dq = if u < 0.5 {
            let val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta + 1.0);
            val.powf(pow) - 1.0
        } else {
            let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta + 1.0);
            1.0 - val.powf(pow)
        };
        *v += dq * width;
    }
}

/// Rank-0 members of a final population with exact objective duplicates
/// removed (first kept).
fn first_front(pop: Vec<Individual>) -> Vec<Individual> {
    let mut out: Vec<Individual> = Vec::new();
    for ind in pop.into_iter().filter(|i| i.rank == 0) {
        if !out.iter().any(|o| o.objectives == ind.objectives) {
            out.push(ind);
        }
    }
    out
}

/// Estimated Pareto set of the cheap problem `min (f_1(x), ..., f_k(x))`.
pub fn solve(objectives: &[&dyn Fn(&[f64]) -> f64], domain: &BoxDomain, cfg: &Nsga2Config) -> Result<Vec<Individual>> {
    if objectives.len() < 2 {
        return Err(Error::Contract(format!(
            "multi-objective solve needs >= 2 objectives, got {}",
            objectives.len()
        )));
    }
    let mut f = |x: &[f64]| objectives.iter().map(|o| o(x)).collect::<Vec<f64>>();
    Ok(first_front(evolve(&mut f, domain, cfg, None)?))
}

/// Vector-valued form of [`solve`].
pub fn solve_vector(
    evaluate: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    domain: &BoxDomain,
    cfg: &Nsga2Config,
) -> Result<Vec<Individual>> {
    Ok(first_front(evolve(evaluate, domain, cfg, None)?))
}

/// Single-objective mode: the same solver with one objective. Returns the
/// best point found and its value.
pub fn minimize_scalar(f: &dyn Fn(&[f64]) -> f64, domain: &BoxDomain, cfg: &Nsga2Config) -> Result<(Vec<f64>, f64)> {
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut wrapped = |x: &[f64]| {
        let v = f(x);
        if best.as_ref().is_none_or(|(_, b)| v < *b) {
            best = Some((x.to_vec(), v));
        }
        vec![v]
    };
    evolve(&mut wrapped, domain, cfg, None)?;
    best.ok_or_else(|| Error::Contract("single-objective solve produced no evaluations".into()))
}
