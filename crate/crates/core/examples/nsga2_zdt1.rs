//! Solve ZDT1 directly with NSGA-II and score the result.
use usemo::benchmarks::{analytic_front, make_benchmark, zdt1};
use usemo::metrics::r2_distance;
use usemo::moo::{solve_vector, Nsga2Config};
use usemo::pareto::BoxDomain;

fn main() -> usemo::Result<()> {
    let problem = make_benchmark("ZDT1")?;
    let ideal = analytic_front(&problem).expect("ZDT1 has an analytic front");
    for budget in [1500, 5000, 20_000] {
        let cfg = Nsga2Config::with_budget(100, budget, 1);
        let mut f = |x: &[f64]| zdt1(x).to_vec();
        let out = solve_vector(&mut f, &BoxDomain::unit(problem.d()), &cfg)?;
        let front: Vec<Vec<f64>> = out.into_iter().map(|i| i.objectives).collect();
        println!("budget {budget:>6}: {:>3} points, r2 = {:.4}", front.len(), r2_distance(&front, &ideal)?);
    }
    Ok(())
}
