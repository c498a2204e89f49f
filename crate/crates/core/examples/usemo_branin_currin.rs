//! The full loop on Branin-Currin with each acquisition function.
use usemo::acquisition::AcquisitionKind;
use usemo::benchmarks::make_benchmark;
use usemo::usemo::{run, UsemoConfig};

fn main() -> usemo::Result<()> {
    let problem = make_benchmark("BC-2,2")?;
    let iterations = 15;
    for kind in [AcquisitionKind::Ei, AcquisitionKind::Ts, AcquisitionKind::Lcb, AcquisitionKind::Ucb] {
        let cfg = UsemoConfig::new(kind, problem.d(), iterations, 1);
        let out = run(&cfg, &problem)?;
        let best = out.archive.front();
        let mean_candidates =
            out.records.iter().map(|r| r.candidates as f64).sum::<f64>() / out.records.len() as f64;
        println!(
            "{kind:>3}: {} evaluations, {} Pareto points, {mean_candidates:.1} candidates per iteration",
            out.initial.len() + out.records.len(),
            best.len()
        );
        for y in best.iter().take(5) {
            println!("      {y:?}");
        }
    }
    Ok(())
}
