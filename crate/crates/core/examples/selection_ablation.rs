//! Uncertainty-maximizing selection against picking a random candidate.
use usemo::harness::{Experiment, ExperimentConfig, Method};
use usemo::usemo::SelectionPolicy;

fn main() -> usemo::Result<()> {
    for policy in [SelectionPolicy::UncertaintyMax, SelectionPolicy::Random] {
        let mut cfg = ExperimentConfig::new("BC-2,2", Method::UsemoTs, 30, 1, 3);
        cfg.selection_policy = policy;
        let exp = Experiment::prepare(&cfg)?;
        let r = exp.run_repetition(cfg.seed);
        if let Some(e) = r.error {
            return Err(e);
        }
        let curve: Vec<String> = r
            .records
            .iter()
            .step_by(10)
            .map(|x| format!("{:.3e}", x.phv_difference.unwrap_or(f64::NAN)))
            .collect();
        println!("{policy:<16} phv_diff every 10 iterations: {}", curve.join(" "));
    }
    Ok(())
}
