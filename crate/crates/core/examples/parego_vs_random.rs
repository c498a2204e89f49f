//! Compare the baselines with the main loop through the experiment API.
use usemo::harness::{Experiment, ExperimentConfig, Method};

fn main() -> usemo::Result<()> {
    let iterations = 20;
    for method in [Method::RandomSearch, Method::Parego, Method::UsemoEi] {
        let cfg = ExperimentConfig::new("BC-2,2", method, iterations, 2, 1);
        let exp = Experiment::prepare(&cfg)?;
        let mut finals = Vec::new();
        for seed in cfg.seed_list() {
            let r = exp.run_repetition(seed);
            if let Some(e) = r.error {
                return Err(e);
            }
            finals.push(r.records.last().and_then(|x| x.phv_difference).unwrap_or(f64::NAN));
        }
        println!("{method:<14} PHV difference at t={iterations}: {finals:.3?}");
    }
    Ok(())
}
