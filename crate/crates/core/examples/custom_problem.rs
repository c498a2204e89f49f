//! Plug a user-defined objective into the optimizer via the Problem trait.
use usemo::acquisition::AcquisitionKind;
use usemo::benchmarks::Problem;
use usemo::pareto::BoxDomain;
use usemo::usemo::{run, UsemoConfig};

/// Two conflicting quadratics with minima at 0.2 and 0.8 in every coordinate.
struct Bowls {
    domain: BoxDomain,
}

impl Problem for Bowls {
    fn name(&self) -> &str {
        "bowls"
    }

    fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    fn num_objectives(&self) -> usize {
        2
    }

    fn evaluate(&self, x: &[f64]) -> usemo::Result<Vec<f64>> {
        let f = |c: f64| x.iter().map(|v| (v - c).powi(2)).sum::<f64>();
        Ok(vec![f(0.2), f(0.8)])
    }
}

fn main() -> usemo::Result<()> {
    let problem = Bowls { domain: BoxDomain::unit(3) };
    let cfg = UsemoConfig::new(AcquisitionKind::Ts, 3, 15, 11);
    let out = run(&cfg, &problem)?;
    for e in out.archive.entries() {
        println!("x = {:.3?} -> f = {:.4?}", e.input.0, &e.output[..]);
    }
    Ok(())
}
