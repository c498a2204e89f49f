//! Optimize over a finite set of designs loaded from CSV.
use std::fmt::Write as _;

use usemo::acquisition::AcquisitionKind;
use usemo::benchmarks::load_tabular;
use usemo::metrics::r2_distance;
use usemo::usemo::{run, UsemoConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("usemo-tabular-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("designs.csv");
    let mut body = String::from("x1,x2,f1,f2\n");
    for i in 0..15 {
        for j in 0..15 {
            let (a, b) = (i as f64 / 14.0, j as f64 / 14.0);
            let _ = writeln!(body, "{a},{b},{},{}", a * a + b, (1.0 - a).powi(2) + 0.5 * b);
        }
    }
    std::fs::write(&path, body)?;

    let problem = load_tabular(&path)?;
    println!("{} designs, d={}, k={}", problem.rows().len(), problem.d(), problem.k());
    let cfg = UsemoConfig::new(AcquisitionKind::Ei, problem.d(), 12, 5);
    let out = run(&cfg, &problem)?;
    let front = out.archive.front();
    println!("found {} Pareto designs, r2 to the true front = {:.4}", front.len(), r2_distance(&front, &problem.ideal_front())?);
    Ok(())
}
