//! Run a configured experiment to disk, re-run it from its manifest and
//! build plot data from the summaries.
use usemo::harness::{execute, execute_manifest, plotdata, ExperimentConfig, Method};

fn main() -> usemo::Result<()> {
    let root = std::env::temp_dir().join("usemo-harness-example");
    let config = ExperimentConfig::from_toml_str(
        r#"
        benchmark = "ZDT1"
        method = "usemo-ts"
        iterations = 10
        repetitions = 2
        seed = 4
        "#,
    )?;
    let mut dirs = Vec::new();
    for method in [Method::UsemoTs, Method::Parego] {
        let mut cfg = config.clone();
        cfg.method = method;
        cfg.output = Some(root.join(method.to_string()));
        let report = execute(&cfg)?;
        let last = report.summary.metrics["phv_diff"].mean.last().copied().unwrap_or(f64::NAN);
        println!("{method}: wrote {} (final mean phv_diff {last:.4})", report.output_dir.display());
        dirs.push(report.output_dir);
    }

    let again = execute_manifest(&dirs[0].join("manifest.json"), &root.join("rerun"))?;
    let same = std::fs::read(dirs[0].join("run_00.csv")).ok() == std::fs::read(again.output_dir.join("run_00.csv")).ok();
    println!("manifest re-run identical: {same}");

    for f in plotdata(&dirs, &[], &root.join("plots"), true)? {
        println!("plot output: {}", f.display());
    }
    Ok(())
}
