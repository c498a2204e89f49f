use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use usemo::harness::Summary;

fn usemo(args: &[&str], root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_usemo"))
        .args(args)
        .env("USEMO_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Small, fast settings shared by the end-to-end runs.
fn quick_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("quick.toml");
    let body = format!(
        "nsga2_population = 20\nnsga2_budget = 200\nrefit_starts = 2\nrefit_max_iters = 20\nts_features = 100\n{extra}"
    );
    fs::write(&path, body).unwrap();
    path
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn list_benchmarks_names_all_problems() {
    let tmp = tempfile::tempdir().unwrap();
    let out = usemo(&["list-benchmarks"], tmp.path());
    assert!(out.status.success());
    let text = stdout(&out);
    for name in ["BC-2,2", "ZDT1", "AS-2,5", "AR-2,5", "RS-2,5", "ARS-3,5", "DTLZ1", "PRDZPS-6,6"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
}

#[test]
fn zero_iterations_writes_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path(), "");
    let out = usemo(
        &["run", "--config", cfg.to_str().unwrap(), "--iterations", "0", "--repetitions", "1", "--output", "empty"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    // relative output resolved against USEMO_OUTPUT_ROOT
    let csv = fs::read_to_string(tmp.path().join("empty/run_00.csv")).unwrap();
    assert_eq!(csv, "t,x1,x2,f1,f2,phv_diff,log10_phv_diff,r2,regret,acq_time_s\n");
    assert_eq!(read_rows(&tmp.path().join("empty/initial_00.csv")).len(), 6);
}

#[test]
fn bad_config_reports_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "repetitions = 2\nseeds = [1, 2, 3]\n").unwrap();
    let out = usemo(&["run", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("seeds"), "{}", stderr(&out));

    fs::write(&cfg, "iterashuns = 2\n").unwrap();
    let out = usemo(&["run", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("iterashuns"), "{}", stderr(&out));

    let out = usemo(&["run", "--benchmark", "XYZ-9"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("BC-2,2"));
}

#[test]
fn run_budget_determinism_and_plotdata() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path(), "benchmark = \"ZDT1\"\niterations = 4\nrepetitions = 2\n");
    let c = cfg.to_str().unwrap();
    for (method, dir) in [("usemo-ts", "ts"), ("parego", "pe"), ("usemo-ts", "ts-again")] {
        let out = usemo(&["run", "--config", c, "--method", method, "--output", dir], tmp.path());
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let root = tmp.path();
    for rep in ["00", "01"] {
        let a = fs::read(root.join(format!("ts/run_{rep}.csv"))).unwrap();
        let b = fs::read(root.join(format!("ts-again/run_{rep}.csv"))).unwrap();
        assert_eq!(a, b);
        // evaluations = initial_points + iterations
        let n = read_rows(&root.join(format!("ts/initial_{rep}.csv"))).len()
            + read_rows(&root.join(format!("ts/run_{rep}.csv"))).len();
        assert_eq!(n, 10 + 4);
    }

    // mean in the summary equals the arithmetic mean of the run CSVs
    let summary: Summary = serde_json::from_str(&fs::read_to_string(root.join("ts/summary.json")).unwrap()).unwrap();
    let runs: Vec<Vec<Vec<String>>> = ["00", "01"].iter().map(|r| read_rows(&root.join(format!("ts/run_{r}.csv")))).collect();
    let phv_col = 1 + 4 + 2;
    for t in 0..4 {
        let vals: Vec<f64> = runs.iter().map(|r| r[t][phv_col].parse().unwrap()).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!((summary.metrics["phv_diff"].mean[t] - mean).abs() <= 1e-12 * mean.abs().max(1.0));
    }

    let ext = root.join("pesmo.csv");
    fs::write(&ext, "iteration,phv_diff,r2\n1,0.5,0.2\n2,0.4,0.1\n").unwrap();
    let spec = format!("pesmo@ZDT1={}", ext.display());
    let out = usemo(
        &["plotdata", root.join("ts").to_str().unwrap(), root.join("pe").to_str().unwrap(), "--external", &spec, "--output", "plots", "--svg"],
        root,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let mut reader = csv::Reader::from_path(root.join("plots/plot_data.csv")).unwrap();
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        ["method", "benchmark", "t", "metric", "mean", "std"]
    );
    let mut series = std::collections::BTreeSet::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        if &rec[3] == "phv_diff" {
            series.insert(rec[0].to_string());
        }
    }
    assert_eq!(series.into_iter().collect::<Vec<_>>(), ["parego", "pesmo", "usemo-ts"]);
    assert!(root.join("plots/plot_ZDT1_phv_diff.svg").exists());

    let out = usemo(&["plotdata", root.join("nope").to_str().unwrap()], root);
    assert!(!out.status.success());
    assert!(stderr(&out).contains("nope"));
}

#[test]
fn manifest_rerun_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path(), "benchmark = \"BC-2,2\"\nmethod = \"usemo-ei\"\niterations = 3\nrepetitions = 1\n");
    let out = usemo(&["run", "--config", cfg.to_str().unwrap(), "--output", "first"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = tmp.path().join("first/manifest.json");
    let out = usemo(&["run", "--from-manifest", manifest.to_str().unwrap(), "--output", "second"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["run_00.csv", "initial_00.csv", "summary.json"] {
        assert_eq!(
            fs::read(tmp.path().join("first").join(f)).unwrap(),
            fs::read(tmp.path().join("second").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn timing_prints_one_row_per_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path(), "iterations = 2\nrepetitions = 1\n");
    let out = usemo(
        &["timing", "--config", cfg.to_str().unwrap(), "--benchmark", "BC-2,2", "--also-benchmark", "ZDT1", "--method", "usemo-ei", "--also-method", "random-search"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4, "{text}");
    for b in ["BC-2,2", "ZDT1"] {
        for m in ["usemo-ei", "random-search"] {
            assert_eq!(lines.iter().filter(|l| l.starts_with(b) && l.contains(m) && l.contains('±')).count(), 1);
        }
    }
}

#[test]
fn corrupted_front_cache_fails_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("fronts");
    for f in ["BC-2_2.csv", "BC-2_2.manifest.json"] {
        fs::copy(shipped.join(f), tmp.path().join(f)).unwrap();
    }
    let csv = tmp.path().join("BC-2_2.csv");
    let mut text = fs::read_to_string(&csv).unwrap();
    // dominated by every cached point
    text.push_str("1000.0,1000.0\n");
    fs::write(&csv, text).unwrap();
    let out = usemo(&["fronts", "BC-2,2", "--check", "--dir", tmp.path().to_str().unwrap()], tmp.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("non-dominated"), "{}", stderr(&out));
}

#[test]
fn tabular_dataset_runs_through_the_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("designs.csv");
    let mut body = String::from("x1,x2,f1,f2\n");
    for i in 0..12 {
        for j in 0..12 {
            let (a, b) = (i as f64 / 11.0, j as f64 / 11.0);
            body.push_str(&format!("{a},{b},{},{}\n", a + 0.1 * b, (1.0 - a).powi(2) + b));
        }
    }
    fs::write(&data, body).unwrap();
    let cfg = quick_config(tmp.path(), "iterations = 3\nrepetitions = 1\n");
    let out = usemo(
        &["run", "--config", cfg.to_str().unwrap(), "--benchmark", data.to_str().unwrap(), "--method", "usemo-ei", "--output", "tab"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = read_rows(&tmp.path().join("tab/run_00.csv"));
    assert_eq!(rows.len(), 3);
    for r in rows {
        let a: f64 = r[1].parse().unwrap();
        let b: f64 = r[2].parse().unwrap();
        // every evaluated input is one of the grid rows
        assert!(((a * 11.0).round() - a * 11.0).abs() < 1e-9 && ((b * 11.0).round() - b * 11.0).abs() < 1e-9);
    }
}
