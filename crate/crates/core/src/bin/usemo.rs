use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use usemo::benchmarks::{benchmark_names, default_front_dir};
use usemo::harness::{
    benchmark_listing, execute, execute_manifest, plotdata, regenerate_front, resolve_output, timing, verify_front_cache,
    ExperimentConfig, ExternalCurve, Method,
};
use usemo::usemo::SelectionPolicy;
use usemo::Error;

#[derive(Parser)]
#[command(name = "usemo", version, about = "Multi-objective Bayesian optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run repeated optimizations and write per-run CSVs, a summary and a manifest.
    Run {
        #[command(flatten)]
        opts: RunOpts,
        /// Re-run exactly what a manifest.json describes.
        #[arg(long, conflicts_with = "config")]
        from_manifest: Option<PathBuf>,
    },
    /// Report mean ± std of per-iteration acquisition optimization time.
    Timing {
        #[command(flatten)]
        opts: RunOpts,
        /// Additional benchmarks to time.
        #[arg(long = "also-benchmark")]
        also_benchmark: Vec<String>,
        /// Additional methods to time.
        #[arg(long = "also-method")]
        also_method: Vec<Method>,
    },
    /// Regenerate (or with --check, verify) ideal-front caches.
    Fronts {
        /// Benchmarks to process; all when empty.
        names: Vec<String>,
        #[arg(long)]
        dir: Option<PathBuf>,
        /// Verify the existing cache instead of rewriting it.
        #[arg(long)]
        check: bool,
    },
    /// Merge run summaries into long-format plot data.
    Plotdata {
        /// Run directories containing summary.json.
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        /// External curve as METHOD@BENCHMARK=PATH (CSV `iteration,phv_diff,r2`).
        #[arg(long)]
        external: Vec<ExternalCurve>,
        #[arg(long, default_value = "plots")]
        output: PathBuf,
        /// Also render one SVG chart per benchmark and metric.
        #[arg(long)]
        svg: bool,
    },
    /// List registered benchmarks.
    ListBenchmarks,
}

#[derive(Args)]
struct RunOpts {
    /// TOML file of `key = value` settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Benchmark name or path to a tabular CSV.
    #[arg(long)]
    benchmark: Option<String>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    selection_policy: Option<SelectionPolicy>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Explicit per-repetition seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    initial_points: Option<usize>,
    #[arg(long)]
    refit_every: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    front_dir: Option<PathBuf>,
    /// Write wall-clock acquisition times into the run CSVs.
    #[arg(long)]
    record_timing: bool,
}

impl RunOpts {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_toml_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.benchmark {
            cfg.benchmark = v.clone();
        }
        if let Some(v) = self.method {
            cfg.method = v;
        }
        if let Some(v) = self.selection_policy {
            cfg.selection_policy = v;
        }
        if let Some(v) = self.iterations {
            cfg.iterations = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = &self.seeds {
            cfg.repetitions = v.len();
            cfg.seeds = Some(v.clone());
        }
        if let Some(v) = self.repetitions {
            cfg.repetitions = v;
        }
        if let Some(v) = &self.output {
            cfg.output = Some(v.clone());
        }
        if let Some(v) = self.initial_points {
            cfg.initial_points = Some(v);
        }
        if let Some(v) = self.refit_every {
            cfg.refit_every = v;
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if let Some(v) = &self.front_dir {
            cfg.front_dir = Some(v.clone());
        }
        cfg.record_timing |= self.record_timing;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } | Error::UnknownBenchmark { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { opts, from_manifest } => {
            let report = match from_manifest {
                Some(manifest) => {
                    let out = opts
                        .output
                        .as_deref()
                        .map(resolve_output)
                        .ok_or_else(|| Error::Config {
                            field: "output".into(),
                            reason: "--from-manifest needs --output for the re-run".into(),
                        })?;
                    execute_manifest(&manifest, &out)?
                }
                None => execute(&opts.resolve()?)?,
            };
            println!(
                "{} repetitions x {} iterations written to {}",
                report.summary.repetitions,
                report.summary.iterations,
                report.output_dir.display()
            );
            if let Some(phv) = report.summary.metrics.get("phv_diff") {
                if let (Some(m), Some(s)) = (phv.mean.last(), phv.std.last()) {
                    println!("final phv_diff: {m:.6e} ± {s:.3e}");
                }
            }
            Ok(())
        }
        Command::Timing {
            opts,
            also_benchmark,
            also_method,
        } => {
            let base = opts.resolve()?;
            let mut benchmarks = vec![base.benchmark.clone()];
            benchmarks.extend(also_benchmark);
            let mut methods = vec![base.method];
            methods.extend(also_method);
            for b in &benchmarks {
                for m in &methods {
                    let cfg = ExperimentConfig {
                        benchmark: b.clone(),
                        method: *m,
                        ..base.clone()
                    };
                    println!("{}", timing(&cfg)?);
                }
            }
            Ok(())
        }
        Command::Fronts { names, dir, check } => {
            let dir = dir.unwrap_or_else(default_front_dir);
            let names = if names.is_empty() {
                benchmark_names().into_iter().map(String::from).collect()
            } else {
                names
            };
            for name in names {
                let report = if check {
                    verify_front_cache(&name, &dir)?
                } else {
                    regenerate_front(&name, &dir)?
                };
                println!("{report}");
            }
            Ok(())
        }
        Command::Plotdata {
            dirs,
            external,
            output,
            svg,
        } => {
            for path in plotdata(&dirs, &external, &resolve_output(&output), svg)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::ListBenchmarks => {
            for line in benchmark_listing() {
                println!("{line}");
            }
            Ok(())
        }
    }
}
