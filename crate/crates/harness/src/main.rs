//! Command-line front door.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use harness::{
    adversarial_retrain_eval, gen_corpus, n_star_asymptotic, n_star_exact, prob_all_found,
    run_experiment, sha256_hex, write_corpus, write_manifest, CellReport, CorpusConfig,
    ExperimentConfig, ExperimentReport, RetrainConfig, RunManifest,
};

#[derive(Parser)]
#[command(
    name = "fcgbench",
    version,
    about = "Call-graph malware detectors and the edge-insertion attack bench"
)]
struct Cli {
    /// Override the seed from the config file
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Config file (TOML); required by most subcommands
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// error | warn | info | debug | trace
    #[arg(long, global = true, default_value = "info")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled corpus of call-graph files
    GenCorpus,
    /// Train one detector cell and save the model file
    TrainDetector,
    /// Serve a saved detector model over HTTP
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8787")]
        bind: String,
    },
    /// Run the configured attack experiment and write reports
    Attack,
    /// Recompute aggregate metrics from raw per-sample result files
    Evaluate {
        /// results directory written by the attack command
        #[arg(long)]
        results: PathBuf,
    },
    /// Adversarial retraining curve from collected attack results
    RetrainEval,
    /// Coverage probability and least sample count for multi-start
    /// search
    Theory {
        #[arg(long)]
        l: u64,
        #[arg(long)]
        gamma: f64,
        /// also print the coverage probability at this sample count
        #[arg(long)]
        n: Option<u64>,
    },
}

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

struct LoadedConfig<T> {
    value: T,
    sha256: String,
}

fn load_config<T: serde::de::DeserializeOwned>(path: &Option<PathBuf>) -> Result<LoadedConfig<T>> {
    let path = path
        .as_ref()
        .context("this subcommand requires --config <file>")?;
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let text = String::from_utf8(bytes.clone()).context("config is not utf-8")?;
    let value = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(LoadedConfig {
        value,
        sha256: sha256_hex(&bytes),
    })
}

fn out_dir(cli_out: &Option<PathBuf>) -> Result<PathBuf> {
    let dir = cli_out
        .as_ref()
        .context("this subcommand requires --out <dir>")?;
    std::fs::create_dir_all(dir)?;
    Ok(dir.clone())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::GenCorpus => {
            let mut loaded: LoadedConfig<CorpusConfig> = load_config(&cli.config)?;
            if let Some(seed) = cli.seed {
                loaded.value.seed = seed;
            }
            let out = out_dir(&cli.out)?;
            let corpus = gen_corpus(&loaded.value)?;
            let files = write_corpus(&corpus, &out)?;
            println!("wrote {} graphs to {}", files.len(), out.display());
            let mut manifest = RunManifest::new("gen-corpus");
            manifest.seed = Some(loaded.value.seed);
            manifest.config_sha256 = Some(loaded.sha256);
            manifest.outputs = files;
            write_manifest(&out, &manifest)?;
        }
        Command::TrainDetector => {
            let mut loaded: LoadedConfig<ExperimentConfig> = load_config(&cli.config)?;
            if let Some(seed) = cli.seed {
                loaded.value.seed = seed;
            }
            let cfg = &loaded.value;
            if cfg.cells.is_empty() {
                bail!("config must define at least one [[cells]] entry");
            }
            let out = out_dir(&cli.out)?;
            let corpus = cfg.load_corpus()?;
            let (train_ids, test_ids) =
                harness::split_corpus(&corpus, cfg.train_fraction, cfg.seed);
            let mut outputs = Vec::new();
            for spec in &cfg.cells {
                let cell = harness::train_cell(&corpus, &train_ids, &test_ids, spec, cfg.seed)?;
                let file = format!("{}.model.json", cell.name);
                cell.model.save(out.join(&file))?;
                println!(
                    "{}: heldout accuracy {:.3} -> {}",
                    cell.name,
                    cell.heldout_accuracy,
                    out.join(&file).display()
                );
                outputs.push(file);
            }
            let mut manifest = RunManifest::new("train-detector");
            manifest.seed = Some(cfg.seed);
            manifest.config_sha256 = Some(loaded.sha256);
            manifest.outputs = outputs;
            write_manifest(&out, &manifest)?;
        }
        Command::Serve { model, bind } => {
            let server = oracle::serve_detector(model, bind)
                .map_err(|e| anyhow::anyhow!("serve: {e}"))?;
            println!("serving {} at {}/v1/classify", model.display(), server.base_url());
            println!("stats at {}/v1/stats; ctrl-c to stop", server.base_url());
            loop {
                std::thread::sleep(std::time::Duration::from_secs(3600));
            }
        }
        Command::Attack => {
            let mut loaded: LoadedConfig<ExperimentConfig> = load_config(&cli.config)?;
            if let Some(seed) = cli.seed {
                loaded.value.seed = seed;
            }
            let out = out_dir(&cli.out)?;
            let report = run_experiment(&loaded.value)?;
            let outputs = write_attack_outputs(&out, &report)?;
            for cell in &report.cells {
                println!(
                    "{}: asr {:.3}, mean apr {:.3}, mean ir {:.1} ({} of {} evaded)",
                    cell.name, cell.asr, cell.mean_apr, cell.mean_ir, cell.evaded, cell.attempted
                );
            }
            let mut manifest = RunManifest::new("attack");
            manifest.seed = Some(loaded.value.seed);
            manifest.config_sha256 = Some(loaded.sha256);
            manifest.outputs = outputs;
            write_manifest(&out, &manifest)?;
        }
        Command::Evaluate { results } => {
            let out = out_dir(&cli.out)?;
            let metrics = evaluate_results(results)?;
            let path = out.join("metrics.json");
            let mut text = serde_json::to_string_pretty(&metrics)?;
            text.push('\n');
            std::fs::write(&path, text)?;
            for cell in &metrics {
                println!(
                    "{}: asr {:.3}, mean apr {:.3}, mean ir {:.1}",
                    cell.name, cell.asr, cell.mean_apr, cell.mean_ir
                );
            }
            let mut manifest = RunManifest::new("evaluate");
            manifest.outputs = vec!["metrics.json".into()];
            write_manifest(&out, &manifest)?;
        }
        Command::RetrainEval => {
            let mut loaded: LoadedConfig<RetrainConfig> = load_config(&cli.config)?;
            if let Some(seed) = cli.seed {
                loaded.value.experiment.seed = seed;
            }
            let out = out_dir(&cli.out)?;
            let curve = adversarial_retrain_eval(&loaded.value)?;
            std::fs::write(out.join("retrain_curve.json"), curve.to_canonical_json())?;
            for point in &curve.points {
                println!(
                    "fraction {:.2}: asr {:.3}, heldout accuracy {:.3}",
                    point.fraction, point.asr, point.heldout_accuracy
                );
            }
            let mut manifest = RunManifest::new("retrain-eval");
            manifest.seed = Some(loaded.value.experiment.seed);
            manifest.config_sha256 = Some(loaded.sha256);
            manifest.outputs = vec!["retrain_curve.json".into()];
            write_manifest(&out, &manifest)?;
        }
        Command::Theory { l, gamma, n } => {
            let exact = n_star_exact(*l, *gamma)?;
            let asymptotic = n_star_asymptotic(*l, *gamma)?;
            println!("l = {l}, gamma = {gamma}");
            println!("exact least sample count:      {exact}");
            println!("asymptotic least sample count: {asymptotic:.3}");
            if let Some(n) = n {
                println!(
                    "coverage probability at N = {n}: {:.6}",
                    prob_all_found(*l, *n)?
                );
            }
            if let Some(dir) = &cli.out {
                std::fs::create_dir_all(dir)?;
                let record = serde_json::json!({
                    "l": l,
                    "gamma": gamma,
                    "exact": exact,
                    "asymptotic": asymptotic,
                });
                let mut text = serde_json::to_string_pretty(&record)?;
                text.push('\n');
                std::fs::write(dir.join("theory.json"), text)?;
                let mut manifest = RunManifest::new("theory");
                manifest.outputs = vec!["theory.json".into()];
                write_manifest(dir, &manifest)?;
            }
        }
    }
    Ok(())
}

/// Writes report.json, the per-sample result files and one CDF csv
/// per cell. Returns the relative paths written.
fn write_attack_outputs(out: &Path, report: &ExperimentReport) -> Result<Vec<String>> {
    let mut outputs = vec!["report.json".to_string()];
    std::fs::write(out.join("report.json"), report.to_canonical_json())?;
    for cell in &report.cells {
        let dir = out.join("results").join(&cell.name);
        std::fs::create_dir_all(&dir)?;
        for result in &cell.results {
            let file = format!("{}.json", result.app_id);
            std::fs::write(dir.join(&file), result.to_canonical_json())?;
            outputs.push(format!("results/{}/{file}", cell.name));
        }
        let csv_name = format!("cdf-{}.csv", cell.name);
        let mut csv = String::from("apr_bound,asr\n");
        for (bound, asr) in &cell.cdf {
            csv.push_str(&format!("{bound},{asr}\n"));
        }
        std::fs::write(out.join(&csv_name), csv)?;
        outputs.push(csv_name);
    }
    Ok(outputs)
}

/// Independent recomputation of the aggregates from raw result files:
/// APR from each result's own size and edge count, IR from the ledger
/// snapshot, never from the stored summary fields.
fn evaluate_results(results_dir: &Path) -> Result<Vec<CellReport>> {
    use apoem::AttackResult;
    let mut cells = Vec::new();
    let mut cell_dirs: Vec<_> = std::fs::read_dir(results_dir)
        .with_context(|| format!("reading {}", results_dir.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    cell_dirs.sort();
    for dir in cell_dirs {
        let name = dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("cell")
            .to_string();
        let mut paths: Vec<_> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut results = Vec::new();
        for p in paths {
            let mut result = AttackResult::from_json(&std::fs::read_to_string(&p)?)
                .with_context(|| format!("parsing {}", p.display()))?;
            // recompute the summary fields from raw records
            result.apr = result
                .best
                .as_ref()
                .map(|b| b.size() as f64 / result.e_total as f64)
                .unwrap_or(0.0);
            result.ir = result.queries.total();
            results.push(result);
        }
        cells.push(harness::aggregate_cell(&name, f64::NAN, results));
    }
    Ok(cells)
}
