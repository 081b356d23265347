//! `rfda`: train RF-LE forests, export Path-Adapt side information, adapt
//! to a target domain, evaluate, and run synthetic benchmarks.
//!
//! Exit codes: 0 success, 2 input or usage error, 3 incompatible model,
//! 4 solver non-convergence.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use rfda_bench::report::{to_json, write_csv};
use rfda_bench::{evaluate, generate_domain_pair, run_experiment, ExperimentConfig};
use rfda_core::adapt::{
    export_path_svms, node_adapt, path_adapt, tree_adapt, NodeAdaptParams, PathAdaptParams, PathModel,
    TreeAdaptParams,
};
use rfda_core::config::{apply_forest_keys, KeyValues};
use rfda_core::data::Dataset;
use rfda_core::forest::{train_forest, Forest, ForestConfig};
use rfda_core::Error;

#[derive(Parser)]
#[command(
    name = "rfda",
    version,
    about = "Random forests of local experts with domain adaptation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a forest on a labeled CSV.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Flat `key = value` forest configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Store the per-path prefix SVMs Path-Adapt needs, from source data.
    ExportPaths {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Adapt a source forest with a few labeled target samples.
    Adapt {
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long)]
        model: PathBuf,
        /// Output of `export-paths`; required by, and only accepted for, `path`.
        #[arg(long)]
        paths: Option<PathBuf>,
        #[arg(long)]
        target_data: PathBuf,
        /// Method parameters: C1, C2 for node; C, qp_tol, qp_max_iter for
        /// path; C for tree. Forest keys override the source model's
        /// leaf rules and solver settings.
        #[arg(long, num_args = 1.., value_name = "K=V")]
        params: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Miss-rate metrics of a model on a labeled test CSV, as JSON.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run benchmark experiments and write a CSV table plus a JSON file
    /// with every repeat's curve next to it.
    Bench {
        #[arg(long = "exp-config", required = true)]
        exp_config: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the source, target-train and target-test CSVs of an
    /// experiment's first repeat.
    Generate {
        #[arg(long = "exp-config")]
        exp_config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Node,
    Path,
    Tree,
}

/// A usage problem clap cannot see, such as `--paths` with the wrong method.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    match e.chain().find_map(|c| c.downcast_ref::<Error>()) {
        Some(Error::IncompatibleModel(_)) => 3,
        Some(Error::NotConverged(_)) => 4,
        _ => 2,
    }
}

fn run(cmd: Command) -> anyhow::Result<()> {
    match cmd {
        Command::Train {
            data,
            config,
            seed,
            out,
        } => {
            let data = load_data(&data)?;
            let mut cfg = match config {
                Some(p) => {
                    let mut kv = KeyValues::parse(&read(&p)?).with_context(|| p.display().to_string())?;
                    let mut cfg = ForestConfig::default();
                    apply_forest_keys(&mut kv, &mut cfg)?;
                    kv.finish()?;
                    cfg
                }
                None => ForestConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let forest = train_forest(&data, &cfg)?;
            save_model(&forest, &out)?;
            let depths: Vec<usize> = forest.trees.iter().map(|t| t.depth()).collect();
            println!(
                "trained {} trees, depth min {} mean {:.2} max {}, training error {:.4}",
                forest.trees.len(),
                depths.iter().min().unwrap_or(&0),
                depths.iter().sum::<usize>() as f64 / depths.len().max(1) as f64,
                depths.iter().max().unwrap_or(&0),
                forest.error_rate(&data)?,
            );
        }
        Command::ExportPaths { model, data, out } => {
            let forest = load_model(&model)?;
            let data = load_data(&data)?;
            let paths = export_path_svms(&forest, &data, &forest.config.svm)?;
            fs::write(&out, paths.to_json()? + "\n").with_context(|| out.display().to_string())?;
            let n: usize = paths.trees.values().map(|t| t.len()).sum();
            println!("exported {n} paths over {} trees", paths.trees.len());
        }
        Command::Adapt {
            method,
            model,
            paths,
            target_data,
            params,
            seed,
            out,
        } => {
            match (method, &paths) {
                (Method::Path, None) => bail!(Usage("--method path requires --paths".into())),
                (Method::Node | Method::Tree, Some(_)) => {
                    bail!(Usage("--paths is only accepted with --method path".into()))
                }
                _ => {}
            }
            let source = load_model(&model)?;
            let target = load_data(&target_data)?;
            let mut kv = KeyValues::from_pairs(params.iter().map(String::as_str))?;
            let mut cfg = source.config.clone();
            let adapted = match method {
                Method::Node => {
                    let mut p = NodeAdaptParams::default();
                    kv.take_into("C1", &mut p.c1)?;
                    kv.take_into("C2", &mut p.c2)?;
                    finish_forest_keys(kv, &mut cfg, seed)?;
                    node_adapt(&source, &target, p, &cfg)?
                }
                Method::Path => {
                    let mut p = PathAdaptParams::default();
                    kv.take_into("C", &mut p.penalty)?;
                    kv.take_into("qp_tol", &mut p.qp.tol)?;
                    kv.take_into("qp_max_iter", &mut p.qp.max_iter)?;
                    finish_forest_keys(kv, &mut cfg, seed)?;
                    let file = paths.expect("checked above");
                    let model =
                        PathModel::from_json(&read(&file)?).with_context(|| file.display().to_string())?;
                    path_adapt(&source, &model, &target, p, &cfg)?
                }
                Method::Tree => {
                    let mut p = TreeAdaptParams::default();
                    kv.take_into("C", &mut p.ratio)?;
                    finish_forest_keys(kv, &mut cfg, seed)?;
                    tree_adapt(&source, &target, p, &cfg)?
                }
            };
            save_model(&adapted, &out)?;
            let shallower = adapted
                .trees
                .iter()
                .zip(&source.trees)
                .filter(|(a, s)| a.depth() < s.depth())
                .count();
            println!(
                "{}: {} trees, {} reshaped to a smaller depth, target error {:.4}",
                adapted.provenance.as_str(),
                adapted.trees.len(),
                shallower,
                adapted.error_rate(&target)?,
            );
        }
        Command::Eval { model, test, out } => {
            let forest = load_model(&model)?;
            let test = load_data(&test)?;
            let report = evaluate(&forest, &test)?;
            let json = serde_json::to_string_pretty(&report)? + "\n";
            if let Some(out) = out {
                fs::write(&out, &json).with_context(|| out.display().to_string())?;
            }
            print!("{json}");
        }
        Command::Bench { exp_config, out } => {
            let mut reports = Vec::new();
            for p in &exp_config {
                let cfg =
                    ExperimentConfig::from_str_config(&read(p)?).with_context(|| p.display().to_string())?;
                let r = run_experiment(&cfg).with_context(|| format!("experiment {}", cfg.name))?;
                let cells: Vec<String> = r
                    .columns
                    .iter()
                    .map(|c| {
                        let (m, s) = c.amr_mean_std();
                        format!("{} {:.2}±{:.2}", c.name, 100.0 * m, 100.0 * s)
                    })
                    .collect();
                println!("{}: {}", r.name, cells.join(", "));
                reports.push(r);
            }
            let mut csv = Vec::new();
            write_csv(&reports, &mut csv)?;
            fs::write(&out, csv).with_context(|| out.display().to_string())?;
            let json_path = out.with_extension("json");
            fs::write(&json_path, to_json(&reports)? + "\n")
                .with_context(|| json_path.display().to_string())?;
        }
        Command::Generate { exp_config, out_dir } => {
            let cfg = ExperimentConfig::from_str_config(&read(&exp_config)?)
                .with_context(|| exp_config.display().to_string())?;
            let pair = generate_domain_pair(&cfg.domain)?;
            fs::create_dir_all(&out_dir).with_context(|| out_dir.display().to_string())?;
            for (name, data) in [
                ("source.csv", &pair.source),
                ("target_train.csv", &pair.target_train),
                ("target_test.csv", &pair.target_test),
            ] {
                let path = out_dir.join(name);
                let file = fs::File::create(&path).with_context(|| path.display().to_string())?;
                data.write_csv(std::io::BufWriter::new(file))?;
            }
        }
    }
    Ok(())
}

fn finish_forest_keys(mut kv: KeyValues, cfg: &mut ForestConfig, seed: Option<u64>) -> anyhow::Result<()> {
    apply_forest_keys(&mut kv, cfg)?;
    kv.finish()?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(())
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_data(path: &Path) -> anyhow::Result<Dataset> {
    Dataset::from_csv_path(path).with_context(|| path.display().to_string())
}

fn load_model(path: &Path) -> anyhow::Result<Forest> {
    Forest::load(path).with_context(|| path.display().to_string())
}

fn save_model(forest: &Forest, path: &Path) -> anyhow::Result<()> {
    forest.save(path).with_context(|| path.display().to_string())
}
