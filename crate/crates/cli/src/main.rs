use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Result};
use clap::{Parser, Subcommand, ValueEnum};

use opfr::dataset::{parse_dataset, parse_query_dataset, split_dataset, write_dataset};
use opfr::evaluation::{average_precision, ndcg, precision_at, RelevanceVector};
use opfr::harness::{
    benchmark, emit_report, emit_significance_csv, emit_timing_csv, load_model, run_experiment,
    save_model, ExperimentConfig, Ranker, ReportFormat,
};
use opfr::opf_cg::train_cg;
use opfr::opf_knn::{train_knn, train_knn_best, DEFAULT_K_MAX};
use opfr::ranking::{rank_opf, read_rankings_csv, write_rankings_csv};
use opfr::{Dataset, Metric, RankingList};

#[derive(Parser)]
#[command(name = "opfr", version, about = "Optimum-path forest ranking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Cg,
    Knn,
}

#[derive(Subcommand)]
enum Command {
    /// Train a forest and write it to a model file.
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        variant: Variant,
        #[arg(long, default_value = "euclidean")]
        metric: Metric,
        /// Fixed neighborhood size (knn only).
        #[arg(long, conflicts_with = "kmax")]
        k: Option<usize>,
        /// Largest k tried when selecting k (knn only).
        #[arg(long)]
        kmax: Option<usize>,
        #[arg(long)]
        model: PathBuf,
    },
    /// Rank every query against a trained model.
    Rank {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        top: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score a rankings file with NDCG, MAP and precision.
    Evaluate {
        #[arg(long)]
        rankings: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        train: PathBuf,
    },
    /// Run the hold-out protocol described by a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `base_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time ranking with a model and with the distance baseline.
    Benchmark {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        top: usize,
        #[arg(long, default_value_t = 10)]
        reps: usize,
    },
    /// Split a dataset into train and query files.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        stratified: bool,
        /// Defaults to the input's directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn load_train(path: &Path) -> Result<Dataset> {
    parse_dataset(&read(path)?).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn load_queries(path: &Path) -> Result<Dataset> {
    parse_query_dataset(&read(path)?).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            input,
            variant,
            metric,
            k,
            kmax,
            model,
        } => {
            let data = load_train(&input)?;
            let forest = match variant {
                Variant::Cg => {
                    if k.is_some() || kmax.is_some() {
                        bail!("--k and --kmax only apply to --variant knn");
                    }
                    train_cg(&data, metric)?
                }
                Variant::Knn => match k {
                    Some(k) => train_knn(&data, k, metric)?,
                    None => train_knn_best(&data, kmax.unwrap_or(DEFAULT_K_MAX), metric)?.1,
                },
            };
            save_model(&forest, &model)?;
            print!(
                "trained {} forest: {} nodes, {} prototypes",
                forest.variant().name(),
                forest.len(),
                forest.prototypes().len()
            );
            match forest.k() {
                Some(k) => println!(", k = {k}"),
                None => println!(),
            }
        }
        Command::Rank {
            model,
            queries,
            top,
            output,
        } => {
            if top == 0 {
                bail!("--top must be positive");
            }
            let forest = load_model(&model)?;
            let queries = load_queries(&queries)?;
            let lists = queries
                .samples()
                .iter()
                .map(|q| rank_opf(&forest, q, top))
                .collect::<opfr::Result<Vec<RankingList>>>()?;
            let mut out = create(&output)?;
            write_rankings_csv(&mut out, &lists, forest.samples())?;
            out.flush().map_err(|e| anyhow!("{}: {e}", output.display()))?;
            println!("ranked {} queries", lists.len());
        }
        Command::Evaluate {
            rankings,
            queries,
            train,
        } => {
            let train = load_train(&train)?;
            let queries = load_queries(&queries)?;
            let text = read(&rankings)?;
            let grouped = read_rankings_csv(text.as_bytes())
                .map_err(|e| anyhow!("{}: {e}", rankings.display()))?;
            if grouped.is_empty() {
                bail!("{}: no rankings", rankings.display());
            }
            let mut by_query: BTreeMap<u64, Vec<u8>> = BTreeMap::new();
            for (qid, rows) in grouped {
                let label = queries
                    .label_of(qid)
                    .ok_or_else(|| anyhow!("query {qid} is not in the query set"))?;
                let rel = rows
                    .iter()
                    .map(|row| {
                        train
                            .label_of(row.candidate_id)
                            .map(|l| u8::from(l == label))
                            .ok_or_else(|| anyhow!("candidate {} is not in the train set", row.candidate_id))
                    })
                    .collect::<Result<Vec<u8>>>()?;
                if by_query.insert(qid, rel).is_some() {
                    bail!("rankings for query {qid} are not contiguous");
                }
            }
            let n = by_query.len() as f64;
            let (mut ndcg_sum, mut ap_sum, mut prec_sum) = (0.0, 0.0, 0.0);
            for rel in by_query.into_values() {
                let rel = RelevanceVector(rel);
                ndcg_sum += ndcg(&rel);
                ap_sum += average_precision(&rel);
                prec_sum += precision_at(&rel, rel.len())?;
            }
            println!("queries {n}");
            println!("ndcg {}", ndcg_sum / n);
            println!("map {}", ap_sum / n);
            println!("precision {}", prec_sum / n);
        }
        Command::Experiment { config, seed, out } => {
            let mut cfg = ExperimentConfig::from_json(&read(&config)?)
                .map_err(|e| anyhow!("{}: {e}", config.display()))?;
            if let Some(seed) = seed {
                cfg.base_seed = seed;
            }
            let base = config.parent().unwrap_or(Path::new(""));
            for ds in &mut cfg.datasets {
                if ds.path.is_relative() {
                    ds.path = base.join(&ds.path);
                }
            }
            let report = run_experiment(&cfg)?;
            std::fs::create_dir_all(&out).map_err(|e| anyhow!("{}: {e}", out.display()))?;

            let mut table = Vec::new();
            emit_report(&report, ReportFormat::Table, &mut table)?;
            std::fs::write(out.join("report.txt"), &table)?;
            emit_report(&report, ReportFormat::Csv, create(&out.join("report.csv"))?)?;
            emit_significance_csv(&report, create(&out.join("significance.csv"))?)?;
            if cfg.timing {
                emit_timing_csv(&report, create(&out.join("timing.csv"))?)?;
            }
            std::io::stdout().write_all(&table)?;
        }
        Command::Benchmark {
            model,
            queries,
            top,
            reps,
        } => {
            if top == 0 {
                bail!("--top must be positive");
            }
            let forest = load_model(&model)?;
            let queries = load_queries(&queries)?;
            let rankers = [
                Ranker::Forest(&forest),
                Ranker::Distance {
                    train: forest.samples(),
                    metric: forest.metric(),
                },
            ];
            println!("technique,queries,reps,mean_seconds,min_seconds,max_seconds");
            for ranker in rankers {
                let stats = benchmark(ranker, &queries, top, reps)?;
                println!(
                    "{},{},{},{},{},{}",
                    ranker.name(),
                    queries.len(),
                    reps,
                    stats.mean,
                    stats.min,
                    stats.max
                );
            }
        }
        Command::Split {
            input,
            fraction,
            seed,
            stratified,
            out_dir,
        } => {
            let data = load_train(&input)?;
            let pair = split_dataset(&data, fraction, seed, stratified)?;
            let dir = out_dir
                .or_else(|| input.parent().map(Path::to_path_buf))
                .unwrap_or_default();
            let stem = input
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "data".into());
            let train_path = dir.join(format!("{stem}.train.ds"));
            std::fs::write(&train_path, write_dataset(&pair.train)?)
                .map_err(|e| anyhow!("{}: {e}", train_path.display()))?;
            println!("{} ({} samples)", train_path.display(), pair.train.len());
            if pair.queries.is_empty() {
                log::warn!("split left no query samples; no query file written");
            } else {
                let query_path = dir.join(format!("{stem}.test.ds"));
                std::fs::write(&query_path, write_dataset(&pair.queries)?)
                    .map_err(|e| anyhow!("{}: {e}", query_path.display()))?;
                println!("{} ({} samples)", query_path.display(), pair.queries.len());
            }
        }
    }
    Ok(())
}
