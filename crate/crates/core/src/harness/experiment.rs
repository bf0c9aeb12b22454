use std::fmt;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{holdout_runs, parse_dataset, Dataset, SplitPair};
use crate::error::{Error, Result};
use crate::evaluation::{
    average_precision, judge_relevance, ndcg, wilcoxon_signed_rank, SignificanceResult,
};
use crate::forest::TrainedForest;
use crate::harness::bench::Ranker;
use crate::metricspace::Metric;
use crate::opf_cg::train_cg;
use crate::opf_knn::{train_knn_best, DEFAULT_K_MAX};
use crate::ranking::RankingList;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Technique {
    #[serde(rename = "cg-opf")]
    CgOpf,
    #[serde(rename = "knn-opf")]
    KnnOpf,
    #[serde(rename = "distance")]
    Distance,
}

impl Technique {
    pub fn name(self) -> &'static str {
        match self {
            Technique::CgOpf => "cg-opf",
            Technique::KnnOpf => "knn-opf",
            Technique::Distance => "distance",
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Ndcg,
    Map,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Ndcg => "ndcg",
            MetricKind::Map => "map",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    pub path: PathBuf,
    #[serde(default)]
    pub metric: Metric,
}

fn default_fractions() -> Vec<f64> {
    vec![0.25, 0.5, 0.75]
}
fn default_top_r() -> Vec<usize> {
    vec![10, 15, 20]
}
fn default_runs() -> usize {
    10
}
fn default_k_max() -> usize {
    DEFAULT_K_MAX
}
fn default_alpha() -> f64 {
    0.05
}

/// Experiment description, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSpec>,
    pub techniques: Vec<Technique>,
    #[serde(default = "default_fractions")]
    pub train_fractions: Vec<f64>,
    #[serde(default = "default_top_r")]
    pub top_r: Vec<usize>,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub stratified: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.techniques.is_empty() {
            return bad("no techniques");
        }
        if self.train_fractions.is_empty() {
            return bad("no train fractions");
        }
        if self.train_fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return bad("train fractions must lie in (0, 1)");
        }
        if self.top_r.is_empty() || self.top_r.contains(&0) {
            return bad("top_r values must be positive");
        }
        if self.n_runs == 0 {
            return bad("n_runs must be positive");
        }
        if self.k_max == 0 {
            return bad("k_max must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        let mut techniques = self.techniques.clone();
        techniques.sort();
        techniques.dedup();
        if techniques.len() != self.techniques.len() {
            return bad("duplicate technique");
        }
        Ok(())
    }
}

/// A parsed dataset with the name and metric it runs under.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub name: String,
    pub metric: Metric,
    pub data: Dataset,
}

/// Metrics for one (dataset, fraction, technique, top-r) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub dataset: String,
    pub train_fraction: f64,
    pub technique: Technique,
    pub top_r: usize,
    /// Per-run mean over that run's queries.
    pub ndcg_runs: Vec<f64>,
    pub map_runs: Vec<f64>,
    pub ndcg_mean: f64,
    pub map_mean: f64,
}

impl CellResult {
    pub fn runs(&self, metric: MetricKind) -> &[f64] {
        match metric {
            MetricKind::Ndcg => &self.ndcg_runs,
            MetricKind::Map => &self.map_runs,
        }
    }

    pub fn mean(&self, metric: MetricKind) -> f64 {
        match metric {
            MetricKind::Ndcg => self.ndcg_mean,
            MetricKind::Map => self.map_mean,
        }
    }
}

/// Paired comparison of two techniques over the per-run means. `result`
/// is `None` when every paired difference is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceRow {
    pub dataset: String,
    pub train_fraction: f64,
    pub top_r: usize,
    pub metric: MetricKind,
    pub a: Technique,
    pub b: Technique,
    pub result: Option<SignificanceResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub dataset: String,
    pub train_fraction: f64,
    pub technique: Technique,
    /// Seconds spent ranking every query of a run, per run.
    pub ranking_seconds: Vec<f64>,
    /// Seconds spent training, per run. Zero for the distance baseline.
    pub training_seconds: Vec<f64>,
    /// k picked per run by the k-nn variant.
    pub selected_k: Vec<usize>,
}

impl TimingRow {
    pub fn mean_ranking_seconds(&self) -> f64 {
        mean(&self.ranking_seconds)
    }

    pub fn mean_training_seconds(&self) -> f64 {
        mean(&self.training_seconds)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
    pub significance: Vec<SignificanceRow>,
    pub timings: Vec<TimingRow>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Loads every dataset named in `cfg` and runs the protocol.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut loaded = Vec::with_capacity(cfg.datasets.len());
    for spec in &cfg.datasets {
        let text = std::fs::read_to_string(&spec.path).map_err(|e| Error::io(&spec.path, e))?;
        let data = parse_dataset(&text).map_err(|e| e.context(format!("dataset {}", spec.name)))?;
        loaded.push(LoadedDataset {
            name: spec.name.clone(),
            metric: spec.metric,
            data,
        });
    }
    run_experiment_on(cfg, &loaded)
}

struct RunOutcome {
    /// Indexed by position in `cfg.top_r`.
    ndcg: Vec<f64>,
    map: Vec<f64>,
    ranking_seconds: f64,
    training_seconds: f64,
    k: Option<usize>,
}

/// Runs the protocol over already-parsed datasets; `cfg.datasets` is only
/// echoed into the report.
pub fn run_experiment_on(cfg: &ExperimentConfig, datasets: &[LoadedDataset]) -> Result<ExperimentReport> {
    cfg.validate()?;
    if datasets.is_empty() {
        return Err(Error::InvalidConfig("no datasets".into()));
    }
    let r_max = *cfg.top_r.iter().max().expect("validated nonempty");
    let mut cells = Vec::new();
    let mut significance = Vec::new();
    let mut timings = Vec::new();

    for ds in datasets {
        for &fraction in &cfg.train_fractions {
            let where_ = format!("dataset {}, fraction {fraction}", ds.name);
            let runs = holdout_runs(&ds.data, fraction, cfg.base_seed, cfg.n_runs, cfg.stratified)
                .map_err(|e| e.context(where_.clone()))?;

            let mut block: Vec<CellResult> = Vec::new();
            for &technique in &cfg.techniques {
                let mut outcomes = Vec::with_capacity(runs.len());
                for (i, split) in runs.iter().enumerate() {
                    let outcome = run_once(cfg, ds.metric, technique, split, r_max).map_err(|e| {
                        e.context(format!("{where_}, run {i}, technique {technique}"))
                    })?;
                    outcomes.push(outcome);
                }
                for (ri, &top_r) in cfg.top_r.iter().enumerate() {
                    let ndcg_runs: Vec<f64> = outcomes.iter().map(|o| o.ndcg[ri]).collect();
                    let map_runs: Vec<f64> = outcomes.iter().map(|o| o.map[ri]).collect();
                    block.push(CellResult {
                        dataset: ds.name.clone(),
                        train_fraction: fraction,
                        technique,
                        top_r,
                        ndcg_mean: mean(&ndcg_runs),
                        map_mean: mean(&map_runs),
                        ndcg_runs,
                        map_runs,
                    });
                }
                timings.push(TimingRow {
                    dataset: ds.name.clone(),
                    train_fraction: fraction,
                    technique,
                    ranking_seconds: outcomes.iter().map(|o| o.ranking_seconds).collect(),
                    training_seconds: outcomes.iter().map(|o| o.training_seconds).collect(),
                    selected_k: outcomes.iter().filter_map(|o| o.k).collect(),
                });
            }
            significance.extend(compare_techniques(cfg, &block)?);
            cells.extend(block);
        }
    }

    Ok(ExperimentReport {
        config: cfg.clone(),
        cells,
        significance,
        timings: if cfg.timing { timings } else { Vec::new() },
    })
}

fn run_once(
    cfg: &ExperimentConfig,
    metric: Metric,
    technique: Technique,
    split: &SplitPair,
    r_max: usize,
) -> Result<RunOutcome> {
    if split.queries.is_empty() {
        return Err(Error::InvalidConfig("split left no queries".into()));
    }
    let train_start = Instant::now();
    let mut k = None;
    let forest: Option<TrainedForest> = match technique {
        Technique::CgOpf => Some(train_cg(&split.train, metric)?),
        Technique::KnnOpf => {
            let (best_k, forest) = train_knn_best(&split.train, cfg.k_max, metric)?;
            k = Some(best_k);
            Some(forest)
        }
        Technique::Distance => None,
    };
    let training_seconds = match technique {
        Technique::Distance => 0.0,
        _ => train_start.elapsed().as_secs_f64(),
    };
    let ranker = match &forest {
        Some(f) => Ranker::Forest(f),
        None => Ranker::Distance {
            train: &split.train,
            metric,
        },
    };

    let rank_start = Instant::now();
    let lists: Vec<RankingList> = split
        .queries
        .samples()
        .iter()
        .map(|q| ranker.rank(q, r_max))
        .collect::<Result<_>>()?;
    let ranking_seconds = rank_start.elapsed().as_secs_f64();

    let n_queries = lists.len() as f64;
    let mut ndcg_means = Vec::with_capacity(cfg.top_r.len());
    let mut map_means = Vec::with_capacity(cfg.top_r.len());
    for &r in &cfg.top_r {
        let (mut ndcg_sum, mut ap_sum) = (0.0, 0.0);
        for (list, q) in lists.iter().zip(split.queries.samples()) {
            let rel = judge_relevance(&list.prefix(r), q.label, &split.train)?;
            ndcg_sum += ndcg(&rel);
            ap_sum += average_precision(&rel);
        }
        ndcg_means.push(ndcg_sum / n_queries);
        map_means.push(ap_sum / n_queries);
    }
    Ok(RunOutcome {
        ndcg: ndcg_means,
        map: map_means,
        ranking_seconds,
        training_seconds,
        k,
    })
}

fn compare_techniques(cfg: &ExperimentConfig, block: &[CellResult]) -> Result<Vec<SignificanceRow>> {
    let mut rows = Vec::new();
    for &top_r in &cfg.top_r {
        let cells: Vec<&CellResult> = block.iter().filter(|c| c.top_r == top_r).collect();
        for metric in [MetricKind::Ndcg, MetricKind::Map] {
            for i in 0..cells.len() {
                for j in (i + 1)..cells.len() {
                    let (a, b) = (cells[i], cells[j]);
                    let result = match wilcoxon_signed_rank(a.runs(metric), b.runs(metric), cfg.alpha) {
                        Ok(res) => Some(res),
                        Err(Error::NotApplicable) => None,
                        Err(e) => return Err(e),
                    };
                    rows.push(SignificanceRow {
                        dataset: a.dataset.clone(),
                        train_fraction: a.train_fraction,
                        top_r,
                        metric,
                        a: a.technique,
                        b: b.technique,
                        result,
                    });
                }
            }
        }
    }
    Ok(rows)
}
