use std::hint::black_box;
use std::time::Instant;

use crate::dataset::{Dataset, LabeledSample};
use crate::error::{Error, Result};
use crate::forest::{ForestVariant, TrainedForest};
use crate::metricspace::Metric;
use crate::ranking::{rank_distance, rank_opf, RankingList};

/// Anything that can rank a query against a training set.
#[derive(Debug, Clone, Copy)]
pub enum Ranker<'a> {
    Forest(&'a TrainedForest),
    Distance { train: &'a Dataset, metric: Metric },
}

impl Ranker<'_> {
    pub fn rank(&self, query: &LabeledSample, r: usize) -> Result<RankingList> {
        match *self {
            Ranker::Forest(forest) => rank_opf(forest, query, r),
            Ranker::Distance { train, metric } => rank_distance(train, query, r, metric),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Ranker::Forest(f) => match f.variant() {
                ForestVariant::CompleteGraph => "cg-opf",
                ForestVariant::Knn { .. } => "knn-opf",
            },
            Ranker::Distance { .. } => "distance",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkStats {
    /// Seconds to rank every query once, one entry per repetition.
    pub timings: Vec<f64>,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Times full passes of ranking `queries` at cutoff `r`. One untimed
/// warm-up pass runs first.
pub fn benchmark(
    ranker: Ranker<'_>,
    queries: &Dataset,
    r: usize,
    repetitions: usize,
) -> Result<BenchmarkStats> {
    if repetitions == 0 {
        return Err(Error::InvalidConfig("repetitions must be positive".into()));
    }
    let pass = || -> Result<()> {
        for q in queries.samples() {
            black_box(ranker.rank(q, r)?);
        }
        Ok(())
    };
    pass()?;
    let mut timings = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        pass()?;
        timings.push(start.elapsed().as_secs_f64());
    }
    let mean = timings.iter().sum::<f64>() / timings.len() as f64;
    let min = timings.iter().copied().fold(f64::INFINITY, f64::min);
    let max = timings.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(BenchmarkStats {
        timings,
        mean,
        min,
        max,
    })
}
