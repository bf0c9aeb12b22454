//! Binary-relevance retrieval metrics.
//!
//! A candidate is relevant when it shares the query's class. Positions are
//! 1-based and discounts use `log2(i + 1)`.

mod wilcoxon;

pub use wilcoxon::{wilcoxon_signed_rank, wilcoxon_signed_rank_with, PValueMethod, SignificanceResult, EXACT_MAX_N};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::ranking::RankingList;

/// Relevance of each ranked position, 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RelevanceVector(pub Vec<u8>);

impl RelevanceVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn prefix(&self, r: usize) -> RelevanceVector {
        RelevanceVector(self.0.iter().take(r).copied().collect())
    }

    fn relevant(&self) -> usize {
        self.0.iter().filter(|&&r| r == 1).count()
    }
}

impl From<Vec<u8>> for RelevanceVector {
    fn from(v: Vec<u8>) -> Self {
        RelevanceVector(v)
    }
}

pub fn judge_relevance(
    ranking: &RankingList,
    query_label: u32,
    train: &Dataset,
) -> Result<RelevanceVector> {
    ranking
        .candidate_ids()
        .map(|id| {
            train
                .label_of(id)
                .map(|label| u8::from(label == query_label))
                .ok_or(Error::UnknownCandidate(id))
        })
        .collect::<Result<Vec<u8>>>()
        .map(RelevanceVector)
}

/// `sum (2^rel_i - 1) / log2(i + 1)` over 1-based positions.
pub fn dcg(rel: &RelevanceVector) -> f64 {
    rel.0
        .iter()
        .enumerate()
        .map(|(i, &r)| (2f64.powi(r as i32) - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

/// DCG over the DCG of the same judgments sorted relevant-first. Zero when
/// nothing is relevant.
pub fn ndcg(rel: &RelevanceVector) -> f64 {
    let mut ideal = rel.0.clone();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let ideal = dcg(&RelevanceVector(ideal));
    if ideal == 0.0 {
        0.0
    } else {
        dcg(rel) / ideal
    }
}

/// Fraction of relevant candidates among the first `r`.
pub fn precision_at(rel: &RelevanceVector, r: usize) -> Result<f64> {
    if r == 0 || r > rel.len() {
        return Err(Error::InvalidConfig(format!(
            "precision cutoff {r} outside 1..={}",
            rel.len()
        )));
    }
    Ok(rel.prefix(r).relevant() as f64 / r as f64)
}

/// Mean of P@r over the positions holding a relevant candidate. Zero when
/// nothing is relevant.
pub fn average_precision(rel: &RelevanceVector) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, &r) in rel.0.iter().enumerate() {
        if r == 1 {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    if hits == 0 {
        0.0
    } else {
        sum / hits as f64
    }
}

pub fn mean_average_precision(aps: &[f64]) -> Result<f64> {
    if aps.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}
