//! Top-r ranking lists from forest offers and from plain distances.
//!
//! A trained forest ranks a query by the costs its training nodes offer:
//! ascending for the complete graph (lower cost, stronger connection) and
//! descending for k-nn (higher value, stronger connection). The distance
//! baseline sorts training samples by distance to the query.

use std::cmp::Ordering;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, LabeledSample};
use crate::error::{Error, Result};
use crate::forest::{ForestVariant, TrainedForest};
use crate::metricspace::Metric;
use crate::{opf_cg, opf_knn};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    LowerIsBetter,
    HigherIsBetter,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankEntry {
    pub candidate_id: u64,
    pub score: f64,
    /// 1-based position.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankingList {
    pub query_id: u64,
    pub entries: Vec<RankEntry>,
    pub polarity: Polarity,
    /// Set when fewer candidates existed than were requested.
    pub truncated: bool,
}

impl RankingList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn candidate_ids(&self) -> impl Iterator<Item = u64> + '_ {
        self.entries.iter().map(|e| e.candidate_id)
    }

    /// The first `r` entries as a list of its own.
    pub fn prefix(&self, r: usize) -> RankingList {
        RankingList {
            query_id: self.query_id,
            entries: self.entries.iter().take(r).copied().collect(),
            polarity: self.polarity,
            truncated: self.truncated || r > self.entries.len(),
        }
    }

    fn build(
        query_id: u64,
        mut scored: Vec<(u64, f64, usize)>,
        polarity: Polarity,
        r: usize,
    ) -> Self {
        // (candidate id, score, tie-break key)
        scored.sort_by(|a, b| {
            let by_score = match polarity {
                Polarity::LowerIsBetter => a.1.total_cmp(&b.1),
                Polarity::HigherIsBetter => b.1.total_cmp(&a.1),
            };
            by_score.then(a.2.cmp(&b.2)).then(a.0.cmp(&b.0))
        });
        let truncated = scored.len() < r;
        let entries = scored
            .into_iter()
            .take(r)
            .enumerate()
            .map(|(i, (candidate_id, score, _))| RankEntry {
                candidate_id,
                score,
                rank: i + 1,
            })
            .collect();
        RankingList {
            query_id,
            entries,
            polarity,
            truncated,
        }
    }
}

/// Ranks the training nodes of `forest` by the cost they offer to `query`.
///
/// Equal offers are ordered by the nodes' settlement order, the same
/// tie-break the classifiers use, so rank 1 is always the conqueror.
pub fn rank_opf(forest: &TrainedForest, query: &LabeledSample, r: usize) -> Result<RankingList> {
    if r < 1 {
        return Err(Error::InvalidTopR);
    }
    let (offers, polarity) = match forest.variant() {
        ForestVariant::CompleteGraph => (
            opf_cg::offered_costs_cg(forest, &query.features)?,
            Polarity::LowerIsBetter,
        ),
        ForestVariant::Knn { .. } => (
            opf_knn::offered_costs_knn(forest, &query.features)?,
            Polarity::HigherIsBetter,
        ),
    };
    let samples = forest.samples();
    let scored = offers
        .into_iter()
        .map(|(id, score)| {
            let node = samples.index_of(id).expect("offers come from training nodes");
            (id, score, forest.rank[node])
        })
        .collect();
    Ok(RankingList::build(query.id, scored, polarity, r))
}

/// Ranks training samples by ascending distance to `query`, ties by id.
pub fn rank_distance(
    train: &Dataset,
    query: &LabeledSample,
    r: usize,
    metric: Metric,
) -> Result<RankingList> {
    if r < 1 {
        return Err(Error::InvalidTopR);
    }
    if query.features.len() != train.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            found: query.features.len(),
        });
    }
    let scored = train
        .samples()
        .iter()
        .map(|s| (s.id, metric.eval(&s.features, &query.features), 0))
        .collect();
    Ok(RankingList::build(query.id, scored, Polarity::LowerIsBetter, r))
}

/// One row of the ranking CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub query_id: u64,
    pub rank: usize,
    pub candidate_id: u64,
    pub score: f64,
    pub candidate_label: u32,
}

/// Writes rankings as CSV with header
/// `query_id,rank,candidate_id,score,candidate_label`, rows in list order.
pub fn write_rankings_csv<W: Write>(
    out: W,
    lists: &[RankingList],
    train: &Dataset,
) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["query_id", "rank", "candidate_id", "score", "candidate_label"])?;
    for list in lists {
        for e in &list.entries {
            let candidate_label = train
                .label_of(e.candidate_id)
                .ok_or(Error::UnknownCandidate(e.candidate_id))?;
            writer.write_record([
                list.query_id.to_string(),
                e.rank.to_string(),
                e.candidate_id.to_string(),
                e.score.to_string(),
                candidate_label.to_string(),
            ])?;
        }
    }
    writer.flush().map_err(|e| Error::io("<rankings>", e))?;
    Ok(())
}

/// Reads ranking CSV rows back, grouping consecutive rows by query.
pub fn read_rankings_csv<R: Read>(input: R) -> Result<Vec<(u64, Vec<RankingRow>)>> {
    let mut reader = csv::Reader::from_reader(input);
    let mut grouped: Vec<(u64, Vec<RankingRow>)> = Vec::new();
    for row in reader.deserialize::<RankingRow>() {
        let row = row?;
        match grouped.last_mut() {
            Some((q, rows)) if *q == row.query_id => rows.push(row),
            _ => grouped.push((row.query_id, vec![row])),
        }
    }
    for (_, rows) in &mut grouped {
        rows.sort_by_key(|r| r.rank);
    }
    Ok(grouped)
}

/// Whether `scores` are monotone in the direction `polarity` asks for.
pub fn is_monotone(scores: &[f64], polarity: Polarity) -> bool {
    scores.windows(2).all(|w| match polarity {
        Polarity::LowerIsBetter => w[0].total_cmp(&w[1]) != Ordering::Greater,
        Polarity::HigherIsBetter => w[0].total_cmp(&w[1]) != Ordering::Less,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::parse_dataset;
    use crate::opf_cg::{classify_cg, train_cg};
    use crate::opf_knn::{classify_knn, train_knn};
    use proptest::prelude::*;

    fn toy() -> Dataset {
        parse_dataset("4 2 1\n0 0 0.0\n1 0 1.0\n2 1 3.0\n3 1 4.0\n").unwrap()
    }

    fn query(x: f64) -> LabeledSample {
        LabeledSample::new(99, 0, vec![x])
    }

    fn ids(list: &RankingList) -> Vec<u64> {
        list.candidate_ids().collect()
    }

    fn scores(list: &RankingList) -> Vec<f64> {
        list.entries.iter().map(|e| e.score).collect()
    }

    #[test]
    fn toy_cg_ranking() {
        let forest = train_cg(&toy(), Metric::Euclidean).unwrap();
        let list = rank_opf(&forest, &query(2.0), 4).unwrap();
        assert_eq!(ids(&list), vec![1, 2, 0, 3]);
        assert_eq!(scores(&list), vec![1.0, 1.0, 2.0, 2.0]);
        assert_eq!(list.entries.iter().map(|e| e.rank).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        assert_eq!(list.polarity, Polarity::LowerIsBetter);
        assert!(!list.truncated);

        let top1 = rank_opf(&forest, &query(2.0), 1).unwrap();
        assert_eq!(ids(&top1), vec![classify_cg(&forest, &[2.0]).unwrap().conqueror]);
    }

    #[test]
    fn knn_ranking_truncates_to_k() {
        let forest = train_knn(&toy(), 1, Metric::Euclidean).unwrap();
        let list = rank_opf(&forest, &query(2.0), 10).unwrap();
        assert_eq!(list.len(), 1);
        assert!(list.truncated);
        assert_eq!(list.polarity, Polarity::HigherIsBetter);
    }

    #[test]
    fn toy_distance_ranking() {
        let list = rank_distance(&toy(), &query(2.0), 4, Metric::Euclidean).unwrap();
        assert_eq!(ids(&list), vec![1, 2, 0, 3]);
        assert_eq!(scores(&list), vec![1.0, 1.0, 2.0, 2.0]);
        let exact = rank_distance(&toy(), &query(3.0), 2, Metric::Euclidean).unwrap();
        assert_eq!(exact.entries[0].candidate_id, 2);
        assert_eq!(exact.entries[0].score, 0.0);
    }

    #[test]
    fn rejects_zero_r_and_bad_dimension() {
        let forest = train_cg(&toy(), Metric::Euclidean).unwrap();
        assert!(matches!(rank_opf(&forest, &query(1.0), 0), Err(Error::InvalidTopR)));
        assert!(matches!(rank_distance(&toy(), &query(1.0), 0, Metric::Euclidean), Err(Error::InvalidTopR)));
        let wide = LabeledSample::new(1, 0, vec![1.0, 2.0]);
        assert!(matches!(rank_opf(&forest, &wide, 2), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            rank_distance(&toy(), &wide, 2, Metric::Euclidean),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let train = toy();
        let forest = train_cg(&train, Metric::Euclidean).unwrap();
        let lists = vec![
            rank_opf(&forest, &LabeledSample::new(7, 0, vec![2.0]), 3).unwrap(),
            rank_opf(&forest, &LabeledSample::new(8, 1, vec![3.7]), 3).unwrap(),
        ];
        let mut buf = Vec::new();
        write_rankings_csv(&mut buf, &lists, &train).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("query_id,rank,candidate_id,score,candidate_label\n7,1,1,1,0\n"));
        let back = read_rankings_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 2);
        for ((q, rows), list) in back.iter().zip(&lists) {
            assert_eq!(*q, list.query_id);
            let round: Vec<(u64, f64)> = rows.iter().map(|r| (r.candidate_id, r.score)).collect();
            let orig: Vec<(u64, f64)> = list.entries.iter().map(|e| (e.candidate_id, e.score)).collect();
            assert_eq!(round, orig);
        }
    }

    fn fixture() -> impl Strategy<Value = (Dataset, Vec<Vec<f64>>)> {
        (6usize..24, 2u32..4).prop_flat_map(|(n, classes)| {
            (
                prop::collection::vec((0..classes, prop::collection::vec(-10.0f64..10.0, 2)), n),
                prop::collection::vec(prop::collection::vec(-12.0f64..12.0, 2), 1..6),
            )
                .prop_filter_map("need every class", move |(rows, queries)| {
                    let samples = rows
                        .into_iter()
                        .enumerate()
                        .map(|(i, (l, f))| LabeledSample::new(i as u64 * 3 + 1, l, f))
                        .collect();
                    Dataset::new(samples, classes).ok().map(|d| (d, queries))
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(60))]

        #[test]
        fn rank_one_is_the_conqueror((train, queries) in fixture()) {
            let cg = train_cg(&train, Metric::Euclidean).unwrap();
            let knn = train_knn(&train, 3, Metric::Euclidean).ok();
            for (i, q) in queries.iter().enumerate() {
                let sample = LabeledSample::new(1000 + i as u64, 0, q.clone());
                let list = rank_opf(&cg, &sample, 20).unwrap();
                prop_assert_eq!(list.entries[0].candidate_id, classify_cg(&cg, q).unwrap().conqueror);
                prop_assert!(is_monotone(&scores(&list), list.polarity));
                let top10 = rank_opf(&cg, &sample, 10).unwrap();
                prop_assert_eq!(&top10.entries[..], &list.entries[..top10.len()]);
                if let Some(knn) = &knn {
                    let list = rank_opf(knn, &sample, 20).unwrap();
                    prop_assert_eq!(list.entries[0].candidate_id, classify_knn(knn, q).unwrap().conqueror);
                    prop_assert!(is_monotone(&scores(&list), list.polarity));
                }
                let dist = rank_distance(&train, &sample, 20, Metric::Euclidean).unwrap();
                prop_assert!(is_monotone(&scores(&dist), Polarity::LowerIsBetter));
            }
        }

        #[test]
        fn rescaling_keeps_the_permutation((train, queries) in fixture(), c in 0.1f64..10.0) {
            let scale = |f: &[f64]| f.iter().map(|x| x * c).collect::<Vec<f64>>();
            let scaled_train = Dataset::new(
                train.samples().iter().map(|s| LabeledSample::new(s.id, s.label, scale(&s.features))).collect(),
                train.n_classes(),
            ).unwrap();
            for metric in [Metric::Euclidean, Metric::Manhattan] {
                let a = train_cg(&train, metric).unwrap();
                let b = train_cg(&scaled_train, metric).unwrap();
                for q in &queries {
                    let qa = LabeledSample::new(0, 0, q.clone());
                    let qb = LabeledSample::new(0, 0, scale(q));
                    prop_assert_eq!(ids(&rank_opf(&a, &qa, 50).unwrap()), ids(&rank_opf(&b, &qb, 50).unwrap()));
                    prop_assert_eq!(
                        ids(&rank_distance(&train, &qa, 50, metric).unwrap()),
                        ids(&rank_distance(&scaled_train, &qb, 50, metric).unwrap())
                    );
                }
            }
        }
    }
}
