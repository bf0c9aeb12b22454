//! k-nn graph OPF.
//!
//! Nodes are weighted by a Gaussian density over their k nearest neighbors
//! and compete under `f_min`: a path is worth the smallest density along it,
//! and each node keeps the largest value any root can offer. Roots are the
//! density maxima, found as the nodes that are still unconquered when the
//! max-first queue reaches them.
//!
//! Conquest runs over the symmetric closure of the k-nn relation, so that a
//! plateau or a maximum is reached from either side of an arc.

use std::collections::BinaryHeap;
use std::f64::consts::PI;

use log::warn;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::{
    Classification, DensityField, ForestVariant, PrototypeSet, QueueEntry, TrainedForest,
};
use crate::metricspace::Metric;

/// Default upper bound for the k search.
pub const DEFAULT_K_MAX: usize = 20;

/// Each node's nearest neighbors, ascending by distance then node index.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnAdjacency {
    /// Effective k, after clamping to `n - 1`.
    pub k: usize,
    /// `neighbors[u]` holds `(node, distance)` pairs.
    pub neighbors: Vec<Vec<(usize, f64)>>,
    /// Longest stored arc.
    pub d_max: f64,
}

impl KnnAdjacency {
    /// Undirected arcs: `v` is adjacent to `u` when either lists the other.
    pub fn symmetric(&self) -> Vec<Vec<usize>> {
        let mut sym: Vec<Vec<usize>> = vec![Vec::new(); self.neighbors.len()];
        for (u, list) in self.neighbors.iter().enumerate() {
            for &(v, _) in list {
                sym[u].push(v);
                sym[v].push(u);
            }
        }
        for list in &mut sym {
            list.sort_unstable();
            list.dedup();
        }
        sym
    }
}

/// `(node, distance)` for the `k` points of `train` closest to `features`,
/// skipping `exclude`.
fn nearest(
    train: &Dataset,
    metric: Metric,
    features: &[f64],
    k: usize,
    exclude: Option<usize>,
) -> Vec<(usize, f64)> {
    let mut all: Vec<(usize, f64)> = train
        .samples()
        .iter()
        .enumerate()
        .filter(|(v, _)| Some(*v) != exclude)
        .map(|(v, s)| (v, metric.eval(&s.features, features)))
        .collect();
    let by_distance = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if k < all.len() {
        all.select_nth_unstable_by(k, by_distance);
        all.truncate(k);
    }
    all.sort_by(by_distance);
    all
}

pub fn knn_adjacency(train: &Dataset, k: usize, metric: Metric) -> Result<KnnAdjacency> {
    let n = train.len();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("k must be positive".into()));
    }
    let k_eff = if k > n - 1 {
        warn!("k = {k} exceeds n - 1 = {}; clamping", n - 1);
        n - 1
    } else {
        k
    };
    let neighbors: Vec<Vec<(usize, f64)>> = train
        .samples()
        .iter()
        .enumerate()
        .map(|(u, s)| nearest(train, metric, &s.features, k_eff, Some(u)))
        .collect();
    let d_max = neighbors
        .iter()
        .flat_map(|l| l.iter().map(|&(_, d)| d))
        .fold(0.0, f64::max);
    Ok(KnnAdjacency {
        k: k_eff,
        neighbors,
        d_max,
    })
}

/// Density of a point given the distances to its k nearest neighbors:
/// `1/sqrt(2 pi sigma^2 k) * sum exp(-d / (2 sigma^2))`.
fn gaussian_density(distances: impl Iterator<Item = f64>, sigma: f64, k: usize) -> f64 {
    let two_var = 2.0 * sigma * sigma;
    let norm = 1.0 / (PI * two_var * k as f64).sqrt();
    norm * distances.map(|d| (-d / two_var).exp()).sum::<f64>()
}

/// Per-node density with `sigma = d_max / 3`. The exponent takes the plain
/// distance, not its square.
pub fn compute_density(adj: &KnnAdjacency) -> Result<DensityField> {
    if adj.d_max <= 0.0 {
        return Err(Error::DegenerateDensity);
    }
    let sigma = adj.d_max / 3.0;
    let rho = adj
        .neighbors
        .iter()
        .map(|l| gaussian_density(l.iter().map(|&(_, d)| d), sigma, adj.k))
        .collect();
    Ok(DensityField {
        rho,
        sigma,
        d_max: adj.d_max,
        k: adj.k,
    })
}

pub fn train_knn(train: &Dataset, k: usize, metric: Metric) -> Result<TrainedForest> {
    let adj = knn_adjacency(train, k, metric)?;
    let density = compute_density(&adj)?;
    let arcs = adj.symmetric();
    let rho = &density.rho;
    let n = train.len();

    let mut cost: Vec<f64> = rho.iter().map(|r| r - 1.0).collect();
    let mut pred = vec![None; n];
    let mut root: Vec<usize> = (0..n).collect();
    let mut settled = vec![false; n];
    let mut prototypes = PrototypeSet::default();
    let mut order = Vec::with_capacity(n);
    let mut heap: BinaryHeap<QueueEntry> = (0..n)
        .map(|v| QueueEntry {
            key: cost[v],
            node: v,
            maximize: true,
        })
        .collect();

    while let Some(QueueEntry { key, node: s, .. }) = heap.pop() {
        if settled[s] || key != cost[s] {
            continue;
        }
        if pred[s].is_none() {
            // Nobody conquered it: a density maximum (or the first node of a
            // plateau) becomes a root.
            cost[s] = rho[s];
            prototypes.insert(s);
        }
        settled[s] = true;
        order.push(s);
        for &t in &arcs[s] {
            if settled[t] {
                continue;
            }
            let offered = cost[s].min(rho[t]);
            if offered > cost[t] {
                cost[t] = offered;
                pred[t] = Some(s);
                root[t] = root[s];
                heap.push(QueueEntry {
                    key: offered,
                    node: t,
                    maximize: true,
                });
            }
        }
    }

    Ok(TrainedForest::assemble(
        ForestVariant::Knn {
            k: adj.k,
            density,
        },
        metric,
        train.clone(),
        cost,
        pred,
        root,
        prototypes,
        order,
    ))
}

/// Picks k in `1..=min(k_max, n-1)` by training accuracy when the training
/// set classifies itself. Ties go to the smallest k. Values of k whose
/// density degenerates are skipped.
pub fn select_k(train: &Dataset, k_max: usize, metric: Metric) -> Result<usize> {
    train_knn_best(train, k_max, metric).map(|(k, _)| k)
}

/// [`select_k`] that also hands back the forest trained with the winner.
pub fn train_knn_best(
    train: &Dataset,
    k_max: usize,
    metric: Metric,
) -> Result<(usize, TrainedForest)> {
    if k_max == 0 {
        return Err(Error::InvalidConfig("k_max must be positive".into()));
    }
    let n = train.len();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let mut best: Option<(usize, usize, TrainedForest)> = None;
    let mut last_err = None;
    for k in 1..=k_max.min(n - 1) {
        let forest = match train_knn(train, k, metric) {
            Ok(f) => f,
            Err(e @ Error::DegenerateDensity) => {
                last_err = Some(e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut correct = 0;
        for s in train.samples() {
            if classify_knn(&forest, &s.features)?.label == s.label {
                correct += 1;
            }
        }
        if best.as_ref().is_none_or(|(_, c, _)| correct > *c) {
            best = Some((k, correct, forest));
        }
    }
    match best {
        Some((k, _, forest)) => Ok((k, forest)),
        None => Err(last_err.unwrap_or(Error::DegenerateDensity)),
    }
}

fn require_knn(forest: &TrainedForest) -> Result<(usize, &DensityField)> {
    match forest.variant() {
        ForestVariant::Knn { k, density } => Ok((*k, density)),
        other => Err(Error::WrongVariant {
            expected: "knn",
            found: other.name(),
        }),
    }
}

/// The query's k nearest training nodes with the value each offers,
/// `min(C(v), rho(q))`, where `rho(q)` reuses the trained sigma.
fn query_offers(forest: &TrainedForest, features: &[f64]) -> Result<Vec<(usize, f64)>> {
    let (k, density) = require_knn(forest)?;
    forest.check_dim(features)?;
    let near = nearest(&forest.samples, forest.metric, features, k, None);
    let rho_q = gaussian_density(near.iter().map(|&(_, d)| d), density.sigma, k);
    Ok(near
        .into_iter()
        .map(|(v, _)| (v, forest.cost[v].min(rho_q)))
        .collect())
}

/// Assigns the query to the neighbor offering the largest value. Ties keep
/// the earliest settled node.
pub fn classify_knn(forest: &TrainedForest, features: &[f64]) -> Result<Classification> {
    let offers = query_offers(forest, features)?;
    let (winner, value) = offers
        .iter()
        .copied()
        .reduce(|best, cand| {
            if cand.1 > best.1 || (cand.1 == best.1 && forest.rank[cand.0] < forest.rank[best.0]) {
                cand
            } else {
                best
            }
        })
        .expect("k is at least 1");
    Ok(Classification {
        label: forest.label[winner],
        cost: value,
        conqueror: forest.node_id(winner),
    })
}

/// `(id, min(C(v), rho(q)))` for the query's k nearest training nodes,
/// nearest first. Larger values mean stronger connection.
pub fn offered_costs_knn(forest: &TrainedForest, features: &[f64]) -> Result<Vec<(u64, f64)>> {
    Ok(query_offers(forest, features)?
        .into_iter()
        .map(|(v, value)| (forest.node_id(v), value))
        .collect())
}
