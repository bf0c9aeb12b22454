//! Complete-graph OPF.
//!
//! Prototypes are the endpoints of minimum-spanning-tree edges that join
//! different classes. Training then runs a best-first competition from the
//! prototypes under the path cost `f_max` (largest arc weight on the path),
//! so every node ends up with the smallest bottleneck value reachable from
//! any prototype.

use std::collections::BinaryHeap;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::{Classification, ForestVariant, PrototypeSet, QueueEntry, TrainedForest};
use crate::metricspace::{ArcWeights, Metric};

/// Training knobs shared by both variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainOptions {
    /// Largest pairwise distance matrix, in bytes, that training may
    /// precompute. Larger training sets recompute distances on demand.
    pub memory_budget_bytes: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            memory_budget_bytes: 512 << 20,
        }
    }
}

/// An undirected MST edge between node indices `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MstEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Prim's algorithm on the complete graph.
///
/// Ties pick the smallest candidate node first, then the smallest partner
/// already in the tree, so the tree is fully determined by the input.
pub fn build_mst(train: &Dataset, metric: Metric) -> Result<Vec<MstEdge>> {
    build_mst_with(train, metric, &TrainOptions::default())
}

pub fn build_mst_with(train: &Dataset, metric: Metric, opts: &TrainOptions) -> Result<Vec<MstEdge>> {
    let n = train.len();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    let weights = ArcWeights::new(train.samples(), metric, opts.memory_budget_bytes);
    Ok(prim(n, &weights))
}

fn prim(n: usize, weights: &ArcWeights<'_>) -> Vec<MstEdge> {
    let mut in_tree = vec![false; n];
    let mut key = vec![f64::INFINITY; n];
    let mut partner = vec![usize::MAX; n];
    let mut edges = Vec::with_capacity(n - 1);

    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let mut next = usize::MAX;
        for v in 0..n {
            if in_tree[v] {
                continue;
            }
            let w = weights.get(current, v);
            if w < key[v] || (w == key[v] && current < partner[v]) {
                key[v] = w;
                partner[v] = current;
            }
            if next == usize::MAX || key[v] < key[next] {
                next = v;
            }
        }
        in_tree[next] = true;
        let p = partner[next];
        edges.push(MstEdge {
            a: p.min(next),
            b: p.max(next),
            weight: key[next],
        });
        current = next;
    }
    edges
}

/// Both endpoints of every MST edge whose endpoints disagree on the label.
pub fn elect_prototypes(mst: &[MstEdge], labels: &[u32]) -> Result<PrototypeSet> {
    let first = labels.first().ok_or(Error::TooFewSamples(0))?;
    if labels.iter().all(|l| l == first) {
        return Err(Error::SingleClassTraining);
    }
    let mut set = PrototypeSet::default();
    for e in mst {
        if labels[e.a] != labels[e.b] {
            set.insert(e.a);
            set.insert(e.b);
        }
    }
    Ok(set)
}

pub fn train_cg(train: &Dataset, metric: Metric) -> Result<TrainedForest> {
    train_cg_with(train, metric, &TrainOptions::default())
}

pub fn train_cg_with(train: &Dataset, metric: Metric, opts: &TrainOptions) -> Result<TrainedForest> {
    let n = train.len();
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    if train.classes_present() < 2 {
        return Err(Error::SingleClassTraining);
    }
    let weights = ArcWeights::new(train.samples(), metric, opts.memory_budget_bytes);
    let mst = prim(n, &weights);
    let prototypes = elect_prototypes(&mst, &train.labels())?;

    let mut cost = vec![f64::INFINITY; n];
    let mut pred = vec![None; n];
    let mut root: Vec<usize> = (0..n).collect();
    let mut settled = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut heap = BinaryHeap::with_capacity(n);

    for p in prototypes.iter() {
        cost[p] = 0.0;
        heap.push(QueueEntry {
            key: 0.0,
            node: p,
            maximize: false,
        });
    }

    while let Some(QueueEntry { key, node: s, .. }) = heap.pop() {
        if settled[s] || key != cost[s] {
            continue;
        }
        settled[s] = true;
        order.push(s);
        for t in 0..n {
            if settled[t] {
                continue;
            }
            let offered = cost[s].max(weights.get(s, t));
            if offered < cost[t] {
                cost[t] = offered;
                pred[t] = Some(s);
                root[t] = root[s];
                heap.push(QueueEntry {
                    key: offered,
                    node: t,
                    maximize: false,
                });
            }
        }
    }

    Ok(TrainedForest::assemble(
        ForestVariant::CompleteGraph,
        metric,
        train.clone(),
        cost,
        pred,
        root,
        prototypes,
        order,
    ))
}

fn require_cg(forest: &TrainedForest) -> Result<()> {
    match forest.variant() {
        ForestVariant::CompleteGraph => Ok(()),
        other => Err(Error::WrongVariant {
            expected: "cg",
            found: other.name(),
        }),
    }
}

/// Assigns the query to the training node minimizing `max(C(v), d(v, q))`.
///
/// Nodes are scanned in settlement order, which is nondecreasing in cost, so
/// the scan stops once `C(v)` alone reaches the best value. Ties keep the
/// earliest settled node.
pub fn classify_cg(forest: &TrainedForest, features: &[f64]) -> Result<Classification> {
    require_cg(forest)?;
    forest.check_dim(features)?;
    let samples = forest.samples.samples();
    let mut best = f64::INFINITY;
    let mut winner = forest.order[0];
    for &v in &forest.order {
        if forest.cost[v] >= best {
            break;
        }
        let offered = forest.cost[v].max(forest.metric.eval(&samples[v].features, features));
        if offered < best {
            best = offered;
            winner = v;
        }
    }
    Ok(Classification {
        label: forest.label[winner],
        cost: best,
        conqueror: forest.node_id(winner),
    })
}

/// Every training node's offer `max(C(v), d(v, q))`, in node order.
pub fn offered_costs_cg(forest: &TrainedForest, features: &[f64]) -> Result<Vec<(u64, f64)>> {
    require_cg(forest)?;
    forest.check_dim(features)?;
    Ok(forest
        .samples
        .samples()
        .iter()
        .enumerate()
        .map(|(v, s)| {
            let offered = forest.cost[v].max(forest.metric.eval(&s.features, features));
            (s.id, offered)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{parse_dataset, LabeledSample};
    use crate::metricspace::pairwise_matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy() -> Dataset {
        parse_dataset("4 2 1\n0 0 0.0\n1 0 1.0\n2 1 3.0\n3 1 4.0\n").unwrap()
    }

    fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize, classes: u32) -> Dataset {
        let samples = (0..n)
            .map(|i| {
                let label = if (i as u32) < classes {
                    i as u32
                } else {
                    rng.random_range(0..classes)
                };
                let features = (0..d).map(|_| rng.random_range(-10.0..10.0)).collect();
                LabeledSample::new(i as u64, label, features)
            })
            .collect();
        Dataset::new(samples, classes).unwrap()
    }

    fn weight_matrix(ds: &Dataset) -> Vec<Vec<f64>> {
        let m = pairwise_matrix(ds.samples(), Metric::Euclidean).unwrap();
        (0..ds.len()).map(|i| m.row(i).to_vec()).collect()
    }

    /// Minimum total weight over all spanning trees, by enumerating every
    /// (n-1)-subset of edges and keeping the acyclic ones.
    fn brute_force_mst_weight(w: &[Vec<f64>]) -> f64 {
        let n = w.len();
        let edges: Vec<(usize, usize)> =
            (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        let mut best = f64::INFINITY;
        let mut chosen = Vec::new();
        fn find(p: &mut [usize], x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        fn rec(
            start: usize,
            edges: &[(usize, usize)],
            chosen: &mut Vec<usize>,
            need: usize,
            w: &[Vec<f64>],
            best: &mut f64,
        ) {
            if chosen.len() == need {
                let mut parent: Vec<usize> = (0..w.len()).collect();
                let mut total = 0.0;
                for &e in chosen.iter() {
                    let (a, b) = edges[e];
                    let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                    if ra == rb {
                        return;
                    }
                    parent[ra] = rb;
                    total += w[a][b];
                }
                if total < *best {
                    *best = total;
                }
                return;
            }
            for e in start..edges.len() {
                chosen.push(e);
                rec(e + 1, edges, chosen, need, w, best);
                chosen.pop();
            }
        }
        rec(0, &edges, &mut chosen, n - 1, w, &mut best);
        best
    }

    /// Bottleneck value from the nearest prototype via a minimax closure.
    fn minimax_closure_costs(w: &[Vec<f64>], prototypes: &PrototypeSet) -> Vec<f64> {
        let n = w.len();
        let mut m = w.to_vec();
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let via = m[i][k].max(m[k][j]);
                    if via < m[i][j] {
                        m[i][j] = via;
                    }
                }
            }
        }
        (0..n)
            .map(|v| prototypes.iter().map(|p| m[p][v]).fold(f64::INFINITY, f64::min))
            .collect()
    }

    #[test]
    fn toy_mst() {
        let mst = build_mst(&toy(), Metric::Euclidean).unwrap();
        let mut got: Vec<(usize, usize, f64)> = mst.iter().map(|e| (e.a, e.b, e.weight)).collect();
        got.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
        assert_eq!(got, vec![(0, 1, 1.0), (1, 2, 2.0), (2, 3, 1.0)]);
        let w = weight_matrix(&toy());
        assert_eq!(brute_force_mst_weight(&w), 4.0);
    }

    #[test]
    fn two_node_mst() {
        let ds = parse_dataset("2 2 2\n0 0 0 0\n1 1 3 4\n").unwrap();
        let mst = build_mst(&ds, Metric::Euclidean).unwrap();
        assert_eq!(mst, vec![MstEdge { a: 0, b: 1, weight: 5.0 }]);
    }

    #[test]
    fn mst_needs_two_samples() {
        let ds = parse_dataset("1 1 1\n0 0 1\n").unwrap();
        assert!(matches!(build_mst(&ds, Metric::Euclidean), Err(Error::TooFewSamples(1))));
    }

    #[test]
    fn mst_weight_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..50 {
            let n = rng.random_range(2..=7);
            let ds = random_dataset(&mut rng, n, 2, 2.min(n as u32));
            let mst = build_mst(&ds, Metric::Euclidean).unwrap();
            assert_eq!(mst.len(), n - 1);
            let total: f64 = mst.iter().map(|e| e.weight).sum();
            let oracle = brute_force_mst_weight(&weight_matrix(&ds));
            assert!((total - oracle).abs() < 1e-9, "{total} vs {oracle}");
        }
    }

    #[test]
    fn toy_prototypes() {
        let ds = toy();
        let mst = build_mst(&ds, Metric::Euclidean).unwrap();
        let p = elect_prototypes(&mst, &ds.labels()).unwrap();
        assert_eq!(p.iter().collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn single_class_is_rejected() {
        let ds = parse_dataset("3 1 1\n0 0 0\n1 0 1\n2 0 2\n").unwrap();
        let mst = build_mst(&ds, Metric::Euclidean).unwrap();
        assert!(matches!(elect_prototypes(&mst, &ds.labels()), Err(Error::SingleClassTraining)));
        assert!(matches!(train_cg(&ds, Metric::Euclidean), Err(Error::SingleClassTraining)));
    }

    #[test]
    fn every_class_owns_a_prototype() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let classes = rng.random_range(2..=4);
            let n = rng.random_range(classes as usize..=20);
            let ds = random_dataset(&mut rng, n, 3, classes);
            let mst = build_mst(&ds, Metric::Manhattan).unwrap();
            let p = elect_prototypes(&mst, &ds.labels()).unwrap();
            for c in 0..classes {
                assert!(p.iter().any(|v| ds.samples()[v].label == c));
            }
        }
    }

    #[test]
    fn zero_weight_interclass_edge_elects_both() {
        let ds = parse_dataset("3 2 1\n0 0 1.0\n1 1 1.0\n2 1 5.0\n").unwrap();
        let forest = train_cg(&ds, Metric::Euclidean).unwrap();
        assert!(forest.prototypes().contains(0));
        assert!(forest.prototypes().contains(1));
        assert_eq!(forest.labels(), &[0, 1, 1]);
    }

    #[test]
    fn toy_training() {
        let forest = train_cg(&toy(), Metric::Euclidean).unwrap();
        assert_eq!(forest.costs(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(forest.labels(), &[0, 0, 1, 1]);
        assert_eq!(forest.roots(), &[1, 1, 2, 2]);
        assert_eq!(forest.preds(), &[Some(1), None, None, Some(2)]);
        assert_eq!(forest.order(), &[1, 2, 0, 3]);
    }

    #[test]
    fn costs_match_minimax_closure() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let classes = rng.random_range(2..=4);
            let n = rng.random_range(classes as usize..=32);
            let d = rng.random_range(1..=8);
            let ds = random_dataset(&mut rng, n, d, classes);
            let forest = train_cg(&ds, Metric::Euclidean).unwrap();
            let oracle = minimax_closure_costs(&weight_matrix(&ds), forest.prototypes());
            for v in 0..n {
                assert!((forest.costs()[v] - oracle[v]).abs() < 1e-9);
            }
            for p in forest.prototypes().iter() {
                assert_eq!(forest.costs()[p], 0.0);
            }
        }
    }

    #[test]
    fn matrix_and_on_demand_training_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ds = random_dataset(&mut rng, 40, 4, 3);
        let a = train_cg(&ds, Metric::Manhattan).unwrap();
        let b = train_cg_with(&ds, Metric::Manhattan, &TrainOptions { memory_budget_bytes: 0 }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pred_chains_reach_prototypes() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let ds = random_dataset(&mut rng, 30, 2, 3);
        let forest = train_cg(&ds, Metric::Euclidean).unwrap();
        for v in 0..forest.len() {
            let mut node = v;
            let mut steps = 0;
            while let Some(p) = forest.preds()[node] {
                node = p;
                steps += 1;
                assert!(steps <= forest.len());
            }
            assert!(forest.prototypes().contains(node));
            assert_eq!(node, forest.roots()[v]);
            assert_eq!(forest.labels()[v], ds.samples()[node].label);
        }
    }

    #[test]
    fn toy_classification() {
        let forest = train_cg(&toy(), Metric::Euclidean).unwrap();
        let c = classify_cg(&forest, &[2.0]).unwrap();
        assert_eq!((c.label, c.cost, c.conqueror), (0, 1.0, 1));
        let at_proto = classify_cg(&forest, &[3.0]).unwrap();
        assert_eq!(at_proto.cost, 0.0);
        assert_eq!(at_proto.label, 1);
        assert!(matches!(
            classify_cg(&forest, &[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn training_samples_classify_to_themselves() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..20 {
            let ds = random_dataset(&mut rng, 25, 3, 3);
            let forest = train_cg(&ds, Metric::Euclidean).unwrap();
            for (v, s) in ds.samples().iter().enumerate() {
                let c = classify_cg(&forest, &s.features).unwrap();
                assert_eq!(c.cost, forest.costs()[v]);
                assert_eq!(c.label, forest.labels()[v]);
            }
        }
    }

    #[test]
    fn toy_offered_costs() {
        let forest = train_cg(&toy(), Metric::Euclidean).unwrap();
        let offered = offered_costs_cg(&forest, &[2.0]).unwrap();
        assert_eq!(offered, vec![(0, 2.0), (1, 1.0), (2, 1.0), (3, 2.0)]);
        let at_proto = offered_costs_cg(&forest, &[1.0]).unwrap();
        assert!(at_proto.contains(&(1, 0.0)));
        let min = offered.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
        assert_eq!(min, classify_cg(&forest, &[2.0]).unwrap().cost);
    }
}
