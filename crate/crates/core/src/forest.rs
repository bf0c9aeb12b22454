//! The trained optimum-path forest shared by both OPF variants.
//!
//! Nodes are addressed by their index into the training [`Dataset`], which
//! is sorted by sample id. Accessors that talk about ids translate through
//! the dataset.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::dataset::Dataset;
use crate::metricspace::Metric;

/// Gaussian density estimate over the k-nn graph of the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub rho: Vec<f64>,
    pub sigma: f64,
    pub d_max: f64,
    pub k: usize,
}

/// The variant a forest was trained with, carrying the k-nn parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ForestVariant {
    CompleteGraph,
    Knn { k: usize, density: DensityField },
}

impl ForestVariant {
    pub fn name(&self) -> &'static str {
        match self {
            ForestVariant::CompleteGraph => "cg",
            ForestVariant::Knn { .. } => "knn",
        }
    }
}

/// Node indices of the prototypes (tree roots).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PrototypeSet(BTreeSet<usize>);

impl PrototypeSet {
    pub fn contains(&self, node: usize) -> bool {
        self.0.contains(&node)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub(crate) fn insert(&mut self, node: usize) {
        self.0.insert(node);
    }
}

impl FromIterator<usize> for PrototypeSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        PrototypeSet(iter.into_iter().collect())
    }
}

/// Result of training either variant.
///
/// `cost` is the optimum path cost C of each node, `pred` its parent in the
/// optimum-path tree, `root` the prototype the tree hangs from and `label`
/// the class propagated from that root. `order` lists nodes in the order
/// the competition settled them.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedForest {
    pub(crate) variant: ForestVariant,
    pub(crate) metric: Metric,
    pub(crate) samples: Dataset,
    pub(crate) cost: Vec<f64>,
    pub(crate) pred: Vec<Option<usize>>,
    pub(crate) root: Vec<usize>,
    pub(crate) label: Vec<u32>,
    pub(crate) prototypes: PrototypeSet,
    pub(crate) order: Vec<usize>,
    /// Position of each node in `order`.
    pub(crate) rank: Vec<usize>,
}

impl TrainedForest {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        variant: ForestVariant,
        metric: Metric,
        samples: Dataset,
        cost: Vec<f64>,
        pred: Vec<Option<usize>>,
        root: Vec<usize>,
        prototypes: PrototypeSet,
        order: Vec<usize>,
    ) -> Self {
        let label = root.iter().map(|&r| samples.samples()[r].label).collect();
        let mut rank = vec![0; order.len()];
        for (pos, &node) in order.iter().enumerate() {
            rank[node] = pos;
        }
        TrainedForest {
            variant,
            metric,
            samples,
            cost,
            pred,
            root,
            label,
            prototypes,
            order,
            rank,
        }
    }

    pub fn variant(&self) -> &ForestVariant {
        &self.variant
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn samples(&self) -> &Dataset {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.cost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cost.is_empty()
    }

    pub fn costs(&self) -> &[f64] {
        &self.cost
    }

    pub fn preds(&self) -> &[Option<usize>] {
        &self.pred
    }

    pub fn roots(&self) -> &[usize] {
        &self.root
    }

    pub fn labels(&self) -> &[u32] {
        &self.label
    }

    pub fn prototypes(&self) -> &PrototypeSet {
        &self.prototypes
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Sample id of a node.
    pub fn node_id(&self, node: usize) -> u64 {
        self.samples.samples()[node].id
    }

    /// `k` for k-nn forests, `None` for complete-graph forests.
    pub fn k(&self) -> Option<usize> {
        match &self.variant {
            ForestVariant::Knn { k, .. } => Some(*k),
            ForestVariant::CompleteGraph => None,
        }
    }

    pub fn density(&self) -> Option<&DensityField> {
        match &self.variant {
            ForestVariant::Knn { density, .. } => Some(density),
            ForestVariant::CompleteGraph => None,
        }
    }

    pub(crate) fn check_dim(&self, features: &[f64]) -> crate::Result<()> {
        if features.len() != self.samples.dim() {
            return Err(crate::Error::DimensionMismatch {
                expected: self.samples.dim(),
                found: features.len(),
            });
        }
        Ok(())
    }
}

/// Outcome of classifying one query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub label: u32,
    /// The optimized offered value: the minimized cost for the complete
    /// graph, the maximized value for k-nn.
    pub cost: f64,
    /// Sample id of the conquering training node.
    pub conqueror: u64,
}

/// Priority-queue entry for the competition. Ordering is chosen so that a
/// max-heap pops the preferred entry first: by `key` in the requested
/// direction, then by smallest node index.
#[derive(Debug, Clone, Copy)]
pub(crate) struct QueueEntry {
    pub key: f64,
    pub node: usize,
    pub maximize: bool,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for QueueEntry {}

impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        let by_key = if self.maximize {
            self.key.total_cmp(&other.key)
        } else {
            other.key.total_cmp(&self.key)
        };
        by_key.then_with(|| other.node.cmp(&self.node))
    }
}
