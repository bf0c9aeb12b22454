//! Distance functions and pairwise distance matrices.

use std::fmt;
use std::str::FromStr;

use crate::dataset::LabeledSample;
use crate::error::{Error, Result};

/// The registered distance functions.
///
/// Every entry is nonnegative, symmetric and zero exactly on identical
/// vectors. OPF does not need the triangle inequality, which is why
/// squared euclidean is allowed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Metric {
    #[default]
    Euclidean,
    Manhattan,
    SquaredEuclidean,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Euclidean, Metric::Manhattan, Metric::SquaredEuclidean];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Manhattan => "manhattan",
            Metric::SquaredEuclidean => "sqeuclidean",
        }
    }

    /// Distance without a dimension check; callers guarantee equal lengths.
    #[inline]
    pub(crate) fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            Metric::Euclidean => squared(a, b).sqrt(),
            Metric::SquaredEuclidean => squared(a, b),
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }
}

#[inline]
fn squared(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "manhattan" => Ok(Metric::Manhattan),
            "sqeuclidean" | "squared-euclidean" => Ok(Metric::SquaredEuclidean),
            other => Err(Error::UnknownMetric(other.to_string())),
        }
    }
}

impl serde::Serialize for Metric {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> serde::Deserialize<'de> for Metric {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Distance between two feature vectors.
pub fn distance(a: &[f64], b: &[f64], metric: Metric) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(metric.eval(a, b))
}

/// Symmetric matrix of all pairwise distances, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Bytes needed to hold an `n x n` matrix.
    pub fn footprint(n: usize) -> usize {
        n.saturating_mul(n).saturating_mul(std::mem::size_of::<f64>())
    }
}

/// Computes every pairwise distance. Each cell is evaluated independently,
/// and the metrics are exactly symmetric in floating point, so mirroring the
/// upper triangle matches `n²` separate [`distance`] calls bit for bit.
pub fn pairwise_matrix(samples: &[LabeledSample], metric: Metric) -> Result<DistanceMatrix> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let dim = samples[0].features.len();
    if let Some(s) = samples.iter().find(|s| s.features.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: s.features.len(),
        });
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = metric.eval(&samples[i].features, &samples[j].features);
            values[i * n + j] = d;
            values[j * n + i] = d;
        }
    }
    Ok(DistanceMatrix { n, values })
}

/// Where training reads arc weights from: a precomputed matrix when it fits
/// the memory budget, otherwise fresh evaluation per lookup.
pub(crate) enum ArcWeights<'a> {
    Matrix(DistanceMatrix),
    OnDemand(&'a [LabeledSample], Metric),
}

impl<'a> ArcWeights<'a> {
    pub(crate) fn new(samples: &'a [LabeledSample], metric: Metric, budget_bytes: usize) -> Self {
        if DistanceMatrix::footprint(samples.len()) <= budget_bytes && !samples.is_empty() {
            match pairwise_matrix(samples, metric) {
                Ok(m) => ArcWeights::Matrix(m),
                Err(_) => ArcWeights::OnDemand(samples, metric),
            }
        } else {
            ArcWeights::OnDemand(samples, metric)
        }
    }

    #[inline]
    pub(crate) fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            ArcWeights::Matrix(m) => m.get(i, j),
            ArcWeights::OnDemand(s, metric) => metric.eval(&s[i].features, &s[j].features),
        }
    }
}
