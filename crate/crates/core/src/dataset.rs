//! Labeled feature-vector datasets: the `.ds` text format, random train/query
//! splits and the hold-out run schedule.
//!
//! A dataset file looks like
//!
//! ```text
//! # optional comment lines
//! 4 2 1
//! 0 0 0
//! 1 0 1
//! 2 1 3
//! 3 1 4
//! ```
//!
//! The header is `<n_samples> <n_classes> <n_features>`; each row is
//! `<id> <label> <f_1> ... <f_d>`.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One feature vector with its class label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub id: u64,
    pub label: u32,
    pub features: Vec<f64>,
}

impl LabeledSample {
    pub fn new(id: u64, label: u32, features: Vec<f64>) -> Self {
        Self {
            id,
            label,
            features,
        }
    }
}

/// A collection of samples sharing one feature dimension.
///
/// Samples are always kept sorted by id, so a node index into
/// [`Dataset::samples`] orders the same way as the ids do.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<LabeledSample>,
    n_classes: u32,
    dim: usize,
}

impl Dataset {
    /// Builds a complete dataset: nonempty, and every class in
    /// `0..n_classes` owns at least one sample.
    pub fn new(samples: Vec<LabeledSample>, n_classes: u32) -> Result<Self> {
        let dim = samples
            .first()
            .map(|s| s.features.len())
            .ok_or(Error::EmptyDataset)?;
        let ds = Self::partial(samples, n_classes, dim)?;
        if let Some(class) = ds.class_counts().iter().position(|&c| c == 0) {
            return Err(Error::InvalidDataset(format!("class {class} has no samples")));
        }
        Ok(ds)
    }

    /// Builds a dataset that may be empty or miss some classes, as query
    /// sets produced by a split do. All other invariants are still checked.
    pub fn partial(mut samples: Vec<LabeledSample>, n_classes: u32, dim: usize) -> Result<Self> {
        if n_classes == 0 {
            return Err(Error::InvalidDataset("n_classes must be positive".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidDataset("feature dimension must be positive".into()));
        }
        for s in &samples {
            if s.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.features.len(),
                });
            }
            if s.label >= n_classes {
                return Err(Error::InvalidDataset(format!(
                    "sample {} has label {} but there are {} classes",
                    s.id, s.label, n_classes
                )));
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "sample {} has a non-finite feature",
                    s.id
                )));
            }
        }
        samples.sort_by_key(|s| s.id);
        if let Some(w) = samples.windows(2).find(|w| w[0].id == w[1].id) {
            return Err(Error::InvalidDataset(format!("duplicate sample id {}", w[0].id)));
        }
        Ok(Self {
            samples,
            n_classes,
            dim,
        })
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn n_classes(&self) -> u32 {
        self.n_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Node index of the sample with the given id.
    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.samples.binary_search_by_key(&id, |s| s.id).ok()
    }

    pub fn label_of(&self, id: u64) -> Option<u32> {
        self.index_of(id).map(|i| self.samples[i].label)
    }

    pub fn labels(&self) -> Vec<u32> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes as usize];
        for s in &self.samples {
            counts[s.label as usize] += 1;
        }
        counts
    }

    /// Number of distinct labels actually present.
    pub fn classes_present(&self) -> usize {
        self.class_counts().iter().filter(|&&c| c > 0).count()
    }

    fn subset(&self, indices: &[usize]) -> Dataset {
        let mut samples: Vec<LabeledSample> =
            indices.iter().map(|&i| self.samples[i].clone()).collect();
        samples.sort_by_key(|s| s.id);
        Dataset {
            samples,
            n_classes: self.n_classes,
            dim: self.dim,
        }
    }
}

/// Parses a complete dataset. Every declared class must own a sample.
pub fn parse_dataset(content: &str) -> Result<Dataset> {
    parse_impl(content, true)
}

/// Parses a query dataset: like [`parse_dataset`] but classes may be absent
/// and the sample count may be zero.
pub fn parse_query_dataset(content: &str) -> Result<Dataset> {
    parse_impl(content, false)
}

fn parse_impl(content: &str, complete: bool) -> Result<Dataset> {
    let mut lines = content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (header_line, header) = lines.next().ok_or(Error::MalformedHeader {
        line: 1,
        reason: "missing header".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::MalformedHeader {
            line: header_line,
            reason: format!("expected 3 fields, found {}", fields.len()),
        });
    }
    let header_num = |tok: &str, what: &str| -> Result<usize> {
        tok.parse::<usize>().map_err(|_| Error::MalformedHeader {
            line: header_line,
            reason: format!("{what} {tok:?} is not a nonnegative integer"),
        })
    };
    let n_samples = header_num(fields[0], "sample count")?;
    let n_classes = header_num(fields[1], "class count")?;
    let dim = header_num(fields[2], "feature count")?;
    if n_classes == 0 || n_classes > u32::MAX as usize {
        return Err(Error::MalformedHeader {
            line: header_line,
            reason: "class count must be positive".into(),
        });
    }
    if dim == 0 {
        return Err(Error::MalformedHeader {
            line: header_line,
            reason: "feature count must be positive".into(),
        });
    }
    if complete && n_samples == 0 {
        return Err(Error::MalformedHeader {
            line: header_line,
            reason: "sample count must be positive".into(),
        });
    }
    let n_classes = n_classes as u32;

    let mut samples = Vec::with_capacity(n_samples);
    let mut seen = std::collections::HashSet::with_capacity(n_samples);
    for (line, row) in lines {
        if samples.len() == n_samples {
            return Err(Error::SampleCount {
                line,
                declared: n_samples,
                found: n_samples + 1,
            });
        }
        let tokens: Vec<&str> = row.split_whitespace().collect();
        if tokens.len() != dim + 2 {
            return Err(Error::RowArity {
                line,
                expected: dim + 2,
                found: tokens.len(),
            });
        }
        let id: u64 = tokens[0].parse().map_err(|_| Error::InvalidNumber {
            line,
            token: tokens[0].to_string(),
        })?;
        let label: u64 = tokens[1].parse().map_err(|_| Error::InvalidNumber {
            line,
            token: tokens[1].to_string(),
        })?;
        if label >= n_classes as u64 {
            return Err(Error::LabelOutOfRange {
                line,
                label,
                n_classes,
            });
        }
        let mut features = Vec::with_capacity(dim);
        for tok in &tokens[2..] {
            let v: f64 = tok.parse().map_err(|_| Error::InvalidNumber {
                line,
                token: tok.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    line,
                    token: tok.to_string(),
                });
            }
            features.push(v);
        }
        if !seen.insert(id) {
            return Err(Error::DuplicateId { line, id });
        }
        samples.push(LabeledSample::new(id, label as u32, features));
    }
    if samples.len() != n_samples {
        return Err(Error::SampleCount {
            line: header_line,
            declared: n_samples,
            found: samples.len(),
        });
    }
    let ds = Dataset::partial(samples, n_classes, dim)?;
    if complete {
        if let Some(class) = ds.class_counts().iter().position(|&c| c == 0) {
            return Err(Error::MissingClass {
                line: header_line,
                class: class as u32,
            });
        }
    }
    Ok(ds)
}

/// Renders the canonical text form: rows sorted by id, each value printed
/// with the shortest decimal representation that parses back exactly.
pub fn write_dataset(ds: &Dataset) -> Result<String> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {}", ds.len(), ds.n_classes(), ds.dim());
    for s in ds.samples() {
        let _ = write!(out, "{} {}", s.id, s.label);
        for v in &s.features {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// A train/query partition of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPair {
    pub train: Dataset,
    pub queries: Dataset,
    pub seed: u64,
    pub train_fraction: f64,
}

/// Randomly splits `ds` into training and query sets.
///
/// The training size is `round(train_fraction * n)`. In stratified mode each
/// class contributes `max(1, round(train_fraction * n_c))` samples; otherwise
/// samples are drawn globally and any class left out of training is swapped
/// in for a random training sample of a class holding two or more.
pub fn split_dataset(
    ds: &Dataset,
    train_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<SplitPair> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::InvalidFraction(train_fraction));
    }
    let n = ds.len();
    let n_train = ((train_fraction * n as f64).round() as usize).min(n);
    let n_classes = ds.n_classes();
    if n_train < n_classes as usize {
        return Err(Error::InfeasibleSplit {
            train: n_train,
            classes: n_classes,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut in_train = vec![false; n];
    if stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes as usize];
        for (i, s) in ds.samples().iter().enumerate() {
            by_class[s.label as usize].push(i);
        }
        for members in &mut by_class {
            if members.is_empty() {
                continue;
            }
            members.shuffle(&mut rng);
            let take = ((train_fraction * members.len() as f64).round() as usize)
                .clamp(1, members.len());
            for &i in &members[..take] {
                in_train[i] = true;
            }
        }
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let (train, rest) = order.split_at_mut(n_train);
        repair_class_coverage(ds, train, rest, &mut rng);
        for &i in train.iter() {
            in_train[i] = true;
        }
    }

    let (train_idx, query_idx): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| in_train[i]);
    Ok(SplitPair {
        train: ds.subset(&train_idx),
        queries: ds.subset(&query_idx),
        seed,
        train_fraction,
    })
}

fn repair_class_coverage(
    ds: &Dataset,
    train: &mut [usize],
    rest: &mut [usize],
    rng: &mut ChaCha8Rng,
) {
    let label = |i: usize| ds.samples()[i].label as usize;
    let mut counts = vec![0usize; ds.n_classes() as usize];
    for &i in train.iter() {
        counts[label(i)] += 1;
    }
    for class in 0..counts.len() {
        if counts[class] > 0 {
            continue;
        }
        let incoming: Vec<usize> = (0..rest.len()).filter(|&j| label(rest[j]) == class).collect();
        if incoming.is_empty() {
            continue;
        }
        // n_train >= n_classes, so a class with two or more members exists
        // whenever another class is absent.
        let outgoing: Vec<usize> = (0..train.len())
            .filter(|&j| counts[label(train[j])] >= 2)
            .collect();
        let a = incoming[rng.random_range(0..incoming.len())];
        let b = outgoing[rng.random_range(0..outgoing.len())];
        counts[label(train[b])] -= 1;
        counts[class] += 1;
        std::mem::swap(&mut train[b], &mut rest[a]);
    }
}

/// The hold-out schedule: run `i` splits with seed `base_seed + i`.
pub fn holdout_runs(
    ds: &Dataset,
    train_fraction: f64,
    base_seed: u64,
    n_runs: usize,
    stratified: bool,
) -> Result<Vec<SplitPair>> {
    if n_runs == 0 {
        return Err(Error::InvalidConfig("n_runs must be positive".into()));
    }
    (0..n_runs as u64)
        .map(|i| split_dataset(ds, train_fraction, base_seed.wrapping_add(i), stratified))
        .collect()
}
