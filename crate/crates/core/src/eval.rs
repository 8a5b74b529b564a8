//! Reduction results and the brute-force k-NN evaluator used to compare a
//! reduced training set against the full one.
//!
//! k-NN accuracy is a stand-in quality measure, reported under the name
//! `knn_proxy_accuracy`; it is not a neural-network accuracy.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetSource, LabeledDataset, SubsetSpec};
use crate::error::{Error, Result};
use crate::metric::squared_distance;

pub const KNN_METRIC_NAME: &str = "knn_proxy_accuracy";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Rhc,
    Ghcidr,
    MergedGhcidr,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Rhc => "rhc",
            Algorithm::Ghcidr => "ghcidr",
            Algorithm::MergedGhcidr => "merged-ghcidr",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ReductionParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

/// What a reduction keeps: rows of the source dataset, or new points.
#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    Subset(SubsetSpec),
    /// Cluster centroids with their labels (RHC). Not rows of the source.
    Synthetic {
        dim: usize,
        features: Vec<f32>,
        labels: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionResult {
    pub algorithm: Algorithm,
    pub params: ReductionParams,
    pub selection: Selection,
    pub original_n: usize,
    pub num_classes: u32,
    /// [`LabeledDataset::fingerprint`] of the dataset that was reduced.
    pub source_fingerprint: u64,
    /// Percent of rows removed.
    pub reduction_rate: f64,
    /// Points kept per cluster, in the order clusters were processed.
    pub per_cluster_counts: Vec<usize>,
    /// Seconds per pipeline stage.
    pub wall_time: BTreeMap<String, f64>,
}

impl ReductionResult {
    pub fn synthetic(&self) -> bool {
        matches!(self.selection, Selection::Synthetic { .. })
    }

    pub fn reduced_len(&self) -> usize {
        match &self.selection {
            Selection::Subset(s) => s.len(),
            Selection::Synthetic { labels, .. } => labels.len(),
        }
    }

    pub fn subset(&self) -> Option<&SubsetSpec> {
        match &self.selection {
            Selection::Subset(s) => Some(s),
            Selection::Synthetic { .. } => None,
        }
    }

    /// The reduced training set as a dataset of its own.
    pub fn reduced_dataset(&self, source: &LabeledDataset) -> Result<LabeledDataset> {
        self.check_source(source)?;
        match &self.selection {
            Selection::Subset(s) => source.subset(s),
            Selection::Synthetic {
                dim,
                features,
                labels,
            } => LabeledDataset::new(
                features.clone(),
                *dim,
                labels.clone(),
                Some(self.num_classes),
                DatasetSource::memory(),
            ),
        }
    }

    /// Kept points per class, with zero entries for classes that lost all points.
    pub fn per_class_counts(&self, source: &LabeledDataset) -> Result<BTreeMap<u32, usize>> {
        self.check_source(source)?;
        let mut counts: BTreeMap<u32, usize> = (0..self.num_classes).map(|c| (c, 0)).collect();
        match &self.selection {
            Selection::Subset(s) => s
                .indices()
                .iter()
                .for_each(|&i| *counts.entry(source.label(i)).or_default() += 1),
            Selection::Synthetic { labels, .. } => labels
                .iter()
                .for_each(|&l| *counts.entry(l).or_default() += 1),
        }
        Ok(counts)
    }

    pub fn check_source(&self, ds: &LabeledDataset) -> Result<()> {
        if ds.len() != self.original_n || ds.fingerprint() != self.source_fingerprint {
            return Err(Error::Consistency(format!(
                "{} result was computed from a different dataset ({} rows, fingerprint {:016x}) than the one given ({} rows, fingerprint {:016x})",
                self.algorithm,
                self.original_n,
                self.source_fingerprint,
                ds.len(),
                ds.fingerprint()
            )));
        }
        if let Selection::Subset(s) = &self.selection {
            s.check_against(ds.len())?;
        }
        Ok(())
    }
}

/// `100 * (1 - reduced_n / original_n)`.
pub fn reduction_rate(original_n: usize, reduced_n: usize) -> Result<f64> {
    if original_n == 0 {
        return Err(Error::Consistency("original size must be positive".into()));
    }
    if reduced_n > original_n {
        return Err(Error::Consistency(format!(
            "reduced size {reduced_n} exceeds original size {original_n}"
        )));
    }
    Ok(100.0 * (1.0 - reduced_n as f64 / original_n as f64))
}

fn predict(train: &LabeledDataset, query: &[f32], k: usize) -> u32 {
    // Sorted by (distance, index); at most k entries.
    let mut nearest: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for i in 0..train.len() {
        let d = squared_distance(query, train.row(i));
        if nearest.len() == k && d >= nearest[k - 1].0 {
            continue;
        }
        let pos = nearest.partition_point(|&(nd, _)| nd <= d);
        nearest.insert(pos, (d, i));
        nearest.truncate(k);
    }
    let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
    for &(_, i) in &nearest {
        *votes.entry(train.label(i)).or_default() += 1;
    }
    // BTreeMap iterates labels ascending; keep the first maximum.
    let mut best = (0u32, 0usize);
    for (&label, &count) in &votes {
        if count > best.1 {
            best = (label, count);
        }
    }
    best.0
}

/// Percentage of `test` rows whose k-NN vote over `train` matches their label.
///
/// Exact search with Euclidean distance. Equal distances favour the lower
/// train index; tied votes favour the smallest label.
pub fn knn_accuracy(train: &LabeledDataset, test: &LabeledDataset, k: usize) -> Result<f64> {
    if k == 0 || k > train.len() {
        return Err(Error::Parameter(format!(
            "k must lie in [1, {}] for this training set, got {k}",
            train.len()
        )));
    }
    if train.dim() != test.dim() {
        return Err(Error::Consistency(format!(
            "train dimension {} does not match test dimension {}",
            train.dim(),
            test.dim()
        )));
    }
    let correct = (0..test.len())
        .into_par_iter()
        .with_min_len(16)
        .filter(|&t| predict(train, test.row(t), k) == test.label(t))
        .count();
    Ok(100.0 * correct as f64 / test.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub metric: &'static str,
    pub algorithm: Algorithm,
    pub params: ReductionParams,
    pub k: usize,
    pub original_n: usize,
    pub reduced_n: usize,
    pub test_n: usize,
    pub reduction_rate: f64,
    pub reduced_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_accuracy: Option<f64>,
    pub per_class_retained: BTreeMap<u32, usize>,
}

/// k-NN accuracy of the reduced training set, and optionally of the full one.
pub fn evaluate(
    train: &LabeledDataset,
    result: &ReductionResult,
    test: &LabeledDataset,
    k: usize,
    include_full: bool,
) -> Result<EvaluationReport> {
    result.check_source(train)?;
    let reduced = result.reduced_dataset(train)?;
    let reduced_accuracy = knn_accuracy(&reduced, test, k)?;
    let full_accuracy = if include_full {
        Some(knn_accuracy(train, test, k)?)
    } else {
        None
    };
    Ok(EvaluationReport {
        metric: KNN_METRIC_NAME,
        algorithm: result.algorithm,
        params: result.params,
        k,
        original_n: result.original_n,
        reduced_n: result.reduced_len(),
        test_n: test.len(),
        reduction_rate: result.reduction_rate,
        reduced_accuracy,
        full_accuracy,
        per_class_retained: result.per_class_counts(train)?,
    })
}
