//! Recursive homogeneous clustering.
//!
//! Mixed-label clusters are split with k-means seeded at their class means
//! until every cluster holds a single label. The centroids of the resulting
//! clusters form the RHC baseline reduction.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::eval::{reduction_rate, Algorithm, ReductionParams, ReductionResult, Selection};
use crate::metric::{class_means, kmeans, mean_of, KMeansConfig};

/// Cluster whose members all carry `label`.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousCluster {
    members: Vec<usize>,
    label: u32,
    centroid: Vec<f64>,
}

impl HomogeneousCluster {
    /// Validates `members` against `ds` and computes the centroid.
    pub fn new(ds: &LabeledDataset, members: Vec<usize>) -> Result<Self> {
        let Some(&first) = members.first() else {
            return Err(Error::Consistency(
                "a cluster needs at least one member".into(),
            ));
        };
        if members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Consistency(
                "cluster members must be sorted and distinct".into(),
            ));
        }
        if let Some(&bad) = members.iter().find(|&&i| i >= ds.len()) {
            return Err(Error::Consistency(format!(
                "cluster member {bad} is out of range"
            )));
        }
        let label = ds.label(first);
        if let Some(&other) = members.iter().find(|&&i| ds.label(i) != label) {
            return Err(Error::Consistency(format!(
                "member {other} has label {} in a cluster of label {label}",
                ds.label(other)
            )));
        }
        let centroid = mean_of(ds, &members);
        Ok(HomogeneousCluster {
            members,
            label,
            centroid,
        })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn label(&self) -> u32 {
        self.label
    }

    pub fn centroid(&self) -> &[f64] {
        &self.centroid
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Union of two same-label clusters. The centroid is the size-weighted
    /// mean of both centroids.
    pub(crate) fn merged(&self, other: &HomogeneousCluster) -> HomogeneousCluster {
        debug_assert_eq!(self.label, other.label);
        let mut members = Vec::with_capacity(self.len() + other.len());
        let (mut a, mut b) = (
            self.members.iter().peekable(),
            other.members.iter().peekable(),
        );
        while let (Some(&&x), Some(&&y)) = (a.peek(), b.peek()) {
            if x < y {
                members.push(x);
                a.next();
            } else {
                members.push(y);
                b.next();
            }
        }
        members.extend(a);
        members.extend(b);
        let (wa, wb) = (self.len() as f64, other.len() as f64);
        let centroid = self
            .centroid
            .iter()
            .zip(&other.centroid)
            .map(|(x, y)| (x * wa + y * wb) / (wa + wb))
            .collect();
        HomogeneousCluster {
            members,
            label: self.label,
            centroid,
        }
    }
}

/// Disjoint cover of `[0, n)` by homogeneous clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    clusters: Vec<HomogeneousCluster>,
    n: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClusterRecord {
    label: u32,
    members: Vec<usize>,
}

impl Partition {
    /// Checks that the clusters exactly cover `[0, ds.len())`.
    pub fn new(ds: &LabeledDataset, clusters: Vec<HomogeneousCluster>) -> Result<Self> {
        let n = ds.len();
        let mut seen = vec![false; n];
        for c in &clusters {
            for &i in c.members() {
                if i >= n {
                    return Err(Error::Consistency(format!(
                        "cluster member {i} is out of range"
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::Consistency(format!(
                        "index {i} appears in two clusters"
                    )));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Consistency(format!(
                "index {missing} is not covered by any cluster"
            )));
        }
        Ok(Partition { clusters, n })
    }

    pub fn clusters(&self) -> &[HomogeneousCluster] {
        &self.clusters
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Number of dataset rows covered.
    pub fn dataset_len(&self) -> usize {
        self.n
    }

    pub fn stats(&self) -> SizeHistogram {
        partition_stats(self)
    }

    /// JSON list of `{label, members}` objects.
    pub fn to_json(&self) -> Result<String> {
        let records: Vec<ClusterRecord> = self
            .clusters
            .iter()
            .map(|c| ClusterRecord {
                label: c.label,
                members: c.members.clone(),
            })
            .collect();
        Ok(serde_json::to_string(&records)?)
    }

    /// Rebuilds a partition from [`Partition::to_json`] output, re-validating
    /// it against `ds` and recomputing centroids.
    pub fn from_json(ds: &LabeledDataset, json: &str) -> Result<Self> {
        let records: Vec<ClusterRecord> = serde_json::from_str(json)?;
        let clusters = records
            .into_par_iter()
            .map(|r| {
                let c = HomogeneousCluster::new(ds, r.members)?;
                if c.label != r.label {
                    return Err(Error::Consistency(format!(
                        "cached cluster declares label {} but its members have label {}",
                        r.label, c.label
                    )));
                }
                Ok(c)
            })
            .collect::<Result<Vec<_>>>()?;
        Partition::new(ds, clusters)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Partition::from_json(ds, &json)
    }
}

/// Cluster-size distribution of a partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SizeHistogram {
    /// cluster size -> number of clusters of that size
    pub counts: BTreeMap<usize, usize>,
    pub total_clusters: usize,
    pub total_images: usize,
    pub bands: Vec<SizeBand>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SizeBand {
    pub min_size: usize,
    /// `None` for the open-ended last band.
    pub max_size: Option<usize>,
    pub clusters: usize,
    pub images: usize,
    /// Images in this band and all smaller bands.
    pub cumulative_images: usize,
}

const SIZE_BANDS: [(usize, Option<usize>); 4] =
    [(1, Some(5)), (6, Some(10)), (11, Some(20)), (21, None)];

pub fn partition_stats(p: &Partition) -> SizeHistogram {
    let mut counts = BTreeMap::new();
    for c in &p.clusters {
        *counts.entry(c.len()).or_insert(0) += 1;
    }
    let mut cumulative = 0;
    let bands = SIZE_BANDS
        .iter()
        .map(|&(lo, hi)| {
            let (clusters, images) = counts
                .range(lo..=hi.unwrap_or(usize::MAX))
                .fold((0, 0), |(c, i), (&size, &count)| {
                    (c + count, i + size * count)
                });
            cumulative += images;
            SizeBand {
                min_size: lo,
                max_size: hi,
                clusters,
                images,
                cumulative_images: cumulative,
            }
        })
        .collect();
    SizeHistogram {
        total_clusters: p.clusters.len(),
        total_images: counts.iter().map(|(s, c)| s * c).sum(),
        counts,
        bands,
    }
}

enum Split {
    Homogeneous(Vec<usize>),
    Parts(Vec<Vec<usize>>),
}

fn split_by_label(ds: &LabeledDataset, scope: &[usize]) -> Vec<Vec<usize>> {
    let mut groups: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for &i in scope {
        groups.entry(ds.label(i)).or_default().push(i);
    }
    groups.into_values().collect()
}

fn split(ds: &LabeledDataset, scope: Vec<usize>, config: KMeansConfig) -> Result<Split> {
    let first = ds.label(scope[0]);
    if scope.iter().all(|&i| ds.label(i) == first) {
        return Ok(Split::Homogeneous(scope));
    }
    let head = ds.row(scope[0]);
    if scope.iter().all(|&i| ds.row(i) == head) {
        return Ok(Split::Parts(split_by_label(ds, &scope)));
    }
    let init = class_means(ds, &scope)?;
    let outcome = kmeans(ds, &scope, &init, config)?;
    let parts = outcome.assignment.groups(&scope, outcome.centroids.k());
    if parts.len() < 2 {
        // k-means could not separate the points; labels still can.
        return Ok(Split::Parts(split_by_label(ds, &scope)));
    }
    Ok(Split::Parts(parts))
}

/// Partitions `ds` into homogeneous clusters with the default k-means settings.
pub fn rhc_partition(ds: &LabeledDataset) -> Partition {
    rhc_partition_with(ds, KMeansConfig::default())
        .expect("partitioning a validated dataset cannot fail")
}

/// Same as [`rhc_partition`] with explicit k-means settings.
///
/// Pending clusters are processed breadth-first (a FIFO worklist); each
/// level is split in parallel. Output clusters are sorted by label, then by
/// first member.
pub fn rhc_partition_with(ds: &LabeledDataset, config: KMeansConfig) -> Result<Partition> {
    let mut frontier = vec![(0..ds.len()).collect::<Vec<_>>()];
    let mut done = Vec::new();
    while !frontier.is_empty() {
        let level = frontier
            .into_par_iter()
            .map(|scope| split(ds, scope, config))
            .collect::<Result<Vec<_>>>()?;
        frontier = Vec::new();
        for s in level {
            match s {
                Split::Homogeneous(members) => done.push(members),
                Split::Parts(parts) => frontier.extend(parts),
            }
        }
    }
    for m in &mut done {
        m.sort_unstable();
    }
    done.sort_by_key(|m| (ds.label(m[0]), m[0]));
    let clusters = done
        .into_par_iter()
        .map(|m| HomogeneousCluster::new(ds, m))
        .collect::<Result<Vec<_>>>()?;
    Partition::new(ds, clusters)
}

/// RHC baseline: one synthetic centroid point per cluster of `p`.
pub fn rhc_reduce_partition(ds: &LabeledDataset, p: &Partition) -> ReductionResult {
    let started = Instant::now();
    let dim = ds.dim();
    let mut features = Vec::with_capacity(p.len() * dim);
    let mut labels = Vec::with_capacity(p.len());
    for c in p.clusters() {
        features.extend(c.centroid().iter().map(|&v| (v as f32).clamp(0.0, 1.0)));
        labels.push(c.label());
    }
    let mut wall_time = BTreeMap::new();
    wall_time.insert("select".to_string(), started.elapsed().as_secs_f64());
    ReductionResult {
        algorithm: Algorithm::Rhc,
        params: ReductionParams::default(),
        reduction_rate: reduction_rate(ds.len(), p.len()).expect("one cluster per row at most"),
        selection: Selection::Synthetic {
            dim,
            features,
            labels,
        },
        original_n: ds.len(),
        num_classes: ds.num_classes(),
        source_fingerprint: ds.fingerprint(),
        per_cluster_counts: vec![1; p.len()],
        wall_time,
    }
}

/// Partitions `ds` and returns the RHC centroid reduction.
pub fn rhc_reduce(ds: &LabeledDataset) -> ReductionResult {
    let started = Instant::now();
    let p = rhc_partition(ds);
    let partition_time = started.elapsed().as_secs_f64();
    let mut result = rhc_reduce_partition(ds, &p);
    result
        .wall_time
        .insert("partition".to_string(), partition_time);
    result
}
