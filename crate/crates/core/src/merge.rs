//! Per-class complete-linkage merging of homogeneous clusters, followed by
//! annulus sampling on the merged clusters.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::eval::{reduction_rate, Algorithm, ReductionParams, ReductionResult, Selection};
use crate::ghcidr::{floor_product, select_all};
use crate::metric::squared_distance;
use crate::rhc::{HomogeneousCluster, Partition};

/// Bisection steps allowed when calibrating beta.
pub const MAX_CALIBRATION_STEPS: usize = 25;
/// Default calibration tolerance, in percentage points.
pub const DEFAULT_CALIBRATION_TOLERANCE: f64 = 0.1;

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta <= 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "beta must lie in (0, 1], got {beta}"
        )))
    }
}

/// `max(1, floor(beta * count))`.
pub fn target_count(count: usize, beta: f64) -> usize {
    floor_product(beta * count as f64).max(1)
}

fn max_squared_between(ds: &LabeledDataset, a: &[usize], b: &[usize]) -> f64 {
    let mut best = 0.0f64;
    for &p in a {
        let row = ds.row(p);
        for &q in b {
            best = best.max(squared_distance(row, ds.row(q)));
        }
    }
    best
}

/// Largest distance between a member of `a` and a member of `b`.
pub fn complete_linkage_distance(
    ds: &LabeledDataset,
    a: &HomogeneousCluster,
    b: &HomogeneousCluster,
) -> f64 {
    max_squared_between(ds, a.members(), b.members()).sqrt()
}

/// One agglomeration step: `absorbed` was merged into `kept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MergeStep {
    pub kept: usize,
    pub absorbed: usize,
    pub distance: f64,
}

/// Agglomeration state for the clusters of one class.
///
/// Cluster ids are positions in the input list. Merging `a < b` keeps id `a`.
/// Linkage distances are initialised exactly and then maintained with the
/// complete-linkage update `D(A+B, C) = max(D(A, C), D(B, C))`.
#[derive(Debug, Clone)]
pub struct MergePlan {
    class_id: u32,
    slots: Vec<Option<HomogeneousCluster>>,
    active: Vec<usize>,
    linkage: Vec<f64>,
    target_count: usize,
    /// Closest active partner with a larger id, per row.
    row_best: Vec<Option<(f64, usize)>>,
    history: Vec<MergeStep>,
}

impl MergePlan {
    pub fn new(ds: &LabeledDataset, clusters: Vec<HomogeneousCluster>, beta: f64) -> Result<Self> {
        check_beta(beta)?;
        let Some(first) = clusters.first() else {
            return Err(Error::Consistency("no clusters to merge".into()));
        };
        let class_id = first.label();
        if let Some(c) = clusters.iter().find(|c| c.label() != class_id) {
            return Err(Error::Consistency(format!(
                "cannot merge a cluster of label {} into class {class_id}",
                c.label()
            )));
        }
        let m = clusters.len();
        let rows: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|a| {
                (a + 1..m)
                    .map(|b| {
                        max_squared_between(ds, clusters[a].members(), clusters[b].members()).sqrt()
                    })
                    .collect()
            })
            .collect();
        let mut linkage = vec![0.0; m * m];
        for (a, row) in rows.into_iter().enumerate() {
            for (off, d) in row.into_iter().enumerate() {
                let b = a + 1 + off;
                linkage[a * m + b] = d;
                linkage[b * m + a] = d;
            }
        }
        let mut plan = MergePlan {
            class_id,
            target_count: target_count(m, beta),
            slots: clusters.into_iter().map(Some).collect(),
            active: (0..m).collect(),
            linkage,
            row_best: vec![None; m],
            history: Vec::new(),
        };
        for a in 0..m {
            plan.refresh_row(a);
        }
        Ok(plan)
    }

    pub fn class_id(&self) -> u32 {
        self.class_id
    }

    pub fn target_count(&self) -> usize {
        self.target_count
    }

    /// Ids of clusters not yet absorbed, ascending.
    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn linkage(&self, a: usize, b: usize) -> f64 {
        self.linkage[a * self.slots.len() + b]
    }

    pub fn cluster(&self, id: usize) -> Option<&HomogeneousCluster> {
        self.slots.get(id).and_then(Option::as_ref)
    }

    pub fn history(&self) -> &[MergeStep] {
        &self.history
    }

    pub fn is_done(&self) -> bool {
        self.active.len() <= self.target_count
    }

    fn refresh_row(&mut self, a: usize) {
        let m = self.slots.len();
        let start = self.active.partition_point(|&id| id <= a);
        let mut best: Option<(f64, usize)> = None;
        for &b in &self.active[start..] {
            let d = self.linkage[a * m + b];
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, b));
            }
        }
        self.row_best[a] = best;
    }

    /// Merges the closest pair (smallest ids on ties), ignoring the target.
    /// Returns `None` once a single cluster remains.
    pub fn step(&mut self) -> Option<MergeStep> {
        let mut best: Option<(f64, usize, usize)> = None;
        for &a in &self.active {
            if let Some((d, b)) = self.row_best[a] {
                if best.map_or(true, |(bd, _, _)| d < bd) {
                    best = Some((d, a, b));
                }
            }
        }
        let (distance, a, b) = best?;
        let m = self.slots.len();

        for &c in &self.active {
            if c != a && c != b {
                let d = self.linkage[a * m + c].max(self.linkage[b * m + c]);
                self.linkage[a * m + c] = d;
                self.linkage[c * m + a] = d;
            }
        }
        let absorbed = self.slots[b].take().expect("active cluster present");
        let kept = self.slots[a].as_ref().expect("active cluster present");
        self.slots[a] = Some(kept.merged(&absorbed));
        self.active.retain(|&id| id != b);
        self.row_best[b] = None;

        self.refresh_row(a);
        let stale: Vec<usize> = self
            .active
            .iter()
            .copied()
            .take_while(|&c| c < b)
            .filter(|&c| c != a && matches!(self.row_best[c], Some((_, j)) if j == a || j == b))
            .collect();
        for c in stale {
            self.refresh_row(c);
        }

        let step = MergeStep {
            kept: a,
            absorbed: b,
            distance,
        };
        self.history.push(step);
        Some(step)
    }

    /// Merges until the target count is reached.
    pub fn run(&mut self) {
        while !self.is_done() {
            if self.step().is_none() {
                break;
            }
        }
    }

    /// Remaining clusters in id order.
    pub fn into_clusters(self) -> Vec<HomogeneousCluster> {
        self.slots.into_iter().flatten().collect()
    }
}

/// Merges same-label clusters down to `max(1, floor(beta * count))`.
pub fn merge_class(
    ds: &LabeledDataset,
    clusters: Vec<HomogeneousCluster>,
    beta: f64,
) -> Result<Vec<HomogeneousCluster>> {
    let mut plan = MergePlan::new(ds, clusters, beta)?;
    plan.run();
    Ok(plan.into_clusters())
}

fn group_by_label(p: &Partition) -> BTreeMap<u32, Vec<HomogeneousCluster>> {
    let mut groups: BTreeMap<u32, Vec<HomogeneousCluster>> = BTreeMap::new();
    for c in p.clusters() {
        groups.entry(c.label()).or_default().push(c.clone());
    }
    groups
}

/// Applies [`merge_class`] to every class of `p`.
pub fn merge_partition(ds: &LabeledDataset, p: &Partition, beta: f64) -> Result<Partition> {
    check_beta(beta)?;
    let merged = group_by_label(p)
        .into_par_iter()
        .map(|(_, clusters)| merge_class(ds, clusters, beta))
        .collect::<Result<Vec<_>>>()?;
    Partition::new(ds, merged.into_iter().flatten().collect())
}

fn merged_result(
    ds: &LabeledDataset,
    clusters: &[HomogeneousCluster],
    alpha: f64,
    beta: f64,
    mut wall_time: BTreeMap<String, f64>,
) -> Result<ReductionResult> {
    let started = Instant::now();
    let (spec, per_cluster_counts) = select_all(ds, clusters, alpha)?;
    wall_time.insert("select".to_string(), started.elapsed().as_secs_f64());
    Ok(ReductionResult {
        algorithm: Algorithm::MergedGhcidr,
        params: ReductionParams {
            alpha: Some(alpha),
            beta: Some(beta),
        },
        reduction_rate: reduction_rate(ds.len(), spec.len())?,
        selection: Selection::Subset(spec),
        original_n: ds.len(),
        num_classes: ds.num_classes(),
        source_fingerprint: ds.fingerprint(),
        per_cluster_counts,
        wall_time,
    })
}

/// Merged-GHCIDR: per-class merging with `beta`, then annulus sampling with
/// `alpha` on the merged clusters.
pub fn merged_ghcidr_reduce(
    ds: &LabeledDataset,
    p: &Partition,
    alpha: f64,
    beta: f64,
) -> Result<ReductionResult> {
    merged_ghcidr_reduce_detailed(ds, p, alpha, beta).map(|(result, _)| result)
}

/// [`merged_ghcidr_reduce`] that also hands back the merged partition.
pub fn merged_ghcidr_reduce_detailed(
    ds: &LabeledDataset,
    p: &Partition,
    alpha: f64,
    beta: f64,
) -> Result<(ReductionResult, Partition)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Parameter(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if p.dataset_len() != ds.len() {
        return Err(Error::Consistency(format!(
            "partition covers {} rows but the dataset has {}",
            p.dataset_len(),
            ds.len()
        )));
    }
    let started = Instant::now();
    let merged = merge_partition(ds, p, beta)?;
    let mut wall_time = BTreeMap::new();
    wall_time.insert("merge".to_string(), started.elapsed().as_secs_f64());
    let result = merged_result(ds, merged.clusters(), alpha, beta, wall_time)?;
    Ok((result, merged))
}

/// Full merge history of every class, so that the clusters for any beta can
/// be produced by replaying a prefix of it.
#[derive(Debug, Clone)]
pub struct Dendrograms {
    classes: Vec<(Vec<HomogeneousCluster>, Vec<MergeStep>)>,
    total_clusters: usize,
}

impl Dendrograms {
    pub fn build(ds: &LabeledDataset, p: &Partition) -> Result<Self> {
        let classes = group_by_label(p)
            .into_par_iter()
            .map(|(_, clusters)| {
                let mut plan = MergePlan::new(ds, clusters.clone(), 1.0)?;
                while plan.step().is_some() {}
                Ok((clusters, plan.history().to_vec()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Dendrograms {
            classes,
            total_clusters: p.len(),
        })
    }

    pub fn total_clusters(&self) -> usize {
        self.total_clusters
    }

    /// Clusters that [`merge_class`] would produce for `beta`, class by class.
    pub fn cut(&self, beta: f64) -> Result<Vec<HomogeneousCluster>> {
        check_beta(beta)?;
        let mut out = Vec::with_capacity(self.total_clusters);
        for (clusters, history) in &self.classes {
            let merges = clusters.len() - target_count(clusters.len(), beta);
            let mut slots: Vec<Option<HomogeneousCluster>> =
                clusters.iter().cloned().map(Some).collect();
            for step in &history[..merges] {
                let absorbed = slots[step.absorbed]
                    .take()
                    .expect("replayed merge of live cluster");
                let kept = slots[step.kept]
                    .as_ref()
                    .expect("replayed merge of live cluster");
                slots[step.kept] = Some(kept.merged(&absorbed));
            }
            out.extend(slots.into_iter().flatten());
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub beta: f64,
    pub reduction_rate: f64,
    /// Bisection steps taken (0 when an endpoint already matched).
    pub steps: usize,
    pub target: f64,
    pub envelope: (f64, f64),
}

/// Searches beta in `[1/#clusters, 1]` so that Merged-GHCIDR at `alpha`
/// reaches `target_reduction` within `tolerance` percentage points.
///
/// Reduction is treated as non-increasing in beta. If bisection does not land
/// within tolerance the closest beta seen is returned.
pub fn calibrate_beta(
    ds: &LabeledDataset,
    p: &Partition,
    alpha: f64,
    target_reduction: f64,
    tolerance: f64,
) -> Result<Calibration> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Parameter(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if !(tolerance >= 0.0) {
        return Err(Error::Parameter(format!(
            "tolerance must be non-negative, got {tolerance}"
        )));
    }
    let dendrograms = Dendrograms::build(ds, p)?;
    let rate_at = |beta: f64| -> Result<f64> {
        let clusters = dendrograms.cut(beta)?;
        let (spec, _) = select_all(ds, &clusters, alpha)?;
        reduction_rate(ds.len(), spec.len())
    };

    let beta_min = 1.0 / dendrograms.total_clusters() as f64;
    let low = rate_at(1.0)?;
    let high = rate_at(beta_min)?;
    let found = |beta, rate, steps| Calibration {
        beta,
        reduction_rate: rate,
        steps,
        target: target_reduction,
        envelope: (low, high),
    };
    if (low - target_reduction).abs() <= tolerance {
        return Ok(found(1.0, low, 0));
    }
    if target_reduction < low - tolerance || target_reduction > high + tolerance {
        return Err(Error::Calibration {
            target: target_reduction,
            low,
            high,
            tolerance,
        });
    }
    if (high - target_reduction).abs() <= tolerance {
        return Ok(found(beta_min, high, 0));
    }

    let (mut lo, mut hi) = (beta_min, 1.0);
    let mut best = if (high - target_reduction).abs() < (low - target_reduction).abs() {
        (beta_min, high)
    } else {
        (1.0, low)
    };
    for step in 1..=MAX_CALIBRATION_STEPS {
        let mid = 0.5 * (lo + hi);
        let rate = rate_at(mid)?;
        if (rate - target_reduction).abs() < (best.1 - target_reduction).abs() {
            best = (mid, rate);
        }
        if (rate - target_reduction).abs() <= tolerance {
            return Ok(found(mid, rate, step));
        }
        if rate > target_reduction {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(found(best.0, best.1, MAX_CALIBRATION_STEPS))
}
