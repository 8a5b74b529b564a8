//! Annulus sampling from homogeneous clusters.
//!
//! Each cluster is treated as a ball around its centroid. The ball is cut
//! into concentric shells of equal thickness; from every non-empty shell the
//! member whose distance is closest to the shell's mid-radius is kept, along
//! with the member nearest the centroid.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{LabeledDataset, SubsetSpec};
use crate::error::{Error, Result};
use crate::eval::{reduction_rate, Algorithm, ReductionParams, ReductionResult, Selection};
use crate::metric::squared_distance_to;
use crate::rhc::{HomogeneousCluster, Partition};

/// Slack added before flooring products such as `(1 - alpha) * size`, so a
/// mathematically integral product that lands just below the integer in
/// floating point is not floored one step too low.
pub(crate) const FLOOR_SLACK: f64 = 1e-9;

pub(crate) fn floor_product(x: f64) -> usize {
    (x + FLOOR_SLACK).floor().max(0.0) as usize
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )))
    }
}

/// Shell layout for one cluster.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnulusPlan {
    pub max_dist: f64,
    pub alpha: f64,
    /// Shell thickness; infinite when the plan has no shells.
    pub gamma: f64,
    pub annuli: usize,
    /// `(inner, outer)` radius per shell. Shells are half-open except the
    /// outermost, which includes its outer radius.
    pub bounds: Vec<(f64, f64)>,
}

impl AnnulusPlan {
    /// Shell index holding distance `d`, if any.
    pub fn shell_of(&self, d: f64) -> Option<usize> {
        let last = self.bounds.len().checked_sub(1)?;
        self.bounds
            .iter()
            .position(|&(r1, r2)| d >= r1 && d < r2)
            .or_else(|| {
                let (r1, r2) = self.bounds[last];
                (d >= r1 && d <= r2).then_some(last)
            })
    }
}

/// `annuli = floor((1 - alpha) * size)`, `gamma = max_dist / ((1 - alpha) * size)`.
pub fn plan_annuli(cluster_size: usize, max_dist: f64, alpha: f64) -> Result<AnnulusPlan> {
    check_alpha(alpha)?;
    if cluster_size == 0 {
        return Err(Error::Parameter("cluster size must be at least 1".into()));
    }
    if !(max_dist >= 0.0) || !max_dist.is_finite() {
        return Err(Error::Parameter(format!(
            "max_dist must be finite and non-negative, got {max_dist}"
        )));
    }
    let weight = (1.0 - alpha) * cluster_size as f64;
    let annuli = floor_product(weight);
    if annuli == 0 || max_dist == 0.0 {
        return Ok(AnnulusPlan {
            max_dist,
            alpha,
            gamma: f64::INFINITY,
            annuli: 0,
            bounds: Vec::new(),
        });
    }
    let gamma = max_dist / weight;
    let mut bounds: Vec<(f64, f64)> = (0..annuli)
        .map(|i| (i as f64 * gamma, (i + 1) as f64 * gamma))
        .collect();
    // An integral weight puts the last outer radius on max_dist up to rounding.
    if let Some(last) = bounds.last_mut() {
        if (last.1 - max_dist).abs() <= FLOOR_SLACK * max_dist {
            last.1 = max_dist;
        }
    }
    Ok(AnnulusPlan {
        max_dist,
        alpha,
        gamma,
        annuli,
        bounds,
    })
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Indices kept from one cluster, sorted ascending. Never empty.
pub fn select_from_cluster(
    ds: &LabeledDataset,
    c: &HomogeneousCluster,
    alpha: f64,
) -> Result<Vec<usize>> {
    let dist: Vec<(f64, usize)> = c
        .members()
        .iter()
        .map(|&i| (squared_distance_to(ds.row(i), c.centroid()).sqrt(), i))
        .collect();
    select_from_distances(dist, alpha)
}

/// Annulus selection over `(distance to centroid, index)` pairs of one cluster.
/// Returns the chosen indices sorted ascending; empty only for empty input.
pub fn select_from_distances(mut dist: Vec<(f64, usize)>, alpha: f64) -> Result<Vec<usize>> {
    check_alpha(alpha)?;
    if let Some(&(d, i)) = dist.iter().find(|(d, _)| !(*d >= 0.0) || !d.is_finite()) {
        return Err(Error::Parameter(format!(
            "distance of index {i} must be finite and non-negative, got {d}"
        )));
    }
    if dist.is_empty() {
        return Ok(Vec::new());
    }
    dist.sort_by(by_distance_then_index);

    let mut chosen = vec![dist[0].1];
    let max_dist = dist[dist.len() - 1].0;
    let plan = plan_annuli(dist.len(), max_dist, alpha)?;
    let last = plan.annuli.saturating_sub(1);

    for (shell, &(r1, r2)) in plan.bounds.iter().enumerate() {
        let lo = dist.partition_point(|&(d, _)| d < r1);
        let hi = if shell == last {
            dist.partition_point(|&(d, _)| d <= r2)
        } else {
            dist.partition_point(|&(d, _)| d < r2)
        };
        let mid = (r1 + r2) / 2.0;
        let best = dist[lo..hi.max(lo)].iter().min_by(|a, b| {
            (a.0 - mid)
                .abs()
                .total_cmp(&(b.0 - mid).abs())
                .then(a.1.cmp(&b.1))
        });
        if let Some(&(_, i)) = best {
            chosen.push(i);
        }
    }
    chosen.sort_unstable();
    chosen.dedup();
    Ok(chosen)
}

pub(crate) fn select_all(
    ds: &LabeledDataset,
    clusters: &[HomogeneousCluster],
    alpha: f64,
) -> Result<(SubsetSpec, Vec<usize>)> {
    check_alpha(alpha)?;
    let picked = clusters
        .par_iter()
        .map(|c| select_from_cluster(ds, c, alpha))
        .collect::<Result<Vec<_>>>()?;
    let per_cluster = picked.iter().map(Vec::len).collect();
    let spec = SubsetSpec::from_unsorted(picked.into_iter().flatten().collect())?;
    Ok((spec, per_cluster))
}

/// GHCIDR over every cluster of `p`. The result is an index subset of `ds`.
pub fn ghcidr_reduce(ds: &LabeledDataset, p: &Partition, alpha: f64) -> Result<ReductionResult> {
    if p.dataset_len() != ds.len() {
        return Err(Error::Consistency(format!(
            "partition covers {} rows but the dataset has {}",
            p.dataset_len(),
            ds.len()
        )));
    }
    let started = Instant::now();
    let (spec, per_cluster_counts) = select_all(ds, p.clusters(), alpha)?;
    let mut wall_time = BTreeMap::new();
    wall_time.insert("select".to_string(), started.elapsed().as_secs_f64());
    Ok(ReductionResult {
        algorithm: Algorithm::Ghcidr,
        params: ReductionParams {
            alpha: Some(alpha),
            beta: None,
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
