//! Invariant checks shared by the property tests and the acceptance suite.
//! Each returns a description of the first violation found.

use std::collections::{BTreeMap, BTreeSet};

use ghcidr::merge::MergePlan;
use ghcidr::{
    ghcidr_reduce, knn_accuracy, merged_ghcidr_reduce, plan_annuli, rhc_partition, rhc_reduce,
    select_from_cluster, HomogeneousCluster, LabeledDataset, Partition,
};

use super::oracle::{annulus_oracle, brute_linkage, knn_oracle};
use super::{naive_distance, naive_mean, uniform};

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Disjoint cover of every row, single label per cluster, centroid = mean.
pub fn partition(ds: &LabeledDataset, p: &Partition) -> Check {
    let mut seen = vec![false; ds.len()];
    for (k, c) in p.clusters().iter().enumerate() {
        ensure!(!c.members().is_empty(), "cluster {k} is empty");
        for &i in c.members() {
            ensure!(!seen[i], "row {i} appears in two clusters");
            seen[i] = true;
            ensure!(
                ds.label(i) == c.label(),
                "row {i} has label {} in cluster {k} of label {}",
                ds.label(i),
                c.label()
            );
        }
        let mean = naive_mean(ds, c.members());
        ensure!(
            mean.iter()
                .zip(c.centroid())
                .all(|(a, b)| (a - b).abs() < 1e-9),
            "cluster {k} centroid is not its member mean"
        );
    }
    ensure!(seen.iter().all(|&s| s), "some row is in no cluster");
    Ok(())
}

/// Subset property, coverage floor and ceiling, label floor, and oracle
/// equivalence on clusters of at most 50 points.
pub fn ghcidr_selection(ds: &LabeledDataset, p: &Partition, alpha: f64) -> Check {
    let result = ghcidr_reduce(ds, p, alpha).map_err(|e| e.to_string())?;
    ensure!(!result.synthetic(), "GHCIDR produced synthetic points");
    let selected: BTreeSet<usize> = result.subset().unwrap().indices().iter().copied().collect();
    ensure!(
        selected.iter().all(|&i| i < ds.len()),
        "selection leaves the dataset"
    );
    ensure!(
        selected.len() >= p.len(),
        "{} selected for {} clusters",
        selected.len(),
        p.len()
    );

    let mut ceiling = 0;
    let mut union = BTreeSet::new();
    let mut clusters_per_class: BTreeMap<u32, usize> = BTreeMap::new();
    for c in p.clusters() {
        let picked = select_from_cluster(ds, c, alpha).map_err(|e| e.to_string())?;
        ensure!(!picked.is_empty(), "a cluster contributed nothing");
        ensure!(
            picked.iter().all(|i| c.members().binary_search(i).is_ok()),
            "a selection left its own cluster"
        );
        let plan = plan_annuli(c.len(), 1.0, alpha).map_err(|e| e.to_string())?;
        ceiling += 1 + plan.annuli;
        if c.len() <= 50 {
            let dist: Vec<(f64, usize)> = c
                .members()
                .iter()
                .map(|&i| (naive_distance(ds.row(i), c.centroid()), i))
                .collect();
            ensure!(
                picked == annulus_oracle(&dist, alpha),
                "oracle disagrees on a cluster of {}",
                c.len()
            );
        }
        union.extend(picked);
        *clusters_per_class.entry(c.label()).or_default() += 1;
    }
    ensure!(
        union == selected,
        "per-cluster selections do not add up to the result"
    );
    ensure!(
        selected.len() <= ceiling,
        "{} selected above the ceiling {ceiling}",
        selected.len()
    );
    let mut per_class: BTreeMap<u32, usize> = BTreeMap::new();
    selected
        .iter()
        .for_each(|&i| *per_class.entry(ds.label(i)).or_default() += 1);
    for (label, &clusters) in &clusters_per_class {
        ensure!(
            per_class.get(label).copied().unwrap_or(0) >= clusters,
            "class {label} kept fewer rows than clusters"
        );
    }
    Ok(())
}

/// `annuli == floor((1 - alpha) * size)` over the alpha grid, computed in
/// exact integer arithmetic.
pub fn annulus_counts(max_size: usize) -> Check {
    // alpha as a fraction of 100
    for (alpha, hundredths) in [(0.0, 0), (0.25, 25), (0.5, 50), (0.85, 85), (1.0, 100)] {
        for size in 1..=max_size {
            let want = (100 - hundredths) * size / 100;
            let got = plan_annuli(size, 1.0, alpha)
                .map_err(|e| e.to_string())?
                .annuli;
            ensure!(
                got == want,
                "alpha {alpha} size {size}: {got} annuli, want {want}"
            );
        }
    }
    Ok(())
}

/// Recurrence-maintained linkage equals brute force after every merge.
pub fn linkage_exactness(ds: &LabeledDataset, clusters: Vec<HomogeneousCluster>) -> Check {
    ensure!(
        clusters.len() <= 12,
        "fixture has {} clusters",
        clusters.len()
    );
    let m = clusters.len();
    let mut plan = MergePlan::new(ds, clusters, 1.0 / m as f64).map_err(|e| e.to_string())?;
    loop {
        let active = plan.active().to_vec();
        for (x, &a) in active.iter().enumerate() {
            for &b in &active[x + 1..] {
                let want = brute_linkage(
                    ds,
                    plan.cluster(a).unwrap().members(),
                    plan.cluster(b).unwrap().members(),
                );
                ensure!(
                    (plan.linkage(a, b) - want).abs() < 1e-12,
                    "linkage ({a},{b}) drifted from brute force"
                );
            }
        }
        if plan.step().is_none() {
            return Ok(());
        }
    }
}

pub fn beta_one_equals_ghcidr(ds: &LabeledDataset, p: &Partition, alpha: f64) -> Check {
    let plain = ghcidr_reduce(ds, p, alpha).map_err(|e| e.to_string())?;
    let merged = merged_ghcidr_reduce(ds, p, alpha, 1.0).map_err(|e| e.to_string())?;
    ensure!(
        plain.subset() == merged.subset(),
        "beta = 1 changed the selection"
    );
    Ok(())
}

/// Every pipeline stage run twice gives identical output.
pub fn determinism(ds: &LabeledDataset, alpha: f64, beta: f64) -> Check {
    let p1 = rhc_partition(ds);
    let p2 = rhc_partition(ds);
    ensure!(p1 == p2, "partition differs between runs");
    ensure!(
        rhc_reduce(ds).selection == rhc_reduce(ds).selection,
        "RHC centroids differ between runs"
    );
    let g = |p: &Partition| {
        ghcidr_reduce(ds, p, alpha)
            .map(|r| r.selection)
            .map_err(|e| e.to_string())
    };
    ensure!(g(&p1)? == g(&p2)?, "GHCIDR differs between runs");
    let m = |p: &Partition| {
        merged_ghcidr_reduce(ds, p, alpha, beta)
            .map(|r| r.selection)
            .map_err(|e| e.to_string())
    };
    ensure!(m(&p1)? == m(&p2)?, "Merged-GHCIDR differs between runs");
    Ok(())
}

/// k-NN evaluator against the sort-based oracle on 30-point fixtures.
pub fn knn(seed: u64) -> Check {
    let train = uniform(seed, 30, 3, 3);
    let test = uniform(seed ^ 0x5eed, 30, 3, 3);
    for k in [1, 3, 7] {
        let got = knn_accuracy(&train, &test, k).map_err(|e| e.to_string())?;
        let want = knn_oracle(&train, &test, k);
        ensure!(got == want, "k = {k}: {got} vs oracle {want}");
    }
    let own = knn_accuracy(&train, &train, 1).map_err(|e| e.to_string())?;
    let distinct = (0..30).all(|i| (0..i).all(|j| train.row(i) != train.row(j)));
    ensure!(!distinct || own == 100.0, "self-test accuracy {own}");
    Ok(())
}
