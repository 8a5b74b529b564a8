//! Reference implementations used as test oracles.

use std::collections::BTreeMap;

use ghcidr::LabeledDataset;

use super::naive_distance;

/// Enumerates every shell and every member with explicit interval tests.
pub fn annulus_oracle(dist: &[(f64, usize)], alpha: f64) -> Vec<usize> {
    let size = dist.len();
    let max_dist = dist.iter().map(|d| d.0).fold(0.0, f64::max);
    let mut nearest = dist[0];
    for &d in dist {
        if d.0 < nearest.0 || (d.0 == nearest.0 && d.1 < nearest.1) {
            nearest = d;
        }
    }
    let mut out = vec![nearest.1];
    let weight = (1.0 - alpha) * size as f64;
    let shells = (weight + 1e-9).floor() as usize;
    if shells > 0 && max_dist > 0.0 {
        let gamma = max_dist / weight;
        for i in 0..shells {
            let r1 = i as f64 * gamma;
            let mut r2 = (i + 1) as f64 * gamma;
            let outermost = i + 1 == shells;
            if outermost && (r2 - max_dist).abs() <= 1e-9 * max_dist {
                r2 = max_dist;
            }
            let mid = (r1 + r2) / 2.0;
            let mut best: Option<(f64, usize)> = None;
            for &(d, idx) in dist {
                let inside = d >= r1 && (d < r2 || (outermost && d <= r2));
                if !inside {
                    continue;
                }
                let gap = (d - mid).abs();
                if best.map_or(true, |(bg, bi)| gap < bg || (gap == bg && idx < bi)) {
                    best = Some((gap, idx));
                }
            }
            if let Some((_, idx)) = best {
                out.push(idx);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

pub fn brute_linkage(ds: &LabeledDataset, a: &[usize], b: &[usize]) -> f64 {
    let mut worst = 0.0f64;
    for &i in a {
        for &j in b {
            let row_j: Vec<f64> = ds.row(j).iter().map(|&x| x as f64).collect();
            worst = worst.max(naive_distance(ds.row(i), &row_j));
        }
    }
    worst
}

/// Sorts all training rows by (distance, index) and votes over the first k.
pub fn knn_oracle(train: &LabeledDataset, test: &LabeledDataset, k: usize) -> f64 {
    let mut correct = 0;
    for t in 0..test.len() {
        let q: Vec<f64> = test.row(t).iter().map(|&x| x as f64).collect();
        let mut order: Vec<(f64, usize)> = (0..train.len())
            .map(|i| (naive_distance(train.row(i), &q), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes: BTreeMap<u32, usize> = BTreeMap::new();
        for &(_, i) in &order[..k] {
            *votes.entry(train.label(i)).or_default() += 1;
        }
        let top = votes.values().copied().max().unwrap();
        let pred = votes
            .iter()
            .find(|(_, &v)| v == top)
            .map(|(&l, _)| l)
            .unwrap();
        if pred == test.label(t) {
            correct += 1;
        }
    }
    100.0 * correct as f64 / test.len() as f64
}
