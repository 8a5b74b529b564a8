//! Euclidean distance and the Lloyd k-means used to split mixed clusters.

use rayon::prelude::*;

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// Points per rayon task when assigning points to centroids.
const ASSIGN_CHUNK: usize = 256;

pub fn euclidean_distance(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Consistency(format!(
            "cannot compare vectors of dimension {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(squared_distance(a, b).sqrt())
}

/// Squared distance accumulated in f64 over four independent lanes.
#[inline]
pub(crate) fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in ca.by_ref().zip(cb.by_ref()) {
        for l in 0..4 {
            let d = f64::from(x[l]) - f64::from(y[l]);
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        let d = f64::from(*x) - f64::from(*y);
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Squared distance from a stored row to an f64 point (centroid).
#[inline]
pub(crate) fn squared_distance_to(a: &[f32], c: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), c.len());
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cc = c.chunks_exact(4);
    for (x, y) in ca.by_ref().zip(cc.by_ref()) {
        for l in 0..4 {
            let d = f64::from(x[l]) - y[l];
            acc[l] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cc.remainder()) {
        let d = f64::from(*x) - *y;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Arithmetic mean of the given rows, summed in index order.
pub(crate) fn mean_of(ds: &LabeledDataset, members: &[usize]) -> Vec<f64> {
    let mut sum = vec![0.0f64; ds.dim()];
    for &i in members {
        for (s, &v) in sum.iter_mut().zip(ds.row(i)) {
            *s += f64::from(v);
        }
    }
    let n = members.len() as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    sum
}

/// k centroids, each tagged with the class whose mean seeded it.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidSet {
    centroids: Vec<f64>,
    dim: usize,
    seed_labels: Vec<u32>,
}

impl CentroidSet {
    pub fn new(centroids: Vec<f64>, dim: usize, seed_labels: Vec<u32>) -> Result<Self> {
        if dim == 0 || seed_labels.is_empty() || centroids.len() != dim * seed_labels.len() {
            return Err(Error::Consistency(format!(
                "{} centroid values do not form {} centroids of dimension {dim}",
                centroids.len(),
                seed_labels.len()
            )));
        }
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::Consistency("centroid values must be finite".into()));
        }
        let mut sorted = seed_labels.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Consistency(
                "centroid seed labels must be distinct".into(),
            ));
        }
        Ok(CentroidSet {
            centroids,
            dim,
            seed_labels,
        })
    }

    pub fn k(&self) -> usize {
        self.seed_labels.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn centroid(&self, j: usize) -> &[f64] {
        &self.centroids[j * self.dim..(j + 1) * self.dim]
    }

    pub fn seed_labels(&self) -> &[u32] {
        &self.seed_labels
    }
}

/// Centroid index for each in-scope point, in scope order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub owner: Vec<usize>,
}

impl Assignment {
    /// Splits `scope` into one index list per centroid.
    pub fn groups(&self, scope: &[usize], k: usize) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); k];
        for (&i, &o) in scope.iter().zip(&self.owner) {
            groups[o].push(i);
        }
        groups
    }
}

/// One centroid per distinct label in `scope`, ordered by label.
pub fn class_means(ds: &LabeledDataset, scope: &[usize]) -> Result<CentroidSet> {
    if scope.is_empty() {
        return Err(Error::Consistency(
            "cannot compute class means of an empty scope".into(),
        ));
    }
    let mut labels: Vec<u32> = scope.iter().map(|&i| ds.label(i)).collect();
    labels.sort_unstable();
    labels.dedup();

    let dim = ds.dim();
    let mut sums = vec![0.0f64; labels.len() * dim];
    let mut counts = vec![0usize; labels.len()];
    for &i in scope {
        let j = labels
            .binary_search(&ds.label(i))
            .expect("label collected above");
        counts[j] += 1;
        for (s, &v) in sums[j * dim..(j + 1) * dim].iter_mut().zip(ds.row(i)) {
            *s += f64::from(v);
        }
    }
    for (j, &c) in counts.iter().enumerate() {
        sums[j * dim..(j + 1) * dim]
            .iter_mut()
            .for_each(|s| *s /= c as f64);
    }
    CentroidSet::new(sums, dim, labels)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            max_iter: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansOutcome {
    pub assignment: Assignment,
    pub centroids: CentroidSet,
    pub iterations: usize,
    /// Within-cluster sum of squares after the initial assignment and after
    /// every iteration.
    pub inertia: Vec<f64>,
}

/// Lloyd's algorithm restricted to `scope`.
///
/// Points go to the nearest centroid, lowest index on ties. A centroid left
/// without points is moved onto the in-scope point farthest from every
/// surviving centroid. Centroids that still own nothing at the end are
/// dropped, so every returned centroid owns at least one point.
pub fn kmeans(
    ds: &LabeledDataset,
    scope: &[usize],
    init: &CentroidSet,
    config: KMeansConfig,
) -> Result<KMeansOutcome> {
    if init.dim() != ds.dim() {
        return Err(Error::Consistency(format!(
            "centroid dimension {} does not match dataset dimension {}",
            init.dim(),
            ds.dim()
        )));
    }
    if init.k() > scope.len() {
        return Err(Error::Consistency(format!(
            "cannot fit {} centroids to {} points",
            init.k(),
            scope.len()
        )));
    }
    if config.max_iter == 0 || !(config.tol >= 0.0) {
        return Err(Error::Parameter(
            "k-means needs max_iter >= 1 and a non-negative tolerance".into(),
        ));
    }
    if let Some(&bad) = scope.iter().find(|&&i| i >= ds.len()) {
        return Err(Error::Consistency(format!(
            "scope index {bad} is out of range"
        )));
    }

    let dim = ds.dim();
    let k = init.k();
    let mut centroids = init.centroids.clone();
    let (mut owner, cost) = assign(ds, scope, &centroids, dim);
    let mut inertia = vec![cost];
    let mut iterations = 0;

    while iterations < config.max_iter {
        iterations += 1;
        let mut next = centroids.clone();
        let counts = recompute_means(ds, scope, &owner, &mut next, dim);
        reseed_empty(ds, scope, &counts, &mut next, dim);

        let shift = (0..k)
            .map(|j| {
                let a = &centroids[j * dim..(j + 1) * dim];
                let b = &next[j * dim..(j + 1) * dim];
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0f64, f64::max);
        centroids = next;

        let (new_owner, cost) = assign(ds, scope, &centroids, dim);
        let changed = new_owner != owner;
        owner = new_owner;
        inertia.push(cost);
        if !changed || shift <= config.tol {
            break;
        }
    }

    // Drop centroids that own nothing and renumber the rest.
    let mut owned = vec![false; k];
    owner.iter().for_each(|&o| owned[o] = true);
    let mut remap = vec![usize::MAX; k];
    let mut kept_centroids = Vec::with_capacity(centroids.len());
    let mut kept_labels = Vec::with_capacity(k);
    for j in (0..k).filter(|&j| owned[j]) {
        remap[j] = kept_labels.len();
        kept_labels.push(init.seed_labels[j]);
        kept_centroids.extend_from_slice(&centroids[j * dim..(j + 1) * dim]);
    }
    owner.iter_mut().for_each(|o| *o = remap[*o]);

    Ok(KMeansOutcome {
        assignment: Assignment { owner },
        centroids: CentroidSet::new(kept_centroids, dim, kept_labels)?,
        iterations,
        inertia,
    })
}

fn nearest(row: &[f32], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = squared_distance_to(row, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn assign(
    ds: &LabeledDataset,
    scope: &[usize],
    centroids: &[f64],
    dim: usize,
) -> (Vec<usize>, f64) {
    let nearest: Vec<(usize, f64)> = scope
        .par_iter()
        .with_min_len(ASSIGN_CHUNK)
        .map(|&i| nearest(ds.row(i), centroids, dim))
        .collect();
    // Summed sequentially so the total does not depend on task splitting.
    let cost = nearest.iter().map(|&(_, d)| d).sum();
    (nearest.into_iter().map(|(j, _)| j).collect(), cost)
}

/// Overwrites each non-empty centroid with the mean of its points and returns
/// the point counts. Empty centroids keep their previous position.
fn recompute_means(
    ds: &LabeledDataset,
    scope: &[usize],
    owner: &[usize],
    centroids: &mut [f64],
    dim: usize,
) -> Vec<usize> {
    let k = centroids.len() / dim;
    let mut sums = vec![0.0f64; k * dim];
    let mut counts = vec![0usize; k];
    for (&i, &o) in scope.iter().zip(owner) {
        counts[o] += 1;
        for (s, &v) in sums[o * dim..(o + 1) * dim].iter_mut().zip(ds.row(i)) {
            *s += f64::from(v);
        }
    }
    for j in (0..k).filter(|&j| counts[j] > 0) {
        let n = counts[j] as f64;
        for (c, s) in centroids[j * dim..(j + 1) * dim]
            .iter_mut()
            .zip(&sums[j * dim..(j + 1) * dim])
        {
            *c = s / n;
        }
    }
    counts
}

fn reseed_empty(
    ds: &LabeledDataset,
    scope: &[usize],
    counts: &[usize],
    centroids: &mut [f64],
    dim: usize,
) {
    if counts.iter().all(|&c| c > 0) {
        return;
    }
    let alive: Vec<usize> = (0..counts.len()).filter(|&j| counts[j] > 0).collect();
    let mut gap: Vec<f64> = scope
        .par_iter()
        .with_min_len(ASSIGN_CHUNK)
        .map(|&i| {
            alive
                .iter()
                .map(|&j| squared_distance_to(ds.row(i), &centroids[j * dim..(j + 1) * dim]))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    for j in (0..counts.len()).filter(|&j| counts[j] == 0) {
        let mut far = None;
        for (p, &g) in gap.iter().enumerate() {
            if g > 0.0 && far.map_or(true, |(_, best)| g > best) {
                far = Some((p, g));
            }
        }
        let Some((p, _)) = far else { return };
        let row = ds.row(scope[p]);
        for (c, &v) in centroids[j * dim..(j + 1) * dim].iter_mut().zip(row) {
            *c = f64::from(v);
        }
        let seeded = &centroids[j * dim..(j + 1) * dim];
        for (g, &i) in gap.iter_mut().zip(scope) {
            *g = g.min(squared_distance_to(ds.row(i), seeded));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DatasetSource;

    fn ds2(points: &[(f32, f32)], labels: &[u32]) -> LabeledDataset {
        let features = points.iter().flat_map(|&(x, y)| [x, y]).collect();
        LabeledDataset::new(features, 2, labels.to_vec(), None, DatasetSource::memory()).unwrap()
    }

    #[test]
    fn distance_basics() {
        assert_eq!(euclidean_distance(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(euclidean_distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert!(euclidean_distance(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn class_means_two_points() {
        let ds = ds2(&[(0.0, 0.0), (1.0, 1.0)], &[0, 1]);
        let cs = class_means(&ds, &[0, 1]).unwrap();
        assert_eq!(cs.k(), 2);
        assert_eq!(cs.centroid(0), &[0.0, 0.0]);
        assert_eq!(cs.centroid(1), &[1.0, 1.0]);
        assert_eq!(cs.seed_labels(), &[0, 1]);
        assert!(class_means(&ds, &[]).is_err());
    }

    #[test]
    fn single_label_scope_is_its_mean() {
        let ds = ds2(&[(0.0, 0.0), (0.5, 1.0), (1.0, 0.5)], &[2, 2, 2]);
        let cs = class_means(&ds, &[0, 1, 2]).unwrap();
        assert_eq!(cs.k(), 1);
        assert_eq!(cs.centroid(0), &[0.5, 0.5]);
        let out = kmeans(&ds, &[0, 1, 2], &cs, KMeansConfig::default()).unwrap();
        assert_eq!(out.assignment.owner, vec![0, 0, 0]);
        assert_eq!(out.centroids.centroid(0), &[0.5, 0.5]);
    }

    #[test]
    fn too_many_centroids() {
        let ds = ds2(&[(0.0, 0.0), (1.0, 1.0)], &[0, 1]);
        let cs = class_means(&ds, &[0, 1]).unwrap();
        assert!(matches!(
            kmeans(&ds, &[0], &cs, KMeansConfig::default()),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn coincident_seeds_are_separated() {
        // Both class means sit at 0.5, so centroid 1 starts empty and must be
        // re-seeded onto the farthest point.
        let ds = LabeledDataset::new(
            vec![0.0, 0.5, 1.0],
            1,
            vec![0, 1, 0],
            None,
            DatasetSource::memory(),
        )
        .unwrap();
        let cs = class_means(&ds, &[0, 1, 2]).unwrap();
        assert_eq!(cs.centroid(0), cs.centroid(1));
        let out = kmeans(&ds, &[0, 1, 2], &cs, KMeansConfig::default()).unwrap();
        assert_eq!(out.centroids.k(), 2);
        let groups = out.assignment.groups(&[0, 1, 2], 2);
        assert!(groups.iter().all(|g| !g.is_empty()));
    }
}
