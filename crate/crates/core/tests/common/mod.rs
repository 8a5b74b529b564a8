#![allow(dead_code)]

pub mod checks;
pub mod oracle;

use std::path::{Path, PathBuf};

use ghcidr::{DatasetSource, HomogeneousCluster, LabeledDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Labeled Gaussian blobs in `[0, 1]^dim`. Each class owns `blobs_per_class`
/// centres; points are clamped into the unit cube.
pub fn blobs(
    seed: u64,
    n: usize,
    dim: usize,
    classes: u32,
    blobs_per_class: usize,
    spread: f64,
) -> LabeledDataset {
    let mut r = rng(seed);
    let centres: Vec<(u32, Vec<f64>)> = (0..classes)
        .flat_map(|c| (0..blobs_per_class).map(move |_| c))
        .map(|c| (c, (0..dim).map(|_| r.gen_range(0.15..0.85)).collect()))
        .collect();
    let noise = Normal::new(0.0, spread).expect("positive spread");
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let (label, centre) = &centres[r.gen_range(0..centres.len())];
        labels.push(*label);
        features.extend(
            centre
                .iter()
                .map(|&x| (x + noise.sample(&mut r)).clamp(0.0, 1.0) as f32),
        );
    }
    LabeledDataset::new(
        features,
        dim,
        labels,
        Some(classes),
        DatasetSource::memory(),
    )
    .expect("valid fixture")
}

/// Random labeled points, uniform in the unit cube.
pub fn uniform(seed: u64, n: usize, dim: usize, classes: u32) -> LabeledDataset {
    let mut r = rng(seed);
    let features = (0..n * dim).map(|_| r.gen::<f32>()).collect();
    let labels = (0..n).map(|_| r.gen_range(0..classes)).collect();
    LabeledDataset::new(
        features,
        dim,
        labels,
        Some(classes),
        DatasetSource::memory(),
    )
    .expect("valid fixture")
}

/// Splits `ds` into singleton clusters, one per row, all of one label.
pub fn singletons(ds: &LabeledDataset) -> Vec<HomogeneousCluster> {
    (0..ds.len())
        .map(|i| HomogeneousCluster::new(ds, vec![i]).expect("singleton"))
        .collect()
}

/// Plain f64 Euclidean distance, no lane splitting.
pub fn naive_distance(a: &[f32], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y) * (x as f64 - y))
        .sum::<f64>()
        .sqrt()
}

pub fn naive_mean(ds: &LabeledDataset, members: &[usize]) -> Vec<f64> {
    let mut m = vec![0.0; ds.dim()];
    for &i in members {
        for (acc, &x) in m.iter_mut().zip(ds.row(i)) {
            *acc += x as f64;
        }
    }
    m.iter_mut().for_each(|x| *x /= members.len() as f64);
    m
}

/// Directory holding prepared benchmark data, if any.
pub fn data_dir() -> PathBuf {
    std::env::var_os("GHCIDR_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

pub fn write_idx(
    dir: &Path,
    name: &str,
    images: &[u8],
    labels: &[u8],
    rows: u32,
    cols: u32,
) -> (PathBuf, PathBuf) {
    let n = labels.len() as u32;
    let img = dir.join(format!("{name}-images-idx3-ubyte"));
    let lab = dir.join(format!("{name}-labels-idx1-ubyte"));
    let mut bytes = Vec::new();
    for v in [0x803u32, n, rows, cols] {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    bytes.extend_from_slice(images);
    std::fs::write(&img, bytes).unwrap();
    let mut bytes = Vec::new();
    for v in [0x801u32, n] {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    bytes.extend_from_slice(labels);
    std::fs::write(&lab, bytes).unwrap();
    (img, lab)
}
