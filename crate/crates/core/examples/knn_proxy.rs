//! Score reduced training sets with exact 1-NN on held-out data, against a
//! random subset of the same size. This is a cheap proxy, not CNN accuracy.
//!
//!     cargo run --release --example knn_proxy [TRAIN_IMAGES TRAIN_LABELS TEST_IMAGES TEST_LABELS]

use ghcidr::{
    evaluate, ghcidr_reduce, knn_accuracy, load_idx, merged_ghcidr_reduce, rhc_partition,
    rhc_reduce_partition, DatasetSource, LabeledDataset, SubsetSpec,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};

fn synthetic(seed: u64, n: usize) -> LabeledDataset {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<f32> = (0..n * 2).map(|_| rng.gen()).collect();
    let labels = features
        .chunks(2)
        .map(|x| u32::from((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2) < 0.08))
        .collect();
    LabeledDataset::new(features, 2, labels, None, DatasetSource::memory()).unwrap()
}

fn main() -> ghcidr::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let (train, test) = match args.as_slice() {
        [a, b, c, d] => (load_idx(a, b)?, load_idx(c, d)?),
        _ => (synthetic(5, 4000), synthetic(6, 1000)),
    };
    let p = rhc_partition(&train);
    let results = [
        rhc_reduce_partition(&train, &p),
        ghcidr_reduce(&train, &p, 0.85)?,
        merged_ghcidr_reduce(&train, &p, 0.85, 0.4)?,
    ];
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    for result in &results {
        let report = evaluate(&train, result, &test, 1, false)?;
        let random =
            SubsetSpec::from_unsorted(sample(&mut rng, train.len(), report.reduced_n).into_vec())?;
        let baseline = knn_accuracy(&train.subset(&random)?, &test, 1)?;
        println!(
            "{:<14} kept {:>6} ({:>6.3}% reduction): 1-NN {:>6.2}%, random subset {:>6.2}%",
            report.algorithm,
            report.reduced_n,
            report.reduction_rate,
            report.reduced_accuracy,
            baseline
        );
    }
    println!(
        "full training set: 1-NN {:.2}%",
        knn_accuracy(&train, &test, 1)?
    );
    Ok(())
}
