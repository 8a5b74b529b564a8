//! Merged-GHCIDR: merge same-label clusters by complete linkage down to a
//! beta fraction, then sample shells. Compares several beta values.
//!
//!     cargo run --release --example merged_ghcidr [IMAGES LABELS]

use ghcidr::{
    ghcidr_reduce, load_idx, merge_partition, merged_ghcidr_reduce, rhc_partition,
    rhc_reduce_partition, DatasetSource, LabeledDataset,
};
use rand::{Rng, SeedableRng};

fn synthetic() -> LabeledDataset {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let n = 3000;
    let features: Vec<f32> = (0..n * 4).map(|_| rng.gen()).collect();
    let labels = features
        .chunks(4)
        .map(|x| ((x[0] * 3.0) as u32 + (x[1] * 2.0) as u32) % 4)
        .collect();
    LabeledDataset::new(features, 4, labels, None, DatasetSource::memory()).unwrap()
}

fn main() -> ghcidr::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let ds = match args.as_slice() {
        [images, labels] => load_idx(images, labels)?,
        _ => synthetic(),
    };
    let alpha = 0.85;
    let p = rhc_partition(&ds);
    println!(
        "RHC:    {:>6.3}% reduction, {} clusters",
        rhc_reduce_partition(&ds, &p).reduction_rate,
        p.len()
    );
    println!(
        "GHCIDR: {:>6.3}% reduction at alpha {alpha}",
        ghcidr_reduce(&ds, &p, alpha)?.reduction_rate
    );
    for beta in [1.0, 0.7, 0.4, 0.2, 0.05] {
        let merged = merge_partition(&ds, &p, beta)?;
        let r = merged_ghcidr_reduce(&ds, &p, alpha, beta)?;
        println!(
            "beta {beta:<4}: {:>5} merged clusters, {:>6.3}% reduction",
            merged.len(),
            r.reduction_rate
        );
    }
    Ok(())
}
