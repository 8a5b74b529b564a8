//! RHC baseline: one synthetic centroid per homogeneous cluster.
//!
//!     cargo run --release --example rhc_baseline [IMAGES LABELS]

use ghcidr::{load_idx, rhc_reduce, DatasetSource, LabeledDataset};
use rand::{Rng, SeedableRng};

fn synthetic() -> LabeledDataset {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let n = 2000;
    let features: Vec<f32> = (0..n * 8).map(|_| rng.gen()).collect();
    // Label by the sign of a fixed linear score, so classes are separable.
    let labels = features
        .chunks(8)
        .map(|x| u32::from(x[0] + x[1] - x[2] > 0.5))
        .collect();
    LabeledDataset::new(features, 8, labels, None, DatasetSource::memory()).unwrap()
}

fn main() -> ghcidr::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let ds = match args.as_slice() {
        [images, labels] => load_idx(images, labels)?,
        _ => synthetic(),
    };
    let result = rhc_reduce(&ds);
    let reduced = result.reduced_dataset(&ds)?;
    println!(
        "RHC kept {} synthetic points of {} ({:.3}% reduction)",
        result.reduced_len(),
        ds.len(),
        result.reduction_rate
    );
    println!(
        "first centroid, label {}: {:?}",
        reduced.label(0),
        &reduced.row(0)[..reduced.dim().min(8)]
    );
    for (stage, secs) in &result.wall_time {
        println!("  {stage}: {secs:.3}s");
    }
    Ok(())
}
