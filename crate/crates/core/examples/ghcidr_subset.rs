//! GHCIDR: keep real rows sampled across concentric shells of each cluster,
//! and write the kept indices to a file.
//!
//!     cargo run --release --example ghcidr_subset [ALPHA [IMAGES LABELS]]

use ghcidr::{
    ghcidr_reduce, load_idx, read_indices, rhc_partition, write_subset, DatasetSource,
    LabeledDataset, SubsetFormat,
};
use rand::{Rng, SeedableRng};

fn synthetic() -> LabeledDataset {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let centres = [[0.2f32, 0.2], [0.8, 0.3], [0.5, 0.8]];
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for i in 0..3000 {
        let c = i % 3;
        for &x in &centres[c] {
            features.push((x + rng.gen_range(-0.25..0.25f32)).clamp(0.0, 1.0));
        }
        labels.push(c as u32);
    }
    LabeledDataset::new(features, 2, labels, None, DatasetSource::memory()).unwrap()
}

fn main() -> ghcidr::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let alpha: f64 = args
        .first()
        .map_or(Ok(0.85), |a| a.parse())
        .expect("ALPHA is a number");
    let ds = match &args[..] {
        [_, images, labels] => load_idx(images, labels)?,
        _ => synthetic(),
    };
    let p = rhc_partition(&ds);
    let result = ghcidr_reduce(&ds, &p, alpha)?;
    let spec = result.subset().expect("GHCIDR keeps rows");
    println!(
        "alpha {alpha}: {} clusters, kept {} of {} rows ({:.3}% reduction)",
        p.len(),
        spec.len(),
        ds.len(),
        result.reduction_rate
    );
    for (label, count) in result.per_class_counts(&ds)? {
        println!("  class {label}: {count} kept");
    }

    let path = std::env::temp_dir().join("ghcidr_subset_example.txt");
    write_subset(&ds, spec, &path, SubsetFormat::Indices)?;
    assert_eq!(&read_indices(&path)?, spec);
    println!("indices written to {}", path.display());
    Ok(())
}
