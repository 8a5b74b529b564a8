//! Partition a dataset into homogeneous clusters and print the size histogram.
//!
//!     cargo run --release --example partition_stats [IMAGES LABELS]
//!
//! Without arguments a synthetic two-moons-like dataset is used.

use ghcidr::{load_idx, rhc_partition, DatasetSource, LabeledDataset};

fn synthetic() -> LabeledDataset {
    // Two interleaved spirals, 600 points each, in [0, 1]^2.
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for i in 0..1200u32 {
        let t = (i / 2) as f32 / 600.0 * 3.0 * std::f32::consts::PI;
        let r = 0.05 + 0.4 * t / (3.0 * std::f32::consts::PI);
        let flip = if i % 2 == 0 { 1.0 } else { -1.0 };
        features.push(0.5 + flip * r * t.cos());
        features.push(0.5 + flip * r * t.sin());
        labels.push(i % 2);
    }
    LabeledDataset::new(features, 2, labels, None, DatasetSource::memory()).unwrap()
}

fn main() -> ghcidr::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let ds = match args.as_slice() {
        [images, labels] => load_idx(images, labels)?,
        _ => synthetic(),
    };
    let p = rhc_partition(&ds);
    let stats = p.stats();
    println!("{} rows, {} homogeneous clusters", ds.len(), p.len());
    for band in &stats.bands {
        let upper = band.max_size.map_or("+".to_string(), |m| format!("-{m}"));
        println!(
            "  size {:>3}{:<4} {:>6} clusters {:>7} images (cumulative {})",
            band.min_size, upper, band.clusters, band.images, band.cumulative_images
        );
    }
    Ok(())
}
