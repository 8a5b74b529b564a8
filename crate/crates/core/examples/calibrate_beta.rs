//! Find the beta at which Merged-GHCIDR matches the RHC reduction rate.
//!
//!     cargo run --release --example calibrate_beta [ALPHA [IMAGES LABELS]]

use ghcidr::{
    calibrate_beta, load_idx, merge::DEFAULT_CALIBRATION_TOLERANCE, rhc_partition,
    rhc_reduce_partition, DatasetSource, Error, LabeledDataset,
};
use rand::{Rng, SeedableRng};

fn synthetic() -> LabeledDataset {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let n = 2000;
    let features: Vec<f32> = (0..n * 3).map(|_| rng.gen()).collect();
    let labels = features
        .chunks(3)
        .map(|x| ((x[0] + x[1]) * 2.0) as u32 % 3)
        .collect();
    LabeledDataset::new(features, 3, labels, None, DatasetSource::memory()).unwrap()
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
    let target = rhc_reduce_partition(&ds, &p).reduction_rate;
    println!("target (RHC) reduction: {target:.3}%");
    match calibrate_beta(&ds, &p, alpha, target, DEFAULT_CALIBRATION_TOLERANCE) {
        Ok(cal) => println!(
            "beta {:.5} gives {:.3}% after {} bisection steps (achievable range {:.3}%..{:.3}%)",
            cal.beta, cal.reduction_rate, cal.steps, cal.envelope.0, cal.envelope.1
        ),
        Err(Error::Calibration { low, high, .. }) => {
            println!("alpha {alpha} cannot reach the target: any beta gives {low:.3}%..{high:.3}%")
        }
        Err(e) => return Err(e),
    }
    Ok(())
}
