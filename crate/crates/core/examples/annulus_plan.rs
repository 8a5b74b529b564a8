//! Show the shell layout and the rows GHCIDR keeps from one cluster.
//!
//!     cargo run --example annulus_plan [ALPHA]

use ghcidr::{plan_annuli, select_from_distances};

fn main() -> ghcidr::Result<()> {
    let alpha: f64 = std::env::args()
        .nth(1)
        .map_or(Ok(3.0 / 7.0), |a| a.parse())
        .expect("ALPHA is a number");
    // Distances of seven cluster members from their centroid.
    let distances = [0.0, 1.0, 2.4, 2.6, 5.0, 9.0, 10.0];
    let plan = plan_annuli(distances.len(), 10.0, alpha)?;
    println!(
        "alpha {alpha}: {} shells of width {}",
        plan.annuli, plan.gamma
    );
    for (i, (r1, r2)) in plan.bounds.iter().enumerate() {
        let inside: Vec<f64> = distances
            .iter()
            .copied()
            .filter(|&d| plan.shell_of(d) == Some(i))
            .collect();
        println!(
            "  shell {i}: [{r1}, {r2}{} holds {inside:?}",
            if i + 1 == plan.annuli { "]" } else { ")" }
        );
    }
    let pairs = distances.iter().enumerate().map(|(i, &d)| (d, i)).collect();
    let kept = select_from_distances(pairs, alpha)?;
    let kept_d: Vec<f64> = kept.iter().map(|&i| distances[i]).collect();
    println!("kept members {kept:?} at distances {kept_d:?}");
    Ok(())
}
