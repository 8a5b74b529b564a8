//! Drive the command-line pipeline from code: build a run configuration from
//! arguments and capture the JSON report in memory.
//!
//!     cargo run --example cli_config

use clap::Parser;
use ghcidr::cli::{Cli, RunConfig};

fn main() -> ghcidr::Result<()> {
    let dir = std::env::temp_dir().join("ghcidr_cli_config_example");
    std::fs::create_dir_all(&dir).map_err(|e| ghcidr::Error::Consistency(e.to_string()))?;
    let csv = dir.join("points.csv");
    let mut rows = String::from("label,x,y\n");
    for i in 0..200 {
        let t = i as f32 / 200.0;
        rows.push_str(&format!(
            "{},{},{}\n",
            u32::from(t > 0.5),
            t,
            (t * 7.0).sin() * 0.5 + 0.5
        ));
    }
    std::fs::write(&csv, rows).map_err(|e| ghcidr::Error::Consistency(e.to_string()))?;

    let cli = Cli::parse_from([
        "ghcidr",
        "reduce",
        "--format",
        "csv",
        "--has-header",
        "--input",
        csv.to_str().unwrap(),
        "--algorithm",
        "ghcidr",
        "--alpha",
        "0.5",
        "--output-format",
        "json-report",
    ]);
    let config = RunConfig::from_cli(cli)?;
    let mut report = Vec::new();
    ghcidr::cli::run(&config, &mut report)?;
    let value: serde_json::Value = serde_json::from_slice(&report)?;
    println!(
        "{} kept {} of {} rows ({}% reduction)",
        value["algorithm"], value["reduced_n"], value["n"], value["reduction_rate"]
    );
    Ok(())
}
