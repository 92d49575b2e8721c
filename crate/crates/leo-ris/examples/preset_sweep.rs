//! Runs a named preset from a config file (or the desk defaults) and writes
//! the CSV and manifest to a directory.
//!
//! cargo run --example preset_sweep -- ris_elements_sweep out/ [config.toml]

use std::path::PathBuf;

use leo_ris::harness::{emit_csv, load_scenario, run_experiment, write_manifest, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let preset = args.next().unwrap_or_else(|| "convergence".into());
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out".into()));
    let cfg = match args.next() {
        Some(path) => load_scenario(path.as_ref(), ScenarioConfig::desk())?,
        None => ScenarioConfig::desk(),
    };
    let report = run_experiment(&preset, &cfg, 0)?;
    for p in &report.points {
        println!("{:<40} {:?} {:.1} s", p.key, p.status, p.wall_seconds);
    }
    println!("{}", emit_csv(&report, &out)?.display());
    println!("{}", write_manifest(&report, &out)?.display());
    Ok(())
}
