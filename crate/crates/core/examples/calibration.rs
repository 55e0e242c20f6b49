//! Fits the platform model to the measured speedups and prints residuals.
//!
//! `cargo run --release --example calibration [initial.json] [targets.json]`

use topomap::sim::{calibrate, CalibrationOptions, PlatformModel, TargetSet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let initial = match args.first() {
        Some(path) => PlatformModel::from_json(&std::fs::read_to_string(path)?)?,
        None => PlatformModel::from_json(include_str!("../data/platform_initial.json"))?,
    };
    let targets = match args.get(1) {
        Some(path) => TargetSet::from_json(&std::fs::read_to_string(path)?)?,
        None => TargetSet::from_json(include_str!("../data/measured_targets.json"))?,
    };
    let report = calibrate(&initial, &targets, &CalibrationOptions::default())?;
    for r in &report.residuals {
        let t = &r.target;
        println!(
            "{}->{} k={} {:>9} B: target {:.3}, simulated {:.3} ({:+.1}%)",
            t.publisher,
            t.path,
            t.hw_subscribers,
            t.size_bytes,
            t.speedup,
            r.simulated,
            100.0 * (r.simulated - t.speedup) / t.speedup
        );
    }
    println!(
        "evaluations {}, max relative error {:.4}, attained {}",
        report.evaluations, report.max_rel_error, report.attained
    );
    println!("{}", report.platform.to_json());
    Ok(())
}
