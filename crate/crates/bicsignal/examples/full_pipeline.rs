//! The whole workflow through the library API: sample a dataset, write it
//! to disk, run the analysis, and read back the outputs.
//!
//! This mirrors what the command line does with `generate` followed by
//! `run --baselines`, including the manifest with derived seeds and
//! content hashes of every output file.

use std::fs;
use std::io::Write;

use bicsignal::{generate_dataset, run, RunConfig};

fn main() {
    let base = std::env::temp_dir().join("bicsignal_example_pipeline");
    let _ = fs::remove_dir_all(&base);
    fs::create_dir_all(&base).unwrap();

    // A generator spec as it would live on disk.
    let spec_path = base.join("spec.json");
    fs::write(
        &spec_path,
        r#"{
  "n": 20000,
  "prevalences": [0.25, 0.25, 0.15, 0.15, 0.1, 0.05],
  "beta0": -2.5,
  "effects": [[0, 1.5], [2, 1.0]],
  "blocks": [{"first": 0, "second": 1, "rho": 0.8}]
}"#,
    )
    .unwrap();
    let data_dir = base.join("data");
    let (reports, _truth) = generate_dataset(&spec_path, 2024, &data_dir).unwrap();
    println!("dataset: {}", reports.display());

    // Ground truth for scoring: D0 and D2 are causal, D1 is the
    // correlated bystander.
    let reference = base.join("reference.csv");
    let mut f = fs::File::create(&reference).unwrap();
    writeln!(f, "event_id,drug_id,label").unwrap();
    writeln!(f, "EV1,D0,positive").unwrap();
    writeln!(f, "EV1,D1,negative").unwrap();
    writeln!(f, "EV1,D2,positive").unwrap();
    drop(f);

    let mut cfg = RunConfig::new(&reports, 77, base.join("out"));
    cfg.reference = Some(reference);
    cfg.baselines = true;
    let summary = run(&cfg).unwrap();
    println!(
        "analyzed {} event(s), found {} signal(s)\n",
        summary.n_events, summary.n_signals
    );

    for name in ["signals.csv", "metrics.csv"] {
        println!("--- {name}");
        print!("{}", fs::read_to_string(summary.out_dir.join(name)).unwrap());
        println!();
    }

    let manifest = fs::read_to_string(summary.out_dir.join("manifest.json")).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&manifest).unwrap();
    let ev = &parsed["events"][0];
    println!(
        "manifest: event {} searched {} eligible drugs, exhaustive={}, best bic {}",
        ev["event_id"], ev["p_eligible"], ev["exhaustive"], ev["best_bic"]
    );
    println!(
        "signals.csv sha256 {}",
        parsed["outputs"]["signals.csv"]["sha256"]
    );
}
