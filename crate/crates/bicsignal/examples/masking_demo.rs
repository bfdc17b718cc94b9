//! Why joint modeling beats one-drug-at-a-time disproportionality.
//!
//! Drug A causes the event; drug B is co-prescribed with A (correlated
//! exposure) but harmless. Marginal 2x2 statistics see B riding along
//! with A's cases and flag both. The BIC model search scores A and B
//! jointly, so B adds parameters without adding fit and is dropped.

use bicsignal::{
    all_baselines, eligibility_mask, project, search, ChainConfig, CorrelationBlock,
    SyntheticSpec,
};

fn main() {
    let spec = SyntheticSpec {
        n: 30_000,
        prevalences: vec![0.25, 0.25, 0.15, 0.15, 0.1],
        beta0: -2.5,
        effects: vec![(0, 1.5)], // only drug A is causal
        blocks: vec![CorrelationBlock {
            first: 0,
            second: 1,
            rho: 0.8,
        }],
        event_id: "EV1".to_string(),
    };
    let (x, y) = bicsignal::generate(&spec, 7_171).unwrap();

    println!("marginal 2x2 statistics per drug:");
    println!("drug  method  statistic  pvalue      signaled");
    for j in 0..2 {
        for r in all_baselines(&project(&x, &y, j)) {
            println!(
                "{:<5} {:<7} {:>8.3}  {:>10.3e}  {}",
                x.drug_id(j),
                r.method.as_str(),
                r.statistic,
                r.pvalue,
                r.signaled
            );
        }
    }

    let mask = eligibility_mask(&x, &y);
    let report = search(&x, &y, &mask, &ChainConfig::new(5)).unwrap();
    let picked: Vec<&str> = report
        .best_model
        .iter_ones()
        .map(|j| x.drug_id(report.eligible[j]))
        .collect();

    println!("\nBIC search selected: {picked:?}");
    println!("D0 carries the causal effect; D1 only tags along through the");
    println!("0.8 exposure correlation, and the joint model rejects it.");
    assert!(picked.contains(&"D0"));
    assert!(!picked.contains(&"D1"));
}
