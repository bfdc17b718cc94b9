//! Dataset triage before any modeling: per-event headcounts and
//! eligible-drug counts across a synthetic database.
//!
//! The census is the cheap first look at a new database. Events with a
//! tiny headcount or an empty candidate set will never support a
//! multi-drug model, and the eligible count also decides whether the
//! search can enumerate or must sample.

use bicsignal::{eligibility_census, generate, EventVector, SyntheticSpec};

fn main() {
    // One matrix of exposures, three outcomes of decreasing frequency
    // simulated against it.
    let spec = SyntheticSpec::independent(
        15_000,
        vec![0.2, 0.12, 0.07, 0.04, 0.02, 0.008],
        -2.8,
        vec![(0, 1.2), (4, 1.5)],
    );
    let (x, y_common) = generate(&spec, 31).unwrap();

    let rare = SyntheticSpec {
        beta0: -5.2,
        event_id: "EV_RARE".to_string(),
        ..spec.clone()
    };
    let (_, y_rare) = generate(&rare, 31).unwrap();

    let very_rare = SyntheticSpec {
        beta0: -8.5,
        event_id: "EV_VERY_RARE".to_string(),
        ..spec.clone()
    };
    let (_, y_very_rare) = generate(&very_rare, 31).unwrap();

    let events: Vec<EventVector> = vec![y_common, y_rare, y_very_rare];

    println!("event         headcount  eligible drugs  search mode");
    for row in eligibility_census(&x, &events) {
        let mode = if row.p_eligible == 0 {
            "nothing to search"
        } else if row.p_eligible <= 12 {
            "exhaustive"
        } else {
            "sampler"
        };
        println!(
            "{:<13} {:>9}  {:>14}  {}",
            row.event_id, row.headcount, row.p_eligible, mode
        );
    }

    println!();
    println!("rarer outcomes lose eligible drugs: a drug with no case among");
    println!("its exposed reports has an empty 2x2 cell and cannot be fit.");
}
