//! Load a small report database and inspect which drugs are eligible for
//! model search on each event.
//!
//! A drug enters the candidate set for an event only when all four
//! (drug, outcome) cell combinations are observed. Degenerate columns
//! would make the per-drug coefficient unidentifiable, so they are
//! screened out up front.

use std::io::Write;

use bicsignal::{eligibility_census, eligibility_mask, load_reports, ReportSource};

fn main() {
    let dir = std::env::temp_dir().join("bicsignal_example_ingest");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("reports.csv");

    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "#drugs: ASPIRIN,WARFARIN,IBUPROFEN,RARE_X").unwrap();
    writeln!(f, "#events: GI_BLEED,RASH").unwrap();
    let reports = [
        ("ASPIRIN", "GI_BLEED"),
        ("ASPIRIN;WARFARIN", "GI_BLEED"),
        ("WARFARIN", ""),
        ("IBUPROFEN", "RASH"),
        ("IBUPROFEN;ASPIRIN", "GI_BLEED;RASH"),
        ("WARFARIN", "GI_BLEED"),
        ("IBUPROFEN", ""),
        ("ASPIRIN", ""),
        ("RARE_X", "GI_BLEED"),
        ("WARFARIN;IBUPROFEN", "RASH"),
    ];
    for (i, (drugs, events)) in reports.iter().enumerate() {
        writeln!(f, "R{i:02},{drugs},{events}").unwrap();
    }
    drop(f);

    let (x, events) = load_reports(ReportSource::Single(&path)).unwrap();
    println!(
        "loaded {} reports over {} drugs and {} events\n",
        x.n(),
        x.p(),
        events.len()
    );

    for row in eligibility_census(&x, &events) {
        println!(
            "event {:<9} headcount {:>2}  eligible drugs {}",
            row.event_id, row.headcount, row.p_eligible
        );
    }

    println!();
    for y in &events {
        let mask = eligibility_mask(&x, y);
        for j in 0..x.p() {
            let verdict = if mask.is_eligible(j) {
                "eligible"
            } else {
                "screened out (a degenerate 2x2 cell)"
            };
            println!("{:<9} x {:<9} {}", y.event_id(), x.drug_id(j), verdict);
        }
        println!();
    }

    // RARE_X appears only once and always with the event, so the
    // (exposed, no event) cell is empty and it cannot be fit.
    let gi = &events[0];
    let mask = eligibility_mask(&x, gi);
    assert!(!mask.is_eligible(3));
}
