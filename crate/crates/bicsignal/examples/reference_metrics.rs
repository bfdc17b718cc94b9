//! Score competing signal lists against a labeled reference set.
//!
//! A reference set maps (event, drug) pairs to positive or negative
//! ground truth. For each method we report the number of signals and the
//! fractions of them that are labeled positive, labeled negative, or not
//! in the reference at all. A good detector pushes the positive rate up
//! without inflating the signal count.

use bicsignal::{score_signals, Label, ReferenceSet};

fn main() {
    let mut reference = ReferenceSet::new();
    for (event, drug, label) in [
        ("GI_BLEED", "WARFARIN", Label::Positive),
        ("GI_BLEED", "ASPIRIN", Label::Positive),
        ("GI_BLEED", "VITAMIN_C", Label::Negative),
        ("RASH", "AMOXICILLIN", Label::Positive),
        ("RASH", "WARFARIN", Label::Negative),
    ] {
        reference.insert(event, drug, label).unwrap();
    }

    // A sharp method: few signals, all of them real.
    let sharp = [("GI_BLEED", "WARFARIN"), ("RASH", "AMOXICILLIN")];
    // A trigger-happy method: catches the positives but drags in a known
    // negative and a pair nobody has labeled.
    let noisy = [
        ("GI_BLEED", "WARFARIN"),
        ("GI_BLEED", "ASPIRIN"),
        ("GI_BLEED", "VITAMIN_C"),
        ("RASH", "AMOXICILLIN"),
        ("RASH", "NEW_DRUG"),
    ];
    // A method that found nothing: rates are zero by convention and the
    // row carries an explicit empty marker.
    let silent: [(&str, &str); 0] = [];

    println!("method   ns  rpc    rnc    rus    empty");
    for row in [
        score_signals("sharp", sharp, &reference),
        score_signals("noisy", noisy, &reference),
        score_signals("silent", silent, &reference),
    ] {
        println!(
            "{:<7} {:>3}  {:.3}  {:.3}  {:.3}  {}",
            row.method, row.ns, row.rpc, row.rnc, row.rus, row.empty
        );
    }
}
