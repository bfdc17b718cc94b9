//! The classical 2x2 screening statistics on hand-picked tables.
//!
//! Each drug-event pair reduces to a contingency table: a = reports with
//! both, b = drug only, c = event only, d = neither. PRR and ROR compare
//! event rates in exposed vs unexposed reports with a one-sided normal
//! test on the log scale; the reporting Fisher exact test uses the
//! hypergeometric mid-p directly. Signal rules also demand a minimum
//! case count so single-report coincidences stay quiet.

use bicsignal::{all_baselines, fisher_mid_p, ContingencyTable};

fn show(name: &str, t: &ContingencyTable) {
    println!("{name}: a={} b={} c={} d={}", t.a, t.b, t.c, t.d);
    for r in all_baselines(t) {
        println!(
            "  {:<5} statistic {:>10.4}  pvalue {:>10.3e}  signaled {}",
            r.method.as_str(),
            r.statistic,
            r.pvalue,
            r.signaled
        );
    }
    println!();
}

fn main() {
    // Strong association with plenty of support: everything fires.
    show(
        "clear signal",
        &ContingencyTable {
            a: 40,
            b: 200,
            c: 100,
            d: 9000,
        },
    );

    // Same relative disproportion but only two cases: PRR and ROR sit
    // below their three-case floor, and the mid-p is nowhere near 0.05.
    show(
        "two cases only",
        &ContingencyTable {
            a: 2,
            b: 10,
            c: 100,
            d: 9000,
        },
    );

    // A zero cell sends the odds ratio to infinity; infinite statistics
    // are never reported as signals, whatever the p-value says.
    show(
        "degenerate table",
        &ContingencyTable {
            a: 5,
            b: 0,
            c: 40,
            d: 900,
        },
    );

    // The mid-p correction halves the probability mass at the observed
    // table, so a perfectly balanced table scores exactly one half.
    let balanced = ContingencyTable { a: 1, b: 1, c: 1, d: 1 };
    println!(
        "balanced 2x2 mid-p = {} (exactly 0.5 by symmetry)",
        fisher_mid_p(&balanced)
    );
}
