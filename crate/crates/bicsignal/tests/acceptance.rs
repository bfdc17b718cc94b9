//! Gate suite: the properties this crate promises, each checked at a fixed
//! tolerance with an explicit PASS/FAIL line. The checks compare library
//! output against independent oracles implemented here in the test: a plain
//! per-report likelihood sum, finite differences, full model enumeration,
//! and exact big-integer hypergeometric enumeration.

use std::time::Instant;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use bicsignal::{
    compress_profiles, eligibility_mask, exhaustive_search, fisher_mid_p, fit_mle, generate,
    loglik_weighted, mix_seed, project, prr_result, render_report_file, run, run_chain,
    search, search_with_context, signal_coefficients, ChainConfig, ContingencyTable,
    CorrelationBlock, EventVector, ModelVector, ReportMatrix, RunConfig, SearchContext,
    SyntheticSpec,
};

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Independent oracle: the likelihood as a plain sum over individual
/// reports, with compensated accumulation so the oracle itself is not the
/// noise floor.
fn plain_loglik(
    x: &ReportMatrix,
    y: &EventVector,
    gamma: &ModelVector,
    beta0: f64,
    beta: &[f64],
) -> f64 {
    let included: Vec<u32> = gamma.iter_ones().map(|j| j as u32).collect();
    assert_eq!(included.len(), beta.len());
    let softplus = |v: f64| v.max(0.0) + (-v.abs()).exp().ln_1p();
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for i in 0..x.n() {
        let mut eta = beta0;
        for (t, j) in included.iter().enumerate() {
            if x.rows()[i].binary_search(j).is_ok() {
                eta += beta[t];
            }
        }
        let term = f64::from(y.y()[i]) * eta - softplus(eta);
        let adj = term - comp;
        let next = sum + adj;
        comp = (next - sum) - adj;
        sum = next;
    }
    sum
}

#[test]
fn weighted_likelihood_matches_plain_sum() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(200..=1000);
        let p = rng.random_range(2..=20);
        let prevalences: Vec<f64> = (0..p).map(|_| rng.random_range(0.02..0.4)).collect();
        let beta0 = rng.random_range(-3.0..0.0);
        let spec = SyntheticSpec::independent(n, prevalences, beta0, vec![]);
        let (x, y) = generate(&spec, rng.random()).unwrap();

        let mut gamma = ModelVector::zeros(p);
        for j in 0..p {
            if rng.random_bool(0.4) {
                gamma.set(j, true);
            }
        }
        let beta: Vec<f64> = (0..gamma.count_ones())
            .map(|_| rng.random_range(-1.5..1.5))
            .collect();
        let b0 = rng.random_range(-3.0..1.0);

        let pt = compress_profiles(&x, &y, &gamma);
        let fast = loglik_weighted(&pt, b0, &beta);
        let plain = plain_loglik(&x, &y, &gamma, b0, &beta);
        worst = worst.max((fast - plain).abs());
    }
    let elapsed = started.elapsed().as_secs_f64();
    let ok = worst <= 1e-10 && elapsed < 10.0;
    eprintln!(
        "{} weighted-likelihood identity: max |difference| {worst:.3e} over 200 instances \
         (tolerance 1e-10), {elapsed:.2}s (budget 10s)",
        verdict(ok)
    );
    assert!(ok, "worst diff {worst:.3e}, elapsed {elapsed:.2}s");
}

#[test]
fn mle_intercept_and_gradient_checks() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0B);

    // Closed form: the intercept-only MLE is the logit of the mean.
    let mut worst_intercept = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(50..=2000);
        let pos = rng.random_range(1..n);
        let mut ybits = vec![0u8; n];
        for slot in ybits.iter_mut().take(pos) {
            *slot = 1;
        }
        let x = ReportMatrix::new(vec![vec![]; n], vec![]).unwrap();
        let y = EventVector::new("E", ybits).unwrap();
        let fit = fit_mle(&compress_profiles(&x, &y, &ModelVector::zeros(0)));
        assert!(fit.converged);
        let ybar = pos as f64 / n as f64;
        worst_intercept = worst_intercept.max((fit.beta0 - (ybar / (1.0 - ybar)).ln()).abs());
    }

    let mut worst_grad = 0.0f64;
    let mut worst_fd = 0.0f64;
    for _ in 0..50 {
        let p = rng.random_range(2..=8);
        let n = rng.random_range(800..=3000);
        let prevalences: Vec<f64> = (0..p).map(|_| rng.random_range(0.05..0.35)).collect();
        let effects = vec![(0, rng.random_range(0.5..1.5))];
        let spec = SyntheticSpec::independent(n, prevalences, -2.0, effects);
        let (x, y) = generate(&spec, rng.random()).unwrap();
        let mask = eligibility_mask(&x, &y);
        let gamma = ModelVector::from_indices(x.p(), &mask.eligible_indices());
        let pt = compress_profiles(&x, &y, &gamma);

        let fit = fit_mle(&pt);
        assert!(fit.converged, "fit did not converge on a benign instance");
        let grad_at_opt = bicsignal::logistic::gradient(&pt, fit.beta0, &fit.beta);
        worst_grad = worst_grad.max(grad_at_opt.iter().fold(0.0f64, |m, g| m.max(g.abs())));

        // Finite differences at a displaced point where the gradient is
        // comfortably nonzero, so a relative comparison is meaningful.
        let theta0 = 0.6 * fit.beta0 - 0.4;
        let theta: Vec<f64> = fit.beta.iter().map(|b| 0.6 * b + 0.15).collect();
        let analytic = bicsignal::logistic::gradient(&pt, theta0, &theta);
        let h = 1e-4;
        for coord in 0..=theta.len() {
            let eval = |delta: f64| {
                let mut b0 = theta0;
                let mut bb = theta.clone();
                if coord == 0 {
                    b0 += delta;
                } else {
                    bb[coord - 1] += delta;
                }
                loglik_weighted(&pt, b0, &bb)
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let rel = (fd - analytic[coord]).abs() / analytic[coord].abs().max(1.0);
            worst_fd = worst_fd.max(rel);
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let ok = worst_intercept <= 1e-8 && worst_grad <= 1e-8 && worst_fd <= 1e-5 && elapsed < 30.0;
    eprintln!(
        "{} MLE correctness: intercept vs logit(mean) {worst_intercept:.3e} (tol 1e-8), \
         gradient max-norm at optimum {worst_grad:.3e} (tol 1e-8), finite-difference \
         relative error {worst_fd:.3e} (tol 1e-5), {elapsed:.2}s (budget 30s)",
        verdict(ok)
    );
    assert!(
        ok,
        "intercept {worst_intercept:.3e}, grad {worst_grad:.3e}, fd {worst_fd:.3e}, \
         elapsed {elapsed:.2}s"
    );
}

/// Ten drugs, three of them planted with strong positive effects. Used by
/// the sampler-vs-enumeration and recovery checks.
fn planted_spec(n: usize) -> SyntheticSpec {
    SyntheticSpec::independent(
        n,
        vec![0.20, 0.15, 0.12, 0.10, 0.09, 0.08, 0.07, 0.06, 0.05, 0.05],
        -2.5,
        vec![(1, 1.4), (4, 1.2), (7, 1.0)],
    )
}

#[test]
fn sampler_finds_enumerated_optimum() {
    let started = Instant::now();
    let mut chain_hits = 0usize;
    let mut global_hits = 0usize;
    for i in 0..100u64 {
        let (x, y) = generate(&planted_spec(5000), 9_000 + i).unwrap();
        let mask = eligibility_mask(&x, &y);
        assert_eq!(mask.p_eligible(), 10, "instance {i} lost an eligible drug");

        let ctx = SearchContext::new(&x, &y, &mask);
        let (star_model, _) = exhaustive_search(&ctx).unwrap();

        // Default sampler settings, but force the stochastic path even
        // though ten drugs would normally be enumerated.
        let mut cfg = ChainConfig::new(40_000 + i);
        cfg.exhaustive_cutoff = 0;
        let report = search_with_context(&ctx, &cfg).unwrap();
        assert!(!report.exhaustive);

        // A single chain (the first restart, replayed from its seed).
        let chain0 = run_chain(&ctx, &cfg, 0, mix_seed(cfg.seed, 1));
        if chain0.best_model == star_model {
            chain_hits += 1;
        }
        if report.best_model == star_model {
            global_hits += 1;
        }
        if (i + 1) % 20 == 0 {
            eprintln!(
                "  sampler check {}/100: chain hits {chain_hits}, global hits {global_hits} \
                 ({:.0}s)",
                i + 1,
                started.elapsed().as_secs_f64()
            );
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let ok = chain_hits >= 95 && global_hits >= 99 && elapsed < 900.0;
    eprintln!(
        "{} sampler vs enumeration: single-chain hits {chain_hits}/100 (need >= 95), \
         best-over-restarts hits {global_hits}/100 (need >= 99), {elapsed:.0}s (budget 900s)",
        verdict(ok)
    );
    assert!(
        ok,
        "chain hits {chain_hits}, global hits {global_hits}, elapsed {elapsed:.0}s"
    );
}

#[test]
fn planted_support_recovered_at_large_n() {
    let started = Instant::now();
    let truth = [1usize, 4, 7];
    let mut exact = 0usize;
    let mut positive_sets_match = 0usize;
    for i in 0..100u64 {
        let (x, y) = generate(&planted_spec(20_000), 70_000 + i).unwrap();
        let mask = eligibility_mask(&x, &y);
        let report = search(&x, &y, &mask, &ChainConfig::new(50_000 + i)).unwrap();

        let selected: Vec<usize> = report
            .best_model
            .iter_ones()
            .map(|pos| report.eligible[pos])
            .collect();
        if selected == truth {
            exact += 1;
        }
        let positives: Vec<usize> = signal_coefficients(&report.best_fit, &report.best_model)
            .iter()
            .map(|&(pos, _)| report.eligible[pos])
            .collect();
        if positives == truth {
            positive_sets_match += 1;
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let ok = exact >= 90 && positive_sets_match >= 90;
    eprintln!(
        "{} planted-support recovery at n=20000: exact support {exact}/100 (need >= 90), \
         positive-coefficient set matches planted positives {positive_sets_match}/100, \
         {elapsed:.0}s",
        verdict(ok)
    );
    assert!(ok, "exact {exact}, positive sets {positive_sets_match}");
}

#[test]
fn joint_model_resists_coprescription_masking() {
    let started = Instant::now();
    let spec = SyntheticSpec {
        n: 10_000,
        prevalences: vec![0.25, 0.25, 0.15, 0.15, 0.10],
        beta0: -2.5,
        effects: vec![(0, 1.5)],
        blocks: vec![CorrelationBlock {
            first: 0,
            second: 1,
            rho: 0.8,
        }],
        event_id: "EV1".to_string(),
    };
    let mut bic_clean = 0usize; // signals A, stays quiet on B
    let mut prr_flags_b = 0usize;
    for i in 0..100u64 {
        let (x, y) = generate(&spec, 300_000 + i).unwrap();
        let mask = eligibility_mask(&x, &y);
        let report = search(&x, &y, &mask, &ChainConfig::new(310_000 + i)).unwrap();
        let signaled: Vec<usize> = signal_coefficients(&report.best_fit, &report.best_model)
            .iter()
            .map(|&(pos, _)| report.eligible[pos])
            .collect();
        if signaled.contains(&0) && !signaled.contains(&1) {
            bic_clean += 1;
        }
        if prr_result(&project(&x, &y, 1)).signaled {
            prr_flags_b += 1;
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let ok = bic_clean >= 90 && prr_flags_b > 50;
    eprintln!(
        "{} co-prescription masking: joint model flags only the causal drug in \
         {bic_clean}/100 seeds (need >= 90); marginal PRR flags the correlated bystander \
         in {prr_flags_b}/100 (need majority), {elapsed:.0}s",
        verdict(ok)
    );
    assert!(ok, "bic clean {bic_clean}, prr on bystander {prr_flags_b}");
}

/// Exact mid-p by full hypergeometric enumeration in arbitrary-precision
/// integers. The binomial arrays are built by the integer-exact recurrence
/// C(m, k+1)*(k+1) = C(m, k)*(m-k), and the final rational is converted
/// through a 2^70 fixed-point scaling.
fn midp_oracle(t: &ContingencyTable) -> f64 {
    fn binom(m: u64, k: u64) -> BigInt {
        let mut r = BigInt::one();
        for i in 0..k {
            r = r * BigInt::from(m - i) / BigInt::from(i + 1);
        }
        r
    }
    let (a, b, c, d) = (t.a, t.b, t.c, t.d);
    let r1 = a + b;
    let m2 = c + d;
    let c1 = a + c;
    let lo = c1.saturating_sub(m2);
    let hi = r1.min(c1);

    let mut weights: Vec<BigInt> = Vec::with_capacity((hi - lo + 1) as usize);
    let mut w_left = binom(r1, lo);
    let mut w_right = binom(m2, c1 - lo);
    for k in lo..=hi {
        weights.push(&w_left * &w_right);
        if k < hi {
            w_left = w_left * BigInt::from(r1 - k) / BigInt::from(k + 1);
            let j = c1 - k;
            w_right = w_right * BigInt::from(j) / BigInt::from(m2 - j + 1);
        }
    }
    let total: BigInt = weights.iter().sum();
    let at_a = weights[(a - lo) as usize].clone();
    let upper: BigInt = weights[(a - lo + 1) as usize..].iter().sum();

    let num: BigInt = ((upper << 1u32) + at_a) << 70u32;
    let den: BigInt = total << 1u32;
    (num / den).to_f64().unwrap() / 2f64.powi(70)
}

#[test]
fn mid_p_matches_exact_enumeration() {
    let started = Instant::now();
    assert_eq!(
        fisher_mid_p(&ContingencyTable { a: 1, b: 1, c: 1, d: 1 }),
        0.5,
        "balanced table must give exactly one half"
    );

    let mut rng = ChaCha8Rng::seed_from_u64(0xF15E);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        // Cycle through size regimes; every margin stays at or below 1e4.
        let cap: u64 = match i % 3 {
            0 => 30,
            1 => 400,
            _ => 2400,
        };
        let a = rng.random_range(0..=cap);
        let b = rng.random_range(0..=cap);
        let c = rng.random_range(0..=cap);
        let d = rng.random_range(0..=cap * 2).min(10_000 - a - b - c);
        let t = ContingencyTable { a, b, c, d };
        let diff = (fisher_mid_p(&t) - midp_oracle(&t)).abs();
        worst = worst.max(diff);
    }
    let elapsed = started.elapsed().as_secs_f64();
    let ok = worst <= 1e-12;
    eprintln!(
        "{} Fisher mid-p exactness: max |difference| {worst:.3e} vs big-integer enumeration \
         over 1000 tables (tolerance 1e-12), plus the balanced table at exactly 0.5, \
         {elapsed:.1}s",
        verdict(ok)
    );
    assert!(ok, "worst diff {worst:.3e}");
}

#[test]
fn compressed_likelihood_at_least_ten_times_faster() {
    let spec = SyntheticSpec::independent(
        100_000,
        vec![0.30, 0.25, 0.20, 0.15, 0.10],
        -2.2,
        vec![(0, 1.0)],
    );
    let (x, y) = generate(&spec, 808).unwrap();
    let gamma = ModelVector::from_indices(5, &[0, 1, 2, 3, 4]);
    let pt = compress_profiles(&x, &y, &gamma);
    assert!(pt.m() <= 64, "expected at most 64 distinct profiles");

    let beta0 = -2.0;
    let beta = [0.9, -0.3, 0.4, 0.2, -0.1];

    // Sanity: both evaluations agree before we time them.
    let fast_val = loglik_weighted(&pt, beta0, &beta);
    let plain_val = plain_loglik(&x, &y, &gamma, beta0, &beta);
    assert!((fast_val - plain_val).abs() <= 1e-9 * plain_val.abs());

    let time_per_eval = |reps: u32, f: &dyn Fn() -> f64| {
        std::hint::black_box(f()); // warm up
        let t = Instant::now();
        for _ in 0..reps {
            std::hint::black_box(f());
        }
        t.elapsed().as_secs_f64() / f64::from(reps)
    };
    let fast = time_per_eval(4000, &|| loglik_weighted(&pt, beta0, &beta));
    let plain = time_per_eval(30, &|| plain_loglik(&x, &y, &gamma, beta0, &beta));

    let ratio = plain / fast;
    let ok = ratio >= 10.0;
    eprintln!(
        "{} compression speedup: plain row sum {:.3e}s/eval over {} reports vs weighted \
         {:.3e}s/eval over {} profiles, ratio {ratio:.0}x (need >= 10x)",
        verdict(ok),
        plain,
        x.n(),
        fast,
        pt.m()
    );
    assert!(ok, "speedup only {ratio:.1}x");
}

#[test]
fn same_seed_same_bytes() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();

    // Fourteen drugs keep the run on the sampler path (cutoff 12), so the
    // byte-for-byte check covers the threaded chain scheduling too.
    let spec = SyntheticSpec::independent(
        2000,
        vec![
            0.22, 0.20, 0.18, 0.15, 0.12, 0.10, 0.09, 0.08, 0.07, 0.06, 0.05, 0.05, 0.04, 0.03,
        ],
        -2.3,
        vec![(0, 1.3), (5, 1.1), (11, 1.0)],
    );
    let (x, y) = generate(&spec, 616).unwrap();
    let reports = dir.path().join("reports.csv");
    std::fs::write(&reports, render_report_file(&x, std::slice::from_ref(&y))).unwrap();
    let reference = dir.path().join("reference.csv");
    std::fs::write(
        &reference,
        "event_id,drug_id,label\nEV1,D00,positive\nEV1,D05,positive\nEV1,D01,negative\n",
    )
    .unwrap();

    let make_cfg = |out: std::path::PathBuf| {
        let mut cfg = RunConfig::new(&reports, 2026, out);
        cfg.reference = Some(reference.clone());
        cfg.baselines = true;
        cfg.trace = true;
        cfg.iters = 400;
        cfg.restarts = 8;
        cfg.threads = Some(4);
        cfg
    };
    let first = run(&make_cfg(dir.path().join("out_a"))).unwrap();
    let second = run(&make_cfg(dir.path().join("out_b"))).unwrap();

    let names = |s: &bicsignal::RunSummary| {
        let mut v: Vec<String> = s
            .written
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        v.sort();
        v
    };
    assert_eq!(names(&first), names(&second));

    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out_a/manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["events"][0]["exhaustive"], false);

    let mut compared = 0;
    for name in names(&first) {
        let a = std::fs::read(dir.path().join("out_a").join(&name)).unwrap();
        let b = std::fs::read(dir.path().join("out_b").join(&name)).unwrap();
        if name == "manifest.json" {
            // The manifest records wall-clock timings; normalize those and
            // the differing output paths, then require equality.
            let mut va: serde_json::Value = serde_json::from_slice(&a).unwrap();
            let mut vb: serde_json::Value = serde_json::from_slice(&b).unwrap();
            for v in [&mut va, &mut vb] {
                v["config"]["out"] = serde_json::Value::Null;
                for ev in v["events"].as_array_mut().unwrap() {
                    ev["seconds"] = serde_json::Value::Null;
                }
            }
            assert_eq!(va, vb, "manifests differ beyond timings");
        } else {
            assert_eq!(a, b, "{name} differs between identical runs");
            compared += 1;
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let ok = compared >= 5; // signals, census, metrics, baselines, trace
    eprintln!(
        "{} determinism: {compared} output files byte-identical across two runs with the \
         same seed and config (plus timing-normalized manifest), {elapsed:.1}s",
        verdict(ok)
    );
    assert!(ok, "only {compared} files compared");
}
