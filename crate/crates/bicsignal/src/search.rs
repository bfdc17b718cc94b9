//! Model-space search: multi-restart Metropolis-Hastings over the binary
//! inclusion vectors, with exhaustive enumeration when the eligible set is
//! small enough to fit every model.
//!
//! Scores are cached per model in a concurrent map shared by all chains;
//! a random walk revisits states constantly, so almost every iteration after
//! the first few hundred is a cache hit.

use std::sync::Arc;

use dashmap::DashMap;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{compress_profiles, EligibilityMask, EventVector, ReportMatrix};
use crate::error::{Error, Result};
use crate::logistic::{fit_mle, FitResult};
use crate::model::ModelVector;

/// Enumerating 2^p models beyond this is refused outright.
pub const EXHAUSTIVE_HARD_CAP: usize = 25;

/// Search settings. `alpha` is the proposal's Hamming radius, `iters` the
/// per-chain iteration count, `restarts` the number of independent chains.
/// At or below `exhaustive_cutoff` eligible drugs the chains are replaced by
/// full enumeration; zero disables that entirely.
#[derive(Debug, Clone, Serialize)]
pub struct ChainConfig {
    pub alpha: usize,
    pub iters: usize,
    pub restarts: usize,
    pub seed: u64,
    pub exhaustive_cutoff: usize,
    pub collect_trace: bool,
}

impl ChainConfig {
    pub fn new(seed: u64) -> Self {
        ChainConfig {
            alpha: 5,
            iters: 5000,
            restarts: 100,
            seed,
            exhaustive_cutoff: 12,
            collect_trace: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha < 1 {
            return Err(Error::Config("alpha must be at least 1".into()));
        }
        if self.iters < 1 {
            return Err(Error::Config("iters must be at least 1".into()));
        }
        if self.restarts < 1 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if self.exhaustive_cutoff > EXHAUSTIVE_HARD_CAP {
            return Err(Error::Config(format!(
                "exhaustive cutoff {} exceeds the hard cap {EXHAUSTIVE_HARD_CAP}",
                self.exhaustive_cutoff
            )));
        }
        Ok(())
    }
}

/// One trace record per chain iteration (plus the initial state at iter 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub chain: usize,
    pub iter: usize,
    pub bic_current: f64,
    pub bic_best: f64,
    pub accepted: bool,
}

/// Outcome of a full search over one event's eligible drugs.
#[derive(Debug, Clone)]
pub struct SearchReport {
    /// Winning model, indexed over the eligible-drug space.
    pub best_model: ModelVector,
    pub best_fit: FitResult,
    /// Original drug indices for each eligible-space position.
    pub eligible: Vec<usize>,
    /// (chain id, best BIC found by that chain); empty on the exhaustive path.
    pub per_chain_best: Vec<(usize, f64)>,
    /// Chains whose own best equals the global best model.
    pub hit_count: usize,
    /// True when full enumeration replaced the random walk.
    pub exhaustive: bool,
    /// True when no drug was eligible and the intercept-only model was
    /// returned without any search.
    pub empty_model_space: bool,
    pub trace: Option<Vec<TraceRow>>,
}

/// splitmix64 finalizer; decorrelates seeds derived from a common base.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic per-stream seed derivation.
pub fn mix_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream))
}

/// Immutable per-event working set: the matrix restricted to eligible
/// columns, the outcome, and the shared model-score cache.
pub struct SearchContext {
    x: ReportMatrix,
    y: EventVector,
    eligible: Vec<usize>,
    cache: DashMap<ModelVector, Arc<FitResult>>,
}

impl SearchContext {
    pub fn new(x: &ReportMatrix, y: &EventVector, mask: &EligibilityMask) -> Self {
        assert_eq!(x.n(), y.len(), "matrix/outcome length mismatch");
        assert_eq!(x.p(), mask.eligible().len(), "matrix/mask width mismatch");
        let eligible = mask.eligible_indices();
        SearchContext {
            x: x.restrict_columns(&eligible),
            y: y.clone(),
            eligible,
            cache: DashMap::new(),
        }
    }

    pub fn p_eligible(&self) -> usize {
        self.eligible.len()
    }

    /// Original drug indices backing the eligible-space positions.
    pub fn eligible_indices(&self) -> &[usize] {
        &self.eligible
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    /// Compresses, fits, and scores a model, memoized. Concurrent callers
    /// may race on a miss; both compute the same fit and the insert is
    /// idempotent.
    pub fn score(&self, gamma: &ModelVector) -> Arc<FitResult> {
        if let Some(hit) = self.cache.get(gamma) {
            return hit.clone();
        }
        let fit = Arc::new(self.fit_uncached(gamma));
        self.cache
            .entry(gamma.clone())
            .or_insert(fit)
            .value()
            .clone()
    }

    /// One compression + Newton fit with no cache involvement.
    pub fn fit_uncached(&self, gamma: &ModelVector) -> FitResult {
        let pt = compress_profiles(&self.x, &self.y, gamma);
        fit_mle(&pt)
    }

    pub fn cached_models(&self) -> usize {
        self.cache.len()
    }
}

/// True when (bic_a, gamma_a) should be preferred over (bic_b, gamma_b):
/// higher BIC, then fewer included drugs, then lexicographically smaller
/// inclusion vector. The two tie levels make every search outcome unique.
fn better_model(bic_a: f64, gamma_a: &ModelVector, bic_b: f64, gamma_b: &ModelVector) -> bool {
    match bic_a.partial_cmp(&bic_b).expect("BIC is never NaN") {
        std::cmp::Ordering::Greater => true,
        std::cmp::Ordering::Less => false,
        std::cmp::Ordering::Equal => match gamma_a.count_ones().cmp(&gamma_b.count_ones()) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => gamma_a.lex_cmp(gamma_b) == std::cmp::Ordering::Less,
        },
    }
}

/// Draws a model uniformly from the Hamming ball of radius `alpha` around
/// `gamma`: first the flip count k, weighted by the number of models at
/// each distance (binomial coefficients), then a uniform k-subset of
/// coordinates to flip. k = 0 reproduces the current model, a legal
/// self-move. The resulting proposal kernel is symmetric.
pub fn propose_neighbor<R: Rng>(gamma: &ModelVector, alpha: usize, rng: &mut R) -> ModelVector {
    assert!(alpha >= 1, "proposal radius must be at least 1");
    let p = gamma.len();
    let radius = alpha.min(p);

    // C(p, k) for k = 0..=radius, in f64: exact for every count that could
    // plausibly appear (p in the hundreds keeps these far below 2^53 for
    // small radii, and errors this small cannot change a uniform draw).
    let mut total = 0.0;
    let mut weights = Vec::with_capacity(radius + 1);
    let mut c = 1.0;
    for k in 0..=radius {
        if k > 0 {
            c = c * (p - k + 1) as f64 / k as f64;
        }
        weights.push(c);
        total += c;
    }
    let mut u = rng.random::<f64>() * total;
    let mut k = radius;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            k = i;
            break;
        }
        u -= w;
    }

    let mut candidate = gamma.clone();
    for idx in rand::seq::index::sample(rng, p, k) {
        candidate.flip(idx);
    }
    candidate
}

/// Metropolis acceptance probability min(1, exp(candidate - current)).
/// Candidates outside the model space (or with diverged fits) carry BIC
/// -inf and are never accepted; the current state must be valid.
pub fn acceptance_prob(bic_candidate: f64, bic_current: f64) -> f64 {
    assert!(
        bic_current > f64::NEG_INFINITY,
        "chain state must have finite BIC"
    );
    if bic_candidate == f64::NEG_INFINITY {
        return 0.0;
    }
    (bic_candidate - bic_current).exp().min(1.0)
}

/// Result of one chain: the best state visited and, optionally, the
/// iteration trace.
pub struct ChainOutcome {
    pub best_model: ModelVector,
    pub best_fit: Arc<FitResult>,
    pub trace: Vec<TraceRow>,
}

/// Runs one Metropolis-Hastings chain from a uniform random initial state.
///
/// The walk proposes within the Hamming ball, accepts by the BIC ratio, and
/// returns the best state it ever occupied (the initial state included),
/// not the final one. Initial states whose fit diverges are redrawn up to
/// 100 times before falling back to the intercept-only model, which always
/// has a finite score when any drug is eligible.
pub fn run_chain(
    ctx: &SearchContext,
    cfg: &ChainConfig,
    chain_index: usize,
    chain_seed: u64,
) -> ChainOutcome {
    let p = ctx.p_eligible();
    assert!(p >= 1, "chains need a nonempty model space");
    let mut rng = ChaCha8Rng::seed_from_u64(chain_seed);

    let mut current = ModelVector::zeros(p);
    let mut current_fit = None;
    for _attempt in 0..100 {
        let mut draw = ModelVector::zeros(p);
        for j in 0..p {
            if rng.random_bool(0.5) {
                draw.set(j, true);
            }
        }
        let fit = ctx.score(&draw);
        if fit.bic > f64::NEG_INFINITY {
            current = draw;
            current_fit = Some(fit);
            break;
        }
    }
    let mut current_fit = current_fit.unwrap_or_else(|| ctx.score(&current));

    let mut best = current.clone();
    let mut best_fit = current_fit.clone();
    let mut trace = Vec::new();
    if cfg.collect_trace {
        trace.push(TraceRow {
            chain: chain_index,
            iter: 0,
            bic_current: current_fit.bic,
            bic_best: best_fit.bic,
            accepted: true,
        });
    }

    for iter in 1..=cfg.iters {
        let candidate = propose_neighbor(&current, cfg.alpha, &mut rng);
        let candidate_fit = ctx.score(&candidate);
        let rho = acceptance_prob(candidate_fit.bic, current_fit.bic);
        let accepted = rng.random::<f64>() < rho;
        if accepted {
            current = candidate;
            current_fit = candidate_fit;
            if better_model(current_fit.bic, &current, best_fit.bic, &best) {
                best = current.clone();
                best_fit = current_fit.clone();
            }
        }
        if cfg.collect_trace {
            trace.push(TraceRow {
                chain: chain_index,
                iter,
                bic_current: current_fit.bic,
                bic_best: best_fit.bic,
                accepted,
            });
        }
    }

    ChainOutcome {
        best_model: best,
        best_fit,
        trace,
    }
}

/// Scores every one of the 2^p models and returns the argmax under the
/// usual tie rules. Diverged fits are skipped; if every model diverges
/// (impossible once any drug is eligible) the intercept-only fit is
/// returned as-is.
pub fn exhaustive_search(ctx: &SearchContext) -> Result<(ModelVector, FitResult)> {
    let p = ctx.p_eligible();
    if p > EXHAUSTIVE_HARD_CAP {
        return Err(Error::Config(format!(
            "exhaustive search over {p} drugs would fit 2^{p} models; cap is {EXHAUSTIVE_HARD_CAP}"
        )));
    }
    let mut best = ModelVector::zeros(p);
    let mut best_fit = ctx.fit_uncached(&best);
    for mask in 1..(1u64 << p) {
        let gamma = ModelVector::from_u64_mask(p, mask);
        let fit = ctx.fit_uncached(&gamma);
        if fit.bic > f64::NEG_INFINITY && better_model(fit.bic, &gamma, best_fit.bic, &best) {
            best = gamma;
            best_fit = fit;
        }
    }
    Ok((best, best_fit))
}

/// Full search for one event: exhaustive when the eligible set is at or
/// below the cutoff, otherwise `restarts` independent chains with seeds
/// derived from the configured base. Chains run in parallel; aggregation
/// is a deterministic reduction over chain index order.
pub fn search(
    x: &ReportMatrix,
    y: &EventVector,
    mask: &EligibilityMask,
    cfg: &ChainConfig,
) -> Result<SearchReport> {
    cfg.validate()?;
    let ctx = SearchContext::new(x, y, mask);
    search_with_context(&ctx, cfg)
}

/// [`search`] over a prebuilt context, for callers that want to reuse or
/// inspect the cache afterwards.
pub fn search_with_context(ctx: &SearchContext, cfg: &ChainConfig) -> Result<SearchReport> {
    cfg.validate()?;
    let p = ctx.p_eligible();

    if p == 0 {
        let gamma = ModelVector::zeros(0);
        let fit = ctx.fit_uncached(&gamma);
        return Ok(SearchReport {
            best_model: gamma,
            best_fit: fit,
            eligible: Vec::new(),
            per_chain_best: Vec::new(),
            hit_count: cfg.restarts,
            exhaustive: true,
            empty_model_space: true,
            trace: None,
        });
    }

    if p <= cfg.exhaustive_cutoff {
        let (best_model, best_fit) = exhaustive_search(ctx)?;
        return Ok(SearchReport {
            best_model,
            best_fit,
            eligible: ctx.eligible_indices().to_vec(),
            per_chain_best: Vec::new(),
            hit_count: cfg.restarts,
            exhaustive: true,
            empty_model_space: false,
            trace: None,
        });
    }

    let outcomes: Vec<ChainOutcome> = (0..cfg.restarts)
        .into_par_iter()
        .map(|chain| run_chain(ctx, cfg, chain, mix_seed(cfg.seed, chain as u64 + 1)))
        .collect();

    let mut best_idx = 0;
    for (i, o) in outcomes.iter().enumerate().skip(1) {
        if better_model(
            o.best_fit.bic,
            &o.best_model,
            outcomes[best_idx].best_fit.bic,
            &outcomes[best_idx].best_model,
        ) {
            best_idx = i;
        }
    }
    let best_model = outcomes[best_idx].best_model.clone();
    let best_fit = (*outcomes[best_idx].best_fit).clone();
    let hit_count = outcomes
        .iter()
        .filter(|o| o.best_model == best_model)
        .count();
    let per_chain_best: Vec<(usize, f64)> = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| (i, o.best_fit.bic))
        .collect();
    let trace = cfg.collect_trace.then(|| {
        outcomes
            .iter()
            .flat_map(|o| o.trace.iter().copied())
            .collect()
    });

    Ok(SearchReport {
        best_model,
        best_fit,
        eligible: ctx.eligible_indices().to_vec(),
        per_chain_best,
        hit_count,
        exhaustive: false,
        empty_model_space: false,
        trace,
    })
}
