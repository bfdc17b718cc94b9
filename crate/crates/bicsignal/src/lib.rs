//! Signal detection for sparse spontaneous-report databases.
//!
//! For each adverse event, the library selects the subset of drugs whose
//! logistic regression on the event maximizes the BIC criterion, searching
//! the binary model space with a multi-restart Metropolis-Hastings walk (or
//! exhaustively when few drugs are eligible). Drugs carrying a positive
//! coefficient in the winning model are the reported signals. Classical
//! disproportionality baselines (PRR, ROR, reporting Fisher exact test) and
//! reference-set scoring are included for comparison.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod logistic;
pub mod model;
pub mod pipeline;
pub mod search;
pub mod synth;

pub use baselines::{
    all_baselines, fisher_mid_p, project, prr_result, prr_ror, rfet_result, ror_result,
    BaselineMethod, BaselineResult, ContingencyTable,
};
pub use dataset::{
    compress_profiles, eligibility_mask, load_reports, EligibilityMask, EventVector, ProfileTable,
    ReportMatrix, ReportSource,
};
pub use eval::{
    eligibility_census, load_reference, score_signals, CensusRow, Label, MetricsRow, ReferenceSet,
};
pub use error::{Error, Result};
pub use logistic::{
    bic, fit_mle, fit_mle_with, loglik_weighted, signal_coefficients, CoefficientVector,
    FitOptions, FitResult,
};
pub use model::ModelVector;
pub use pipeline::{
    baselines_run, census_run, generate_dataset, render_report_file, run, RunConfig, RunSummary,
    THREADS_ENV,
};
pub use search::{
    acceptance_prob, exhaustive_search, mix_seed, propose_neighbor, run_chain, search,
    search_with_context, ChainConfig, ChainOutcome, SearchContext, SearchReport, TraceRow,
};
pub use synth::{generate, CorrelationBlock, SyntheticSpec};
