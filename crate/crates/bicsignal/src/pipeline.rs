//! End-to-end orchestration: ingest, per-event eligibility and search,
//! signal extraction, baselines, metrics, and the output files.
//!
//! Every run writes plot-ready CSVs plus a JSON manifest echoing the
//! configuration, derived seeds, per-event statistics, timings, and a
//! content hash of each output file. All outputs except the manifest's
//! timing fields are byte-reproducible from (input, config, seed).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::baselines::{all_baselines, project, prr_result, rfet_result, ror_result, BaselineMethod};
use crate::dataset::{
    compress_profiles, eligibility_mask, load_reports, EventVector, ReportMatrix, ReportSource,
};
use crate::error::{Error, Result};
use crate::eval::{eligibility_census, load_reference, score_signals, Label, ReferenceSet};
use crate::logistic::signal_coefficients;
use crate::search::{mix_seed, search, ChainConfig, SearchReport};
use crate::synth::{generate, SyntheticSpec};

/// Name of the environment variable that overrides the thread budget.
pub const THREADS_ENV: &str = "BICSIGNAL_THREADS";

/// Full configuration of one analysis run.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    /// Report file; in two-file mode, the reports-by-drugs triplet file.
    pub reports: PathBuf,
    /// Reports-by-events triplet file; presence selects two-file mode.
    pub reports_events: Option<PathBuf>,
    /// Labeled reference pairs for metric scoring.
    pub reference: Option<PathBuf>,
    /// Restrict the analysis to these event ids (default: all declared).
    pub events: Option<Vec<String>>,
    pub alpha: usize,
    pub iters: usize,
    pub restarts: usize,
    pub exhaustive_cutoff: usize,
    pub seed: u64,
    /// Also compute the disproportionality baselines; requires `reference`.
    pub baselines: bool,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub trace: bool,
}

impl RunConfig {
    pub fn new(reports: impl Into<PathBuf>, seed: u64, out: impl Into<PathBuf>) -> Self {
        RunConfig {
            reports: reports.into(),
            reports_events: None,
            reference: None,
            events: None,
            alpha: 5,
            iters: 5000,
            restarts: 100,
            exhaustive_cutoff: 12,
            seed,
            baselines: false,
            out: out.into(),
            threads: None,
            trace: false,
        }
    }

    fn chain_config(&self, event_seed: u64) -> ChainConfig {
        ChainConfig {
            alpha: self.alpha,
            iters: self.iters,
            restarts: self.restarts,
            seed: event_seed,
            exhaustive_cutoff: self.exhaustive_cutoff,
            collect_trace: self.trace,
        }
    }

    fn source(&self) -> ReportSource<'_> {
        match &self.reports_events {
            Some(events) => ReportSource::Triplet {
                drugs: &self.reports,
                events,
            },
            None => ReportSource::Single(&self.reports),
        }
    }
}

/// What a completed run produced, for logging and tests.
#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub written: Vec<PathBuf>,
    pub n_events: usize,
    pub n_signals: usize,
}

#[derive(Serialize)]
struct ManifestOutput {
    sha256: String,
    bytes: usize,
}

#[derive(Serialize)]
struct ManifestEvent {
    event_id: String,
    seed: u64,
    headcount: usize,
    p_eligible: usize,
    exhaustive: bool,
    hit_count: usize,
    converged: bool,
    best_bic: f64,
    best_model: Vec<String>,
    best_model_profiles: usize,
    n_signals: usize,
    seconds: f64,
}

#[derive(Serialize)]
struct ManifestReference {
    path: PathBuf,
    pairs: usize,
    out_of_universe: Vec<(String, String)>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: BTreeMap<&'static str, &'static str>,
    config: &'a RunConfig,
    threads: usize,
    reference: Option<ManifestReference>,
    events: Vec<ManifestEvent>,
    metrics: Option<Vec<crate::eval::MetricsRow>>,
    outputs: BTreeMap<String, ManifestOutput>,
}

/// FNV-1a over the event identifier; feeds the per-event seed derivation so
/// adding or reordering events never shifts another event's stream.
fn fnv1a64(s: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::new_with_prefix(bytes).finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Shortest-roundtrip float for CSV cells, switching to scientific notation
/// when plain decimal would degenerate into long zero runs.
fn fmt_float(v: f64) -> String {
    if v != 0.0 && v.is_finite() && (v.abs() < 1e-4 || v.abs() >= 1e16) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Thread budget: environment override, then the config, then whatever the
/// machine offers.
fn resolve_threads(cfg_threads: Option<usize>) -> Result<usize> {
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let parsed: usize = raw
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV}={raw:?} is not a thread count")))?;
        if parsed == 0 {
            return Err(Error::Config(format!("{THREADS_ENV} must be positive")));
        }
        return Ok(parsed);
    }
    if let Some(t) = cfg_threads {
        if t == 0 {
            return Err(Error::Config("--threads must be positive".into()));
        }
        return Ok(t);
    }
    Ok(std::thread::available_parallelism().map_or(1, |v| v.get()))
}

fn load_selected(
    source: ReportSource,
    selection: Option<&[String]>,
) -> Result<(ReportMatrix, Vec<EventVector>)> {
    let (x, events) = load_reports(source)?;
    if x.n() == 0 {
        return Err(Error::Config("empty dataset: no reports to analyze".into()));
    }
    let events = match selection {
        None => events,
        Some(wanted) => {
            let mut selected = Vec::with_capacity(wanted.len());
            for id in wanted {
                let found = events.iter().find(|e| e.event_id() == id).ok_or_else(|| {
                    Error::UnknownId {
                        id: id.clone(),
                        context: "event selection".into(),
                    }
                })?;
                selected.push(found.clone());
            }
            selected
        }
    };
    if events.is_empty() {
        return Err(Error::Config("no events selected".into()));
    }
    Ok((x, events))
}

struct EventAnalysis {
    report: SearchReport,
    /// (drug id, headcount, coefficient), descending coefficient.
    signals: Vec<(String, u64, f64)>,
    seconds: f64,
    seed: u64,
    best_model_profiles: usize,
}

fn analyze_event(
    x: &ReportMatrix,
    y: &EventVector,
    cfg: &RunConfig,
) -> Result<EventAnalysis> {
    let started = Instant::now();
    let event_seed = mix_seed(cfg.seed, fnv1a64(y.event_id()));
    let mask = eligibility_mask(x, y);
    let report = search(x, y, &mask, &cfg.chain_config(event_seed))?;

    let mut signals = Vec::new();
    if report.best_fit.converged && !report.empty_model_space {
        for (pos, beta) in signal_coefficients(&report.best_fit, &report.best_model) {
            let orig = report.eligible[pos];
            let headcount = project(x, y, orig).a;
            signals.push((x.drug_id(orig).to_string(), headcount, beta));
        }
    }

    // Unique-profile count of the winning model, a useful size statistic
    // for the manifest (how much the likelihood work was compressed).
    let restricted = x.restrict_columns(&report.eligible);
    let best_model_profiles = compress_profiles(&restricted, y, &report.best_model).m();

    Ok(EventAnalysis {
        report,
        signals,
        seconds: started.elapsed().as_secs_f64(),
        seed: event_seed,
        best_model_profiles,
    })
}

fn render_signals_csv(
    events: &[EventVector],
    analyses: &[EventAnalysis],
    reference: Option<&ReferenceSet>,
) -> String {
    let mut out = String::from("event,drug,headcount,beta,label\n");
    for (y, analysis) in events.iter().zip(analyses) {
        for (drug_id, headcount, beta) in &analysis.signals {
            let label = reference
                .map(|r| r.label_of(y.event_id(), drug_id))
                .unwrap_or(Label::Unknown);
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                y.event_id(),
                drug_id,
                headcount,
                fmt_float(*beta),
                label.as_str()
            ));
        }
    }
    out
}

fn render_census_csv(x: &ReportMatrix, events: &[EventVector]) -> String {
    let mut out = String::from("event_id,headcount,p_eligible\n");
    for row in eligibility_census(x, events) {
        out.push_str(&format!(
            "{},{},{}\n",
            row.event_id, row.headcount, row.p_eligible
        ));
    }
    out
}

fn render_baselines_csv(x: &ReportMatrix, events: &[EventVector]) -> String {
    let mut out = String::from("event,drug,method,statistic,pvalue,signaled\n");
    for y in events {
        for j in 0..x.p() {
            let table = project(x, y, j);
            for result in all_baselines(&table) {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    y.event_id(),
                    x.drug_id(j),
                    result.method.as_str(),
                    fmt_float(result.statistic),
                    fmt_float(result.pvalue),
                    result.signaled
                ));
            }
        }
    }
    out
}

fn render_trace_csv(report: &SearchReport) -> Option<String> {
    let trace = report.trace.as_ref()?;
    let mut out = String::from("chain,iter,bic_current,bic_best,accepted\n");
    for row in trace {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.chain,
            row.iter,
            fmt_float(row.bic_current),
            fmt_float(row.bic_best),
            row.accepted
        ));
    }
    Some(out)
}

fn render_metrics_csv(rows: &[crate::eval::MetricsRow]) -> String {
    let mut out = String::from("method,ns,rpc,rnc,rus\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.method,
            row.ns,
            fmt_float(row.rpc),
            fmt_float(row.rnc),
            fmt_float(row.rus)
        ));
    }
    out
}

fn write_outputs(out_dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::with_capacity(files.len());
    for (name, content) in files {
        let path = out_dir.join(name);
        if let Err(e) = fs::write(&path, content) {
            for partial in &written {
                let _ = fs::remove_file(partial);
            }
            return Err(Error::io(path, e));
        }
        written.push(path);
    }
    Ok(written)
}

/// Runs the full pipeline and writes signals, metrics, baselines, census,
/// optional per-event traces, and the manifest into the output directory.
///
/// All computation happens before anything is written, so a failed run
/// leaves no partial output behind (a failed write cleans up after itself).
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.chain_config(0).validate()?;
    if cfg.baselines && cfg.reference.is_none() {
        return Err(Error::Config(
            "baseline comparison needs --reference to score the methods".into(),
        ));
    }
    let threads = resolve_threads(cfg.threads)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let (x, events) = load_selected(cfg.source(), cfg.events.as_deref())?;
    let reference = match &cfg.reference {
        Some(path) => Some(load_reference(path)?),
        None => None,
    };

    let analyses: Vec<EventAnalysis> = pool.install(|| {
        events
            .iter()
            .map(|y| analyze_event(&x, y, cfg))
            .collect::<Result<Vec<_>>>()
    })?;

    // Comparison metrics for every method, pooled across events.
    let metrics = reference.as_ref().map(|reference| {
        let bic_signals: Vec<(String, String)> = events
            .iter()
            .zip(&analyses)
            .flat_map(|(y, a)| {
                a.signals
                    .iter()
                    .map(|(drug, _, _)| (y.event_id().to_string(), drug.clone()))
            })
            .collect();
        let mut rows = vec![score_signals(
            "BIC",
            bic_signals.iter().map(|(e, d)| (e.as_str(), d.as_str())),
            reference,
        )];
        if cfg.baselines {
            for method in [
                BaselineMethod::Prr,
                BaselineMethod::Ror,
                BaselineMethod::Rfet,
            ] {
                let mut pairs: Vec<(String, String)> = Vec::new();
                for y in &events {
                    for j in 0..x.p() {
                        let table = project(&x, y, j);
                        let result = match method {
                            BaselineMethod::Prr => prr_result(&table),
                            BaselineMethod::Ror => ror_result(&table),
                            BaselineMethod::Rfet => rfet_result(&table),
                        };
                        if result.signaled {
                            pairs.push((y.event_id().to_string(), x.drug_id(j).to_string()));
                        }
                    }
                }
                rows.push(score_signals(
                    method.as_str(),
                    pairs.iter().map(|(e, d)| (e.as_str(), d.as_str())),
                    reference,
                ));
            }
        }
        rows
    });

    let mut files: Vec<(String, String)> = Vec::new();
    files.push((
        "signals.csv".into(),
        render_signals_csv(&events, &analyses, reference.as_ref()),
    ));
    files.push(("census.csv".into(), render_census_csv(&x, &events)));
    if let Some(rows) = &metrics {
        files.push(("metrics.csv".into(), render_metrics_csv(rows)));
    }
    if cfg.baselines {
        files.push(("baselines.csv".into(), render_baselines_csv(&x, &events)));
    }
    if cfg.trace {
        for (y, analysis) in events.iter().zip(&analyses) {
            if let Some(content) = render_trace_csv(&analysis.report) {
                files.push((format!("trace_{}.csv", y.event_id()), content));
            }
        }
    }

    let mut outputs = BTreeMap::new();
    for (name, content) in &files {
        outputs.insert(
            name.clone(),
            ManifestOutput {
                sha256: sha256_hex(content.as_bytes()),
                bytes: content.len(),
            },
        );
    }
    let manifest = Manifest {
        tool: BTreeMap::from([
            ("name", env!("CARGO_PKG_NAME")),
            ("version", env!("CARGO_PKG_VERSION")),
        ]),
        config: cfg,
        threads,
        reference: cfg.reference.as_ref().map(|path| {
            let reference = reference.as_ref().unwrap();
            let event_ids: Vec<String> =
                events.iter().map(|e| e.event_id().to_string()).collect();
            ManifestReference {
                path: path.clone(),
                pairs: reference.len(),
                out_of_universe: reference.out_of_universe(&event_ids, x.drug_ids()),
            }
        }),
        events: events
            .iter()
            .zip(&analyses)
            .map(|(y, a)| ManifestEvent {
                event_id: y.event_id().to_string(),
                seed: a.seed,
                headcount: y.positives(),
                p_eligible: a.report.eligible.len(),
                exhaustive: a.report.exhaustive,
                hit_count: a.report.hit_count,
                converged: a.report.best_fit.converged,
                best_bic: a.report.best_fit.bic,
                best_model: a
                    .report
                    .best_model
                    .iter_ones()
                    .map(|pos| x.drug_id(a.report.eligible[pos]).to_string())
                    .collect(),
                best_model_profiles: a.best_model_profiles,
                n_signals: a.signals.len(),
                seconds: a.seconds,
            })
            .collect(),
        metrics,
        outputs,
    };
    let manifest_json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    files.push(("manifest.json".into(), manifest_json + "\n"));

    let written = write_outputs(&cfg.out, &files)?;
    Ok(RunSummary {
        out_dir: cfg.out.clone(),
        written,
        n_events: events.len(),
        n_signals: analyses.iter().map(|a| a.signals.len()).sum(),
    })
}

/// Renders a dataset in the single-file report format.
pub fn render_report_file(x: &ReportMatrix, events: &[EventVector]) -> String {
    let mut out = String::new();
    out.push_str(&format!("#drugs: {}\n", x.drug_ids().join(",")));
    out.push_str(&format!(
        "#events: {}\n",
        events
            .iter()
            .map(|e| e.event_id())
            .collect::<Vec<_>>()
            .join(",")
    ));
    let width = x.n().saturating_sub(1).to_string().len();
    for i in 0..x.n() {
        let drugs: Vec<&str> = x.rows()[i]
            .iter()
            .map(|&j| x.drug_id(j as usize))
            .collect();
        let evs: Vec<&str> = events
            .iter()
            .filter(|e| e.y()[i] == 1)
            .map(|e| e.event_id())
            .collect();
        out.push_str(&format!(
            "R{i:0width$},{},{}\n",
            drugs.join(";"),
            evs.join(";")
        ));
    }
    out
}

#[derive(Serialize)]
struct TruthSidecar<'a> {
    seed: u64,
    spec: &'a SyntheticSpec,
    drug_ids: Vec<String>,
}

/// Reads a synthetic spec (JSON), samples a dataset, and writes the report
/// file plus a ground-truth sidecar. Returns (reports path, truth path).
pub fn generate_dataset(
    spec_path: &Path,
    seed: u64,
    out_dir: &Path,
) -> Result<(PathBuf, PathBuf)> {
    let text = fs::read_to_string(spec_path).map_err(|e| Error::io(spec_path, e))?;
    let spec: SyntheticSpec = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: spec_path.to_path_buf(),
        source: e,
    })?;
    let (x, y) = generate(&spec, seed)?;

    let reports = render_report_file(&x, std::slice::from_ref(&y));
    let truth = serde_json::to_string_pretty(&TruthSidecar {
        seed,
        spec: &spec,
        drug_ids: x.drug_ids().to_vec(),
    })
    .expect("truth serializes")
        + "\n";

    let written = write_outputs(
        out_dir,
        &[
            ("reports.csv".to_string(), reports),
            ("truth.json".to_string(), truth),
        ],
    )?;
    Ok((written[0].clone(), written[1].clone()))
}

/// Census verb: eligibility counts for every event, written as census.csv.
pub fn census_run(source: ReportSource, out_dir: &Path) -> Result<PathBuf> {
    let (x, events) = load_selected(source, None)?;
    let csv = render_census_csv(&x, &events);
    let written = write_outputs(out_dir, &[("census.csv".to_string(), csv)])?;
    Ok(written.into_iter().next().unwrap())
}

/// Baselines verb: PRR/ROR/RFET for every drug-event pair, written as
/// baselines.csv. No reference set is needed because nothing is scored.
pub fn baselines_run(source: ReportSource, out_dir: &Path) -> Result<PathBuf> {
    let (x, events) = load_selected(source, None)?;
    let csv = render_baselines_csv(&x, &events);
    let written = write_outputs(out_dir, &[("baselines.csv".to_string(), csv)])?;
    Ok(written.into_iter().next().unwrap())
}
