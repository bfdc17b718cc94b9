//! Scoring detected signals against a labeled reference set, plus the
//! per-event eligibility census.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::dataset::{eligibility_mask, EventVector, ReportMatrix};
use crate::error::{Error, Result};

/// Ground-truth status of a drug-event pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
    Unknown,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
            Label::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "positive" => Some(Label::Positive),
            "negative" => Some(Label::Negative),
            "unknown" => Some(Label::Unknown),
            _ => None,
        }
    }
}

/// Labeled (event, drug) pairs. Anything absent from the map is an unknown
/// control by convention.
#[derive(Debug, Clone, Default)]
pub struct ReferenceSet {
    entries: HashMap<(String, String), Label>,
}

impl ReferenceSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a pair; duplicate keys are rejected so conflicting labels
    /// cannot shadow each other silently.
    pub fn insert(&mut self, event_id: &str, drug_id: &str, label: Label) -> Result<()> {
        let key = (event_id.to_string(), drug_id.to_string());
        if self.entries.contains_key(&key) {
            return Err(Error::Config(format!(
                "reference set lists ({event_id}, {drug_id}) twice"
            )));
        }
        self.entries.insert(key, label);
        Ok(())
    }

    pub fn label_of(&self, event_id: &str, drug_id: &str) -> Label {
        self.entries
            .get(&(event_id.to_string(), drug_id.to_string()))
            .copied()
            .unwrap_or(Label::Unknown)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reference pairs naming a drug or event the analysis universe does
    /// not contain. These are surfaced (manifest, logs) instead of being
    /// silently dropped, so restrictions of the universe stay auditable.
    /// Sorted for stable output.
    pub fn out_of_universe(
        &self,
        event_ids: &[String],
        drug_ids: &[String],
    ) -> Vec<(String, String)> {
        let events: std::collections::HashSet<&str> =
            event_ids.iter().map(|s| s.as_str()).collect();
        let drugs: std::collections::HashSet<&str> =
            drug_ids.iter().map(|s| s.as_str()).collect();
        let mut out: Vec<(String, String)> = self
            .entries
            .keys()
            .filter(|(e, d)| !events.contains(e.as_str()) || !drugs.contains(d.as_str()))
            .cloned()
            .collect();
        out.sort();
        out
    }
}

/// Loads `event_id,drug_id,label` CSV with a header line.
pub fn load_reference(path: &Path) -> Result<ReferenceSet> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    match lines.next() {
        Some((_, "event_id,drug_id,label")) => {}
        Some((lineno, other)) => {
            return Err(Error::schema(
                path,
                lineno,
                format!("expected header 'event_id,drug_id,label', got {other:?}"),
            ))
        }
        None => return Err(Error::schema(path, 1, "empty reference file")),
    }

    let mut set = ReferenceSet::new();
    for (lineno, line) in lines {
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        let [event_id, drug_id, label] = parts.as_slice() else {
            return Err(Error::schema(
                path,
                lineno,
                "expected 'event_id,drug_id,label'",
            ));
        };
        let label = Label::parse(label).ok_or_else(|| {
            Error::schema(
                path,
                lineno,
                format!("label must be positive, negative, or unknown; got {label:?}"),
            )
        })?;
        set.insert(event_id, drug_id, label)
            .map_err(|e| Error::schema(path, lineno, e.to_string()))?;
    }
    Ok(set)
}

/// One method's row of the comparison table: signal count and the fraction
/// of those signals labeled positive / negative / unknown.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub method: String,
    pub ns: usize,
    pub rpc: f64,
    pub rnc: f64,
    pub rus: f64,
    /// True when the method produced no signals at all (rates are zeros by
    /// convention, not fractions).
    pub empty: bool,
}

/// Labels each signal through the reference set and reduces to rates.
pub fn score_signals<'a, I>(method: &str, signals: I, reference: &ReferenceSet) -> MetricsRow
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let mut ns = 0usize;
    let mut positives = 0usize;
    let mut negatives = 0usize;
    let mut unknowns = 0usize;
    for (event_id, drug_id) in signals {
        ns += 1;
        match reference.label_of(event_id, drug_id) {
            Label::Positive => positives += 1,
            Label::Negative => negatives += 1,
            Label::Unknown => unknowns += 1,
        }
    }
    if ns == 0 {
        return MetricsRow {
            method: method.to_string(),
            ns: 0,
            rpc: 0.0,
            rnc: 0.0,
            rus: 0.0,
            empty: true,
        };
    }
    MetricsRow {
        method: method.to_string(),
        ns,
        rpc: positives as f64 / ns as f64,
        rnc: negatives as f64 / ns as f64,
        rus: unknowns as f64 / ns as f64,
        empty: false,
    }
}

/// Per-event census row: how many reports mention the event, and how many
/// drugs pass the eligibility condition against it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CensusRow {
    pub event_id: String,
    pub headcount: usize,
    pub p_eligible: usize,
}

/// Census across all events: the raw material for plotting how the size of
/// the model space grows with event headcount.
pub fn eligibility_census(x: &ReportMatrix, events: &[EventVector]) -> Vec<CensusRow> {
    events
        .iter()
        .map(|y| {
            let mask = eligibility_mask(x, y);
            CensusRow {
                event_id: y.event_id().to_string(),
                headcount: y.positives(),
                p_eligible: mask.p_eligible(),
            }
        })
        .collect()
}
