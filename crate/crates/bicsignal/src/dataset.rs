//! Report ingestion, the MLE-existence eligibility filter, and weighted
//! unique-profile compression.
//!
//! Two ingest formats are supported: a single report file (header lines
//! declaring the drug and event universes, then one CSV line per report) and
//! a two-file sparse triplet mode. Both produce the same in-memory types.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::ModelVector;

/// Sparse binary drug-consumption matrix: n reports over p drugs.
///
/// Rows hold the sorted drug indices consumed in each report; a column view
/// (per-drug sorted report indices) is built once at construction because
/// eligibility scans, contingency projections, and profile compression all
/// walk columns, not rows.
#[derive(Debug, Clone)]
pub struct ReportMatrix {
    rows: Vec<Vec<u32>>,
    cols: Vec<Vec<u32>>,
    drug_ids: Vec<String>,
}

impl ReportMatrix {
    /// Validates row contents (index range, duplicates) and drug id
    /// uniqueness, then builds the column view.
    pub fn new(rows: Vec<Vec<u32>>, drug_ids: Vec<String>) -> Result<Self> {
        let p = drug_ids.len();
        let mut seen = HashMap::with_capacity(p);
        for (j, id) in drug_ids.iter().enumerate() {
            if let Some(prev) = seen.insert(id.as_str(), j) {
                return Err(Error::Config(format!(
                    "duplicate drug id {id:?} at positions {prev} and {j}"
                )));
            }
        }

        let mut rows = rows;
        let mut cols: Vec<Vec<u32>> = vec![Vec::new(); p];
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            for w in row.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::Dimension(format!(
                        "report {i} lists drug index {} twice",
                        w[0]
                    )));
                }
            }
            for &j in row.iter() {
                if j as usize >= p {
                    return Err(Error::Dimension(format!(
                        "report {i} references drug index {j}, but p = {p}"
                    )));
                }
                cols[j as usize].push(i as u32);
            }
        }

        Ok(ReportMatrix {
            rows,
            cols,
            drug_ids,
        })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> usize {
        self.drug_ids.len()
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }

    /// Sorted report indices where drug j was consumed.
    pub fn col(&self, j: usize) -> &[u32] {
        &self.cols[j]
    }

    pub fn drug_ids(&self) -> &[String] {
        &self.drug_ids
    }

    pub fn drug_id(&self, j: usize) -> &str {
        &self.drug_ids[j]
    }

    /// Matrix restricted to the given columns, in the given order. Callers
    /// keep `keep` itself as the map back to original drug indices.
    pub fn restrict_columns(&self, keep: &[usize]) -> ReportMatrix {
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); self.n()];
        let mut cols = Vec::with_capacity(keep.len());
        let mut drug_ids = Vec::with_capacity(keep.len());
        for (new_j, &j) in keep.iter().enumerate() {
            for &i in &self.cols[j] {
                rows[i as usize].push(new_j as u32);
            }
            cols.push(self.cols[j].clone());
            drug_ids.push(self.drug_ids[j].clone());
        }
        ReportMatrix {
            rows,
            cols,
            drug_ids,
        }
    }
}

/// Binary outcome vector for one adverse event, aligned with the report
/// matrix rows.
#[derive(Debug, Clone)]
pub struct EventVector {
    event_id: String,
    y: Vec<u8>,
}

impl EventVector {
    pub fn new(event_id: impl Into<String>, y: Vec<u8>) -> Result<Self> {
        if let Some(bad) = y.iter().find(|&&v| v > 1) {
            return Err(Error::Dimension(format!(
                "outcome entries must be 0 or 1, got {bad}"
            )));
        }
        Ok(EventVector {
            event_id: event_id.into(),
            y,
        })
    }

    pub fn event_id(&self) -> &str {
        &self.event_id
    }

    pub fn y(&self) -> &[u8] {
        &self.y
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Event headcount: number of reports mentioning the event.
    pub fn positives(&self) -> usize {
        self.y.iter().map(|&v| v as usize).sum()
    }
}

/// Per-drug verdict of the four-cell MLE-existence condition.
#[derive(Debug, Clone)]
pub struct EligibilityMask {
    eligible: Vec<bool>,
    p_eligible: usize,
}

impl EligibilityMask {
    pub fn eligible(&self) -> &[bool] {
        &self.eligible
    }

    pub fn is_eligible(&self, j: usize) -> bool {
        self.eligible[j]
    }

    pub fn p_eligible(&self) -> usize {
        self.p_eligible
    }

    /// Original indices of eligible drugs, ascending.
    pub fn eligible_indices(&self) -> Vec<usize> {
        self.eligible
            .iter()
            .enumerate()
            .filter_map(|(j, &e)| e.then_some(j))
            .collect()
    }
}

/// Marks drug j eligible iff, within each outcome stratum, column j shows
/// both an absence and a presence: all four (outcome, consumption) cells
/// are witnessed. Fitting a coefficient for a drug failing this cannot have
/// a finite marginal MLE, so such drugs are excluded from the model space.
///
/// An outcome vector that is all zeros or all ones leaves one stratum empty
/// and therefore no drug eligible; that is a valid all-false mask, not an
/// error.
pub fn eligibility_mask(x: &ReportMatrix, y: &EventVector) -> EligibilityMask {
    assert_eq!(
        x.n(),
        y.len(),
        "matrix has {} reports but outcome has {}",
        x.n(),
        y.len()
    );
    let n = x.n();
    let n1 = y.positives();
    let n0 = n - n1;

    let mut eligible = vec![false; x.p()];
    let mut p_eligible = 0;
    for (j, flag) in eligible.iter_mut().enumerate() {
        let col = x.col(j);
        // a = consumers with the event; the other three cells follow from
        // the margins.
        let a = col.iter().filter(|&&i| y.y()[i as usize] == 1).count();
        let with_drug = col.len();
        let ok = a >= 1               // (y=1, x=1)
            && with_drug - a >= 1     // (y=0, x=1)
            && n1 - a >= 1            // (y=1, x=0)
            && n0 - (with_drug - a) >= 1; // (y=0, x=0)
        if ok {
            *flag = true;
            p_eligible += 1;
        }
    }
    EligibilityMask {
        eligible,
        p_eligible,
    }
}

/// Weighted unique-profile table: the multiset of (restricted covariate
/// vector, outcome) pairs collapsed to distinct entries with multiplicities.
///
/// Restricted vectors are bit-packed, `words` 64-bit words per profile;
/// models of up to 63 drugs fit one word. Profiles appear in first-seen
/// report order, which makes the table (and everything downstream of it)
/// deterministic.
#[derive(Debug, Clone)]
pub struct ProfileTable {
    k: usize,
    words: usize,
    bits: Vec<u64>,
    y: Vec<u8>,
    w: Vec<u64>,
    n: u64,
}

impl ProfileTable {
    /// Builds a table directly from (covariates, outcome, weight) triples,
    /// bypassing report-level data. Useful for synthetic fitting problems
    /// where only the profile structure matters.
    ///
    /// Panics if a covariate vector has the wrong length or a non-binary
    /// entry, a weight is zero, or two profiles coincide.
    pub fn from_parts(k: usize, profiles: Vec<(Vec<u8>, u8, u64)>) -> ProfileTable {
        let words = k.div_ceil(64).max(1);
        let mut bits = Vec::with_capacity(profiles.len() * words);
        let mut y = Vec::with_capacity(profiles.len());
        let mut w = Vec::with_capacity(profiles.len());
        let mut n = 0u64;
        let mut seen = HashMap::new();
        for (xs, outcome, weight) in profiles {
            assert_eq!(xs.len(), k, "profile has {} covariates, expected {k}", xs.len());
            assert!(outcome <= 1, "outcome must be 0 or 1");
            assert!(weight >= 1, "profile weights must be positive");
            let mut packed = vec![0u64; words];
            for (t, &v) in xs.iter().enumerate() {
                assert!(v <= 1, "covariates must be 0 or 1");
                packed[t / 64] |= (v as u64) << (t % 64);
            }
            let key = (packed.clone(), outcome);
            assert!(seen.insert(key, ()).is_none(), "duplicate profile");
            bits.extend_from_slice(&packed);
            y.push(outcome);
            w.push(weight);
            n += weight;
        }
        ProfileTable {
            k,
            words,
            bits,
            y,
            w,
            n,
        }
    }

    /// Number of distinct profiles.
    pub fn m(&self) -> usize {
        self.y.len()
    }

    /// Number of included drugs the profiles are restricted to.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Total weight; equals the report count n of the source data.
    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn weights(&self) -> &[u64] {
        &self.w
    }

    pub fn outcomes(&self) -> &[u8] {
        &self.y
    }

    /// Bit t of profile i's restricted covariate vector.
    #[inline]
    pub fn x_bit(&self, i: usize, t: usize) -> u64 {
        self.bits[i * self.words + t / 64] >> (t % 64) & 1
    }

    /// Expands the table back into one (covariates, outcome) row per
    /// original report, profile order. Test support for the round-trip
    /// property; not used on hot paths.
    pub fn decompress(&self) -> Vec<(Vec<u8>, u8)> {
        let mut out = Vec::with_capacity(self.n as usize);
        for i in 0..self.m() {
            let xs: Vec<u8> = (0..self.k).map(|t| self.x_bit(i, t) as u8).collect();
            for _ in 0..self.w[i] {
                out.push((xs.clone(), self.y[i]));
            }
        }
        out
    }
}

/// Groups reports by their covariate pattern restricted to the drugs in
/// `gamma`, together with the outcome. `gamma` must be indexed over the
/// matrix's columns (callers restrict the matrix to eligible drugs first).
///
/// Construction is column-major: each included drug's report list stamps its
/// bit into a per-report key, so cost is one pass over the included columns
/// plus one pass over reports, independent of how many drugs were excluded.
pub fn compress_profiles(x: &ReportMatrix, y: &EventVector, gamma: &ModelVector) -> ProfileTable {
    assert_eq!(x.n(), y.len(), "matrix/outcome length mismatch");
    assert_eq!(
        gamma.len(),
        x.p(),
        "model is over {} drugs but matrix has {}",
        gamma.len(),
        x.p()
    );
    let n = x.n();
    let k = gamma.count_ones();

    if k < 64 {
        // Narrow path: restricted vector plus outcome fit one u64 key.
        let mut keys = vec![0u64; n];
        for (t, j) in gamma.iter_ones().enumerate() {
            let bit = 1u64 << (t + 1);
            for &i in x.col(j) {
                keys[i as usize] |= bit;
            }
        }
        let mut slot: HashMap<u64, usize> = HashMap::new();
        let mut bits = Vec::new();
        let mut ys = Vec::new();
        let mut w: Vec<u64> = Vec::new();
        for (i, &row_key) in keys.iter().enumerate() {
            let key = row_key | y.y()[i] as u64;
            match slot.get(&key) {
                Some(&s) => w[s] += 1,
                None => {
                    slot.insert(key, ys.len());
                    bits.push(key >> 1);
                    ys.push((key & 1) as u8);
                    w.push(1);
                }
            }
        }
        ProfileTable {
            k,
            words: 1,
            bits,
            y: ys,
            w,
            n: n as u64,
        }
    } else {
        // Wide path: block keys, outcome carried in a trailing word.
        let words = k.div_ceil(64);
        let mut keys = vec![0u64; n * (words + 1)];
        for (t, j) in gamma.iter_ones().enumerate() {
            let (word, bit) = (t / 64, 1u64 << (t % 64));
            for &i in x.col(j) {
                keys[i as usize * (words + 1) + word] |= bit;
            }
        }
        let mut slot: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut bits = Vec::new();
        let mut ys = Vec::new();
        let mut w: Vec<u64> = Vec::new();
        for i in 0..n {
            let start = i * (words + 1);
            keys[start + words] = y.y()[i] as u64;
            let key = &keys[start..start + words + 1];
            match slot.get(key) {
                Some(&s) => w[s] += 1,
                None => {
                    slot.insert(key.to_vec(), ys.len());
                    bits.extend_from_slice(&key[..words]);
                    ys.push(key[words] as u8);
                    w.push(1);
                }
            }
        }
        ProfileTable {
            k,
            words,
            bits,
            y: ys,
            w,
            n: n as u64,
        }
    }
}

/// Where to read reports from.
pub enum ReportSource<'a> {
    /// Single file: `#drugs:`/`#events:` headers, then one line per report.
    Single(&'a Path),
    /// Sparse triplet pair: reports×drugs plus reports×events.
    Triplet {
        drugs: &'a Path,
        events: &'a Path,
    },
}

/// Loads a report dataset in either supported format.
pub fn load_reports(source: ReportSource) -> Result<(ReportMatrix, Vec<EventVector>)> {
    match source {
        ReportSource::Single(path) => load_single(path),
        ReportSource::Triplet { drugs, events } => load_triplet(drugs, events),
    }
}

/// Identifiers appear verbatim in CSV outputs and file names, so the
/// accepted alphabet is restricted up front.
fn validate_id(path: &Path, line: usize, kind: &str, id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-' | ':'));
    if ok {
        Ok(())
    } else {
        Err(Error::schema(
            path,
            line,
            format!("{kind} id {id:?} is empty or contains characters outside [A-Za-z0-9_.:-]"),
        ))
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_id_header(
    path: &Path,
    lineno: usize,
    line: &str,
    prefix: &str,
    kind: &str,
) -> Result<Vec<String>> {
    let rest = line.strip_prefix(prefix).ok_or_else(|| {
        Error::schema(
            path,
            lineno,
            format!("expected header line starting with {prefix:?}, got {line:?}"),
        )
    })?;
    let rest = rest.trim();
    if rest.is_empty() {
        return Ok(Vec::new());
    }
    let ids: Vec<String> = rest.split(',').map(|s| s.trim().to_string()).collect();
    for id in &ids {
        validate_id(path, lineno, kind, id)?;
    }
    Ok(ids)
}

fn load_single(path: &Path) -> Result<(ReportMatrix, Vec<EventVector>)> {
    let text = read_to_string(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());

    let (dl, dline) = lines
        .next()
        .ok_or_else(|| Error::schema(path, 1, "empty file; expected '#drugs:' header"))?;
    let drug_ids = parse_id_header(path, dl, dline, "#drugs:", "drug")?;
    let (el, eline) = lines
        .next()
        .ok_or_else(|| Error::schema(path, dl + 1, "missing '#events:' header"))?;
    let event_ids = parse_id_header(path, el, eline, "#events:", "event")?;

    let drug_index: HashMap<&str, u32> = drug_ids
        .iter()
        .enumerate()
        .map(|(j, id)| (id.as_str(), j as u32))
        .collect();
    if drug_index.len() != drug_ids.len() {
        return Err(Error::schema(path, dl, "duplicate drug id in header"));
    }
    let event_index: HashMap<&str, usize> = event_ids
        .iter()
        .enumerate()
        .map(|(j, id)| (id.as_str(), j))
        .collect();
    if event_index.len() != event_ids.len() {
        return Err(Error::schema(path, el, "duplicate event id in header"));
    }

    let mut report_ids: HashMap<String, usize> = HashMap::new();
    let mut rows: Vec<Vec<u32>> = Vec::new();
    let mut event_cols: Vec<Vec<u8>> = vec![Vec::new(); event_ids.len()];

    for (lineno, line) in lines {
        if line.starts_with('#') {
            return Err(Error::schema(
                path,
                lineno,
                "unexpected header line after the data section began",
            ));
        }
        let mut fields = line.splitn(3, ',');
        let (Some(rid), Some(drugs), Some(events)) =
            (fields.next(), fields.next(), fields.next())
        else {
            return Err(Error::schema(
                path,
                lineno,
                "expected 'report_id,drugs,events' with two commas",
            ));
        };
        let rid = rid.trim();
        validate_id(path, lineno, "report", rid)?;
        if let Some(first) = report_ids.insert(rid.to_string(), lineno) {
            return Err(Error::schema(
                path,
                lineno,
                format!("duplicate report id {rid:?} (first seen on line {first})"),
            ));
        }

        let mut row = Vec::new();
        for d in drugs.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let &j = drug_index.get(d).ok_or_else(|| {
                Error::schema(path, lineno, format!("undeclared drug {d:?}"))
            })?;
            if row.contains(&j) {
                return Err(Error::schema(
                    path,
                    lineno,
                    format!("drug {d:?} listed twice in one report"),
                ));
            }
            row.push(j);
        }
        rows.push(row);

        let mut row_events = vec![0u8; event_ids.len()];
        for e in events.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let &j = event_index.get(e).ok_or_else(|| {
                Error::schema(path, lineno, format!("undeclared event {e:?}"))
            })?;
            if row_events[j] == 1 {
                return Err(Error::schema(
                    path,
                    lineno,
                    format!("event {e:?} listed twice in one report"),
                ));
            }
            row_events[j] = 1;
        }
        for (j, v) in row_events.into_iter().enumerate() {
            event_cols[j].push(v);
        }
    }

    let matrix = ReportMatrix::new(rows, drug_ids)?;
    let events = event_ids
        .into_iter()
        .zip(event_cols)
        .map(|(id, y)| EventVector::new(id, y))
        .collect::<Result<Vec<_>>>()?;
    Ok((matrix, events))
}

/// One parsed triplet file: the set of column ids and, per (report, column),
/// the 1-cells. Zero-valued rows declare ids without setting cells, which
/// lets a triplet file mention drugs or events nobody has.
struct TripletFile {
    col_ids: Vec<String>,
    report_ids: Vec<String>,
    cells: HashMap<(String, String), bool>,
}

fn load_triplet_file(path: &Path, col_kind: &str) -> Result<TripletFile> {
    let text = read_to_string(path)?;
    let expected_header = format!("report_id,{col_kind}_id,value");
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    match lines.next() {
        Some((_, l)) if l == expected_header => {}
        Some((lineno, l)) => {
            return Err(Error::schema(
                path,
                lineno,
                format!("expected header {expected_header:?}, got {l:?}"),
            ))
        }
        None => return Err(Error::schema(path, 1, "empty triplet file")),
    }

    let mut col_ids = Vec::new();
    let mut report_ids = Vec::new();
    let mut seen_cols = HashMap::new();
    let mut seen_reports = HashMap::new();
    let mut cells = HashMap::new();
    for (lineno, line) in lines {
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        let [rid, cid, value] = parts.as_slice() else {
            return Err(Error::schema(
                path,
                lineno,
                format!("expected 'report_id,{col_kind}_id,value'"),
            ));
        };
        validate_id(path, lineno, "report", rid)?;
        validate_id(path, lineno, col_kind, cid)?;
        let value = match *value {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::schema(
                    path,
                    lineno,
                    format!("value must be 0 or 1, got {other:?}"),
                ))
            }
        };
        if seen_reports.insert(rid.to_string(), ()).is_none() {
            report_ids.push(rid.to_string());
        }
        if seen_cols.insert(cid.to_string(), ()).is_none() {
            col_ids.push(cid.to_string());
        }
        if value {
            let key = (rid.to_string(), cid.to_string());
            if cells.insert(key, true).is_some() {
                return Err(Error::schema(
                    path,
                    lineno,
                    format!("cell ({rid:?}, {cid:?}) set more than once"),
                ));
            }
        }
    }
    Ok(TripletFile {
        col_ids,
        report_ids,
        cells,
    })
}

/// Triplet mode: `report_id,drug_id,value` rows in one file and
/// `report_id,event_id,value` rows in the other. The report universe is the
/// union of report ids across both files; reports, drugs, and events are
/// ordered by sorted id so the result does not depend on row order.
fn load_triplet(drugs_path: &Path, events_path: &Path) -> Result<(ReportMatrix, Vec<EventVector>)> {
    let drugs = load_triplet_file(drugs_path, "drug")?;
    let events = load_triplet_file(events_path, "event")?;

    let mut report_ids: Vec<String> = drugs
        .report_ids
        .iter()
        .chain(events.report_ids.iter())
        .cloned()
        .collect();
    report_ids.sort_unstable();
    report_ids.dedup();

    let mut drug_ids = drugs.col_ids;
    drug_ids.sort_unstable();
    let mut event_ids = events.col_ids;
    event_ids.sort_unstable();

    let report_pos: HashMap<&str, usize> = report_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let drug_index: HashMap<&str, u32> = drug_ids
        .iter()
        .enumerate()
        .map(|(j, id)| (id.as_str(), j as u32))
        .collect();
    let event_index: HashMap<&str, usize> = event_ids
        .iter()
        .enumerate()
        .map(|(j, id)| (id.as_str(), j))
        .collect();

    // Cell maps iterate in arbitrary order; rows are sorted by the matrix
    // constructor and event vectors are indexed writes, so the result is
    // order-independent.
    let mut rows: Vec<Vec<u32>> = vec![Vec::new(); report_ids.len()];
    for (rid, cid) in drugs.cells.keys() {
        rows[report_pos[rid.as_str()]].push(drug_index[cid.as_str()]);
    }
    let matrix = ReportMatrix::new(rows, drug_ids)?;

    let mut ys: Vec<Vec<u8>> = vec![vec![0u8; report_ids.len()]; event_ids.len()];
    for (rid, eid) in events.cells.keys() {
        ys[event_index[eid.as_str()]][report_pos[rid.as_str()]] = 1;
    }
    let event_vecs = event_ids
        .into_iter()
        .zip(ys)
        .map(|(eid, y)| EventVector::new(eid, y))
        .collect::<Result<Vec<_>>>()?;

    Ok((matrix, event_vecs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    const SMALL: &str = "\
#drugs: aspirin,ibuprofen
#events: nausea
r1,aspirin,nausea
r2,aspirin;ibuprofen,
r3,,nausea
r4,ibuprofen,
";

    #[test]
    fn loads_four_reports_two_drugs_one_event() {
        let f = write_temp(SMALL);
        let (x, events) = load_reports(ReportSource::Single(f.path())).unwrap();
        assert_eq!(x.n(), 4);
        assert_eq!(x.p(), 2);
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].event_id(), "nausea");
        assert_eq!(events[0].y(), &[1, 0, 1, 0]);
        assert_eq!(x.col(0), &[0, 1]); // aspirin in r1, r2
        assert_eq!(x.col(1), &[1, 3]); // ibuprofen in r2, r4
    }

    #[test]
    fn empty_report_section_yields_n_zero() {
        let f = write_temp("#drugs: a,b\n#events: e\n");
        let (x, events) = load_reports(ReportSource::Single(f.path())).unwrap();
        assert_eq!(x.n(), 0);
        assert_eq!(x.p(), 2);
        assert_eq!(events[0].len(), 0);
    }

    #[test]
    fn unknown_drug_is_a_schema_error_naming_it() {
        let f = write_temp("#drugs: a\n#events: e\nr1,X99,e\n");
        let err = load_reports(ReportSource::Single(f.path())).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("X99"), "error should name the drug: {msg}");
        assert!(msg.contains(":3:"), "error should carry the line: {msg}");
    }

    #[test]
    fn duplicate_report_id_rejected() {
        let f = write_temp("#drugs: a\n#events: e\nr1,a,\nr1,,e\n");
        let err = load_reports(ReportSource::Single(f.path())).unwrap_err();
        assert!(err.to_string().contains("duplicate report id"));
    }

    #[test]
    fn duplicate_drug_within_report_rejected() {
        let f = write_temp("#drugs: a\n#events: e\nr1,a;a,\n");
        let err = load_reports(ReportSource::Single(f.path())).unwrap_err();
        assert!(err.to_string().contains("listed twice"));
    }

    #[test]
    fn triplet_mode_matches_single_file() {
        let single = write_temp(SMALL);
        let (xs, es) = load_reports(ReportSource::Single(single.path())).unwrap();

        let d = write_temp(
            "report_id,drug_id,value\n\
             r1,aspirin,1\nr2,aspirin,1\nr2,ibuprofen,1\nr4,ibuprofen,1\nr3,aspirin,0\n",
        );
        let e = write_temp(
            "report_id,event_id,value\n\
             r1,nausea,1\nr3,nausea,1\nr2,nausea,0\nr4,nausea,0\n",
        );
        let (xt, et) = load_reports(ReportSource::Triplet {
            drugs: d.path(),
            events: e.path(),
        })
        .unwrap();

        // Triplet ordering is by sorted id; here r1..r4 and
        // aspirin<ibuprofen already agree with the single-file order.
        assert_eq!(xt.n(), xs.n());
        assert_eq!(xt.drug_ids(), xs.drug_ids());
        assert_eq!(xt.rows(), xs.rows());
        assert_eq!(et[0].y(), es[0].y());
    }

    #[test]
    fn triplet_duplicate_cell_rejected() {
        let d = write_temp("report_id,drug_id,value\nr1,a,1\nr1,a,1\n");
        let e = write_temp("report_id,event_id,value\nr1,x,1\n");
        let err = load_reports(ReportSource::Triplet {
            drugs: d.path(),
            events: e.path(),
        })
        .unwrap_err();
        assert!(err.to_string().contains("more than once"));
    }

    #[test]
    fn eligibility_four_cells() {
        let x = ReportMatrix::new(
            vec![vec![0], vec![], vec![], vec![0]],
            vec!["d0".into()],
        )
        .unwrap();
        let y = EventVector::new("e", vec![1, 0, 1, 0]).unwrap();
        let m = eligibility_mask(&x, &y);
        // Stratum y=1 holds x values {1,0}; stratum y=0 holds {0,1}.
        assert!(m.is_eligible(0));
        assert_eq!(m.p_eligible(), 1);
    }

    #[test]
    fn all_zero_column_is_ineligible() {
        let x = ReportMatrix::new(vec![vec![], vec![], vec![]], vec!["d0".into()]).unwrap();
        let y = EventVector::new("e", vec![1, 0, 1]).unwrap();
        assert!(!eligibility_mask(&x, &y).is_eligible(0));
    }

    #[test]
    fn constant_outcome_blanks_the_mask() {
        let x = ReportMatrix::new(vec![vec![0], vec![]], vec!["d0".into()]).unwrap();
        let y = EventVector::new("e", vec![1, 1]).unwrap();
        let m = eligibility_mask(&x, &y);
        assert_eq!(m.p_eligible(), 0);
    }

    #[test]
    fn compress_groups_duplicates() {
        // Rows restricted to drug 0: (1,y=1) x2, (0,y=0) x2.
        let x = ReportMatrix::new(
            vec![vec![0], vec![0], vec![], vec![]],
            vec!["d0".into()],
        )
        .unwrap();
        let y = EventVector::new("e", vec![1, 1, 0, 0]).unwrap();
        let gamma = ModelVector::from_indices(1, &[0]);
        let pt = compress_profiles(&x, &y, &gamma);
        assert_eq!(pt.m(), 2);
        assert_eq!(pt.weights(), &[2, 2]);
        assert_eq!(pt.n(), 4);
        assert_eq!(pt.outcomes(), &[1, 0]);
        assert_eq!(pt.x_bit(0, 0), 1);
        assert_eq!(pt.x_bit(1, 0), 0);
    }

    #[test]
    fn empty_model_compresses_to_class_counts() {
        let x = ReportMatrix::new(
            vec![vec![0], vec![0], vec![], vec![], vec![]],
            vec!["d0".into()],
        )
        .unwrap();
        let y = EventVector::new("e", vec![1, 0, 1, 0, 0]).unwrap();
        let pt = compress_profiles(&x, &y, &ModelVector::zeros(1));
        assert_eq!(pt.m(), 2);
        assert_eq!(pt.k(), 0);
        let mut by_outcome: Vec<(u8, u64)> = pt
            .outcomes()
            .iter()
            .copied()
            .zip(pt.weights().iter().copied())
            .collect();
        by_outcome.sort();
        assert_eq!(by_outcome, vec![(0, 3), (1, 2)]);
    }

    fn random_instance(rng: &mut StdRng, n: usize, p: usize) -> (ReportMatrix, EventVector) {
        let rows = (0..n)
            .map(|_| (0..p as u32).filter(|_| rng.random_bool(0.3)).collect())
            .collect();
        let ids = (0..p).map(|j| format!("d{j}")).collect();
        let x = ReportMatrix::new(rows, ids).unwrap();
        let y = EventVector::new(
            "e",
            (0..n).map(|_| rng.random_bool(0.4) as u8).collect(),
        )
        .unwrap();
        (x, y)
    }

    #[test]
    fn compression_invariants_on_random_instances() {
        let mut rng = StdRng::seed_from_u64(20260814);
        for _ in 0..30 {
            let n = rng.random_range(1..120);
            let p = rng.random_range(1..10);
            let (x, y) = random_instance(&mut rng, n, p);

            let sub: Vec<usize> = (0..p).filter(|_| rng.random_bool(0.5)).collect();
            let gamma = ModelVector::from_indices(p, &sub);
            let pt = compress_profiles(&x, &y, &gamma);

            // Weight conservation and the profile-count bound.
            assert_eq!(pt.weights().iter().sum::<u64>(), n as u64);
            let bound = (1u64 << (gamma.count_ones() + 1)).min(n as u64);
            assert!(pt.m() as u64 <= bound);

            // Round trip: decompression recovers the original multiset.
            let mut expanded = pt.decompress();
            let mut direct: Vec<(Vec<u8>, u8)> = (0..n)
                .map(|i| {
                    let xs = gamma
                        .iter_ones()
                        .map(|j| x.rows()[i].contains(&(j as u32)) as u8)
                        .collect();
                    (xs, y.y()[i])
                })
                .collect();
            expanded.sort();
            direct.sort();
            assert_eq!(expanded, direct);

            // Refinement: adding a drug cannot merge profiles.
            let mut bigger = gamma.clone();
            if let Some(extra) = (0..p).find(|&j| !bigger.get(j)) {
                bigger.set(extra, true);
                let pt2 = compress_profiles(&x, &y, &bigger);
                assert!(pt2.m() >= pt.m());
            }
        }
    }

    #[test]
    fn wide_models_group_like_narrow_logic() {
        // 70 drugs forces the multi-word key path; duplicates must still
        // collapse.
        let p = 70;
        let row: Vec<u32> = (0..p as u32).step_by(2).collect();
        let rows = vec![row.clone(), row.clone(), vec![], vec![]];
        let ids = (0..p).map(|j| format!("d{j}")).collect();
        let x = ReportMatrix::new(rows, ids).unwrap();
        let y = EventVector::new("e", vec![1, 1, 0, 1]).unwrap();
        let gamma = ModelVector::from_indices(p, &(0..p).collect::<Vec<_>>());
        let pt = compress_profiles(&x, &y, &gamma);
        assert_eq!(pt.m(), 3);
        assert_eq!(pt.weights().iter().sum::<u64>(), 4);
        assert_eq!(pt.x_bit(0, 0), 1);
        assert_eq!(pt.x_bit(0, 1), 0);
        assert_eq!(pt.x_bit(0, 68), 1);
    }

    #[test]
    fn restrict_columns_remaps_indices() {
        let x = ReportMatrix::new(
            vec![vec![0, 2], vec![1], vec![2]],
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        let r = x.restrict_columns(&[2, 0]);
        assert_eq!(r.p(), 2);
        assert_eq!(r.drug_ids(), &["c".to_string(), "a".to_string()]);
        assert_eq!(r.rows()[0], vec![0, 1]); // c and a both present
        assert_eq!(r.rows()[1], Vec::<u32>::new());
        assert_eq!(r.rows()[2], vec![0]);
    }
}
