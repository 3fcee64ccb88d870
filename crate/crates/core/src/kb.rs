//! Append-only knowledge base with CSV interchange.
//!
//! Records are kept in memory and, when the store is opened on a path, also
//! appended to a single CSV-format log file (the same schema used by
//! export/import). Float fields are quantized to 9 significant digits on
//! append so that export → import → export reproduces files byte for byte.
//!
//! Schema (exact header, UTF-8, LF line endings, empty string for fields the
//! record kind does not use):
//!
//! ```text
//! record_id,session_id,timestamp_s,record_kind,anomaly_category,severity_ms,adaptation,ct,impact_i,rat_s,cost_per_hr,risk_rf,outcome_latency_ms
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::monitor::AnomalyCategory;

pub const CSV_HEADER: &str = "record_id,session_id,timestamp_s,record_kind,anomaly_category,severity_ms,adaptation,ct,impact_i,rat_s,cost_per_hr,risk_rf,outcome_latency_ms";

/// Smoothing factor for repeated impact feedback (newest weighted by alpha).
pub const DEFAULT_EMA_ALPHA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    AnomalyDetected,
    DecisionMade,
    AdaptationEnacted,
    FeedbackMeasured,
}

impl RecordKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RecordKind::AnomalyDetected => "AnomalyDetected",
            RecordKind::DecisionMade => "DecisionMade",
            RecordKind::AdaptationEnacted => "AdaptationEnacted",
            RecordKind::FeedbackMeasured => "FeedbackMeasured",
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecordKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "AnomalyDetected" => Ok(RecordKind::AnomalyDetected),
            "DecisionMade" => Ok(RecordKind::DecisionMade),
            "AdaptationEnacted" => Ok(RecordKind::AdaptationEnacted),
            "FeedbackMeasured" => Ok(RecordKind::FeedbackMeasured),
            other => Err(Error::InvalidRecord(format!("unknown record kind {other:?}"))),
        }
    }
}

/// One knowledge-base row. Which optional fields must be present depends on
/// the record kind; see [`KbRecord::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct KbRecord {
    /// Assigned by the store on append (0 until then).
    pub record_id: u64,
    pub session_id: String,
    pub timestamp_s: f64,
    pub kind: RecordKind,
    pub anomaly_category: Option<AnomalyCategory>,
    pub severity_ms: Option<f64>,
    pub adaptation: Option<String>,
    pub ct: Option<u64>,
    pub impact_i: Option<f64>,
    pub rat_s: Option<f64>,
    pub cost_per_hr: Option<f64>,
    pub risk_rf: Option<f64>,
    pub outcome_latency_ms: Option<f64>,
}

impl KbRecord {
    fn base(session_id: &str, timestamp_s: f64, kind: RecordKind) -> Self {
        KbRecord {
            record_id: 0,
            session_id: session_id.to_string(),
            timestamp_s,
            kind,
            anomaly_category: None,
            severity_ms: None,
            adaptation: None,
            ct: None,
            impact_i: None,
            rat_s: None,
            cost_per_hr: None,
            risk_rf: None,
            outcome_latency_ms: None,
        }
    }

    pub fn anomaly_detected(
        session_id: &str,
        timestamp_s: f64,
        category: AnomalyCategory,
        severity_ms: f64,
    ) -> Self {
        KbRecord {
            anomaly_category: Some(category),
            severity_ms: Some(severity_ms),
            ..Self::base(session_id, timestamp_s, RecordKind::AnomalyDetected)
        }
    }

    pub fn decision_made(
        session_id: &str,
        timestamp_s: f64,
        category: AnomalyCategory,
        adaptation: &str,
        ct: u64,
    ) -> Self {
        KbRecord {
            anomaly_category: Some(category),
            adaptation: Some(adaptation.to_string()),
            ct: Some(ct),
            ..Self::base(session_id, timestamp_s, RecordKind::DecisionMade)
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn adaptation_enacted(
        session_id: &str,
        timestamp_s: f64,
        category: AnomalyCategory,
        adaptation: &str,
        rat_s: f64,
        cost_per_hr: f64,
        risk_rf: Option<f64>,
        outcome_latency_ms: Option<f64>,
    ) -> Self {
        KbRecord {
            anomaly_category: Some(category),
            adaptation: Some(adaptation.to_string()),
            rat_s: Some(rat_s),
            cost_per_hr: Some(cost_per_hr),
            risk_rf,
            outcome_latency_ms,
            ..Self::base(session_id, timestamp_s, RecordKind::AdaptationEnacted)
        }
    }

    pub fn feedback_measured(
        session_id: &str,
        timestamp_s: f64,
        category: AnomalyCategory,
        adaptation: &str,
        impact_i: f64,
        outcome_latency_ms: Option<f64>,
    ) -> Self {
        KbRecord {
            anomaly_category: Some(category),
            adaptation: Some(adaptation.to_string()),
            impact_i: Some(impact_i),
            outcome_latency_ms,
            ..Self::base(session_id, timestamp_s, RecordKind::FeedbackMeasured)
        }
    }

    /// Field presence and range rules for this record's kind.
    pub fn validate(&self) -> Result<()> {
        check_text("session_id", &self.session_id)?;
        if self.session_id.is_empty() {
            return Err(Error::InvalidRecord("session_id must not be empty".into()));
        }
        if !self.timestamp_s.is_finite() || self.timestamp_s < 0.0 {
            return Err(Error::InvalidRecord("timestamp_s must be finite and >= 0".into()));
        }
        if let Some(a) = &self.adaptation {
            check_text("adaptation", a)?;
        }
        check_range("severity_ms", self.severity_ms, 0.0, f64::INFINITY)?;
        check_range("impact_i", self.impact_i, 0.0, 1.0)?;
        check_range("rat_s", self.rat_s, 0.0, f64::INFINITY)?;
        check_range("cost_per_hr", self.cost_per_hr, 0.0, f64::INFINITY)?;
        check_range("risk_rf", self.risk_rf, 0.0, 1.0)?;
        check_range("outcome_latency_ms", self.outcome_latency_ms, 0.0, f64::INFINITY)?;

        // required, forbidden (everything else optional)
        let (required, forbidden): (&[&str], &[&str]) = match self.kind {
            RecordKind::AnomalyDetected => (
                &["anomaly_category", "severity_ms"],
                &["adaptation", "ct", "impact_i", "rat_s", "cost_per_hr", "risk_rf"],
            ),
            RecordKind::DecisionMade => (
                &["anomaly_category", "adaptation", "ct"],
                &["severity_ms", "rat_s", "cost_per_hr", "outcome_latency_ms"],
            ),
            RecordKind::AdaptationEnacted => (
                &["anomaly_category", "adaptation", "rat_s", "cost_per_hr"],
                &["severity_ms", "ct", "impact_i"],
            ),
            RecordKind::FeedbackMeasured => (
                &["anomaly_category", "adaptation", "impact_i"],
                &["severity_ms", "ct", "rat_s", "cost_per_hr", "risk_rf"],
            ),
        };
        for field in required {
            if !self.has_field(field) {
                return Err(Error::InvalidRecord(format!(
                    "{} record requires field {field}",
                    self.kind
                )));
            }
        }
        for field in forbidden {
            if self.has_field(field) {
                return Err(Error::InvalidRecord(format!(
                    "{} record must leave field {field} empty",
                    self.kind
                )));
            }
        }
        Ok(())
    }

    fn has_field(&self, name: &str) -> bool {
        match name {
            "anomaly_category" => self.anomaly_category.is_some(),
            "severity_ms" => self.severity_ms.is_some(),
            "adaptation" => self.adaptation.is_some(),
            "ct" => self.ct.is_some(),
            "impact_i" => self.impact_i.is_some(),
            "rat_s" => self.rat_s.is_some(),
            "cost_per_hr" => self.cost_per_hr.is_some(),
            "risk_rf" => self.risk_rf.is_some(),
            "outcome_latency_ms" => self.outcome_latency_ms.is_some(),
            other => unreachable!("unknown field name {other}"),
        }
    }

    fn quantize_floats(&mut self) {
        self.timestamp_s = quantize_sig9(self.timestamp_s);
        for f in [
            &mut self.severity_ms,
            &mut self.impact_i,
            &mut self.rat_s,
            &mut self.cost_per_hr,
            &mut self.risk_rf,
            &mut self.outcome_latency_ms,
        ]
        .into_iter()
        .flatten()
        {
            *f = quantize_sig9(*f);
        }
    }

    fn to_csv_row(&self) -> String {
        let cat = self.anomaly_category.map(|c| c.as_str().to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.record_id,
            self.session_id,
            fmt_f64(self.timestamp_s),
            self.kind,
            cat,
            fmt_opt_f64(self.severity_ms),
            self.adaptation.as_deref().unwrap_or(""),
            self.ct.map(|c| c.to_string()).unwrap_or_default(),
            fmt_opt_f64(self.impact_i),
            fmt_opt_f64(self.rat_s),
            fmt_opt_f64(self.cost_per_hr),
            fmt_opt_f64(self.risk_rf),
            fmt_opt_f64(self.outcome_latency_ms),
        )
    }

    fn from_csv_row(line: &str, line_no: usize) -> Result<Self> {
        let parse = |msg: String| Error::Parse { line: line_no, message: msg };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 13 {
            return Err(parse(format!("expected 13 fields, found {}", fields.len())));
        }
        let record_id: u64 = fields[0]
            .parse()
            .map_err(|_| parse(format!("bad record_id {:?}", fields[0])))?;
        let timestamp_s: f64 = fields[2]
            .parse()
            .map_err(|_| parse(format!("bad timestamp_s {:?}", fields[2])))?;
        let kind: RecordKind = fields[3]
            .parse()
            .map_err(|_| parse(format!("bad record_kind {:?}", fields[3])))?;
        let anomaly_category = if fields[4].is_empty() {
            None
        } else {
            Some(
                fields[4]
                    .parse()
                    .map_err(|_| parse(format!("bad anomaly_category {:?}", fields[4])))?,
            )
        };
        let opt_f64 = |idx: usize, name: &str| -> Result<Option<f64>> {
            if fields[idx].is_empty() {
                Ok(None)
            } else {
                fields[idx]
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| parse(format!("bad {name} {:?}", fields[idx])))
            }
        };
        let ct = if fields[7].is_empty() {
            None
        } else {
            Some(fields[7].parse::<u64>().map_err(|_| parse(format!("bad ct {:?}", fields[7])))?)
        };
        let record = KbRecord {
            record_id,
            session_id: fields[1].to_string(),
            timestamp_s,
            kind,
            anomaly_category,
            severity_ms: opt_f64(5, "severity_ms")?,
            adaptation: if fields[6].is_empty() { None } else { Some(fields[6].to_string()) },
            ct,
            impact_i: opt_f64(8, "impact_i")?,
            rat_s: opt_f64(9, "rat_s")?,
            cost_per_hr: opt_f64(10, "cost_per_hr")?,
            risk_rf: opt_f64(11, "risk_rf")?,
            outcome_latency_ms: opt_f64(12, "outcome_latency_ms")?,
        };
        record.validate().map_err(|e| parse(e.to_string()))?;
        Ok(record)
    }
}

fn check_text(field: &str, value: &str) -> Result<()> {
    if value.contains([',', '"', '\n', '\r']) {
        return Err(Error::InvalidRecord(format!(
            "{field} must not contain commas, quotes, or line breaks"
        )));
    }
    Ok(())
}

fn check_range(field: &str, value: Option<f64>, lo: f64, hi: f64) -> Result<()> {
    if let Some(v) = value {
        if !v.is_finite() || v < lo || v > hi {
            return Err(Error::InvalidRecord(format!(
                "{field} = {v} outside [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

/// Rounds to 9 significant decimal digits. Idempotent, so values written out
/// with shortest-round-trip formatting re-parse to the identical bits.
pub fn quantize_sig9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().expect("scientific notation re-parses")
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn fmt_opt_f64(x: Option<f64>) -> String {
    x.map(|v| format!("{v}")).unwrap_or_default()
}

/// Per-adaptation usage count and smoothed impact aggregated from the log.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationHistory {
    pub adaptation: String,
    /// Number of times the adaptation was chosen for this anomaly category.
    pub uses: u64,
    /// EMA of measured impacts, `None` until feedback exists.
    pub impact: Option<f64>,
}

/// Append-only store of session records with an optional file backing.
///
/// Single writer, multiple readers: mutate through `&mut self`, snapshot via
/// `records()`.
#[derive(Debug)]
pub struct KnowledgeBase {
    records: Vec<KbRecord>,
    file: Option<File>,
    path: Option<PathBuf>,
    /// Last timestamp seen per session, for the monotonicity invariant.
    last_timestamp: BTreeMap<String, f64>,
    ema_alpha: f64,
}

impl KnowledgeBase {
    /// Purely in-memory store.
    pub fn in_memory() -> Self {
        KnowledgeBase {
            records: Vec::new(),
            file: None,
            path: None,
            last_timestamp: BTreeMap::new(),
            ema_alpha: DEFAULT_EMA_ALPHA,
        }
    }

    /// Opens (or creates) a file-backed store at `path`. An existing file is
    /// loaded and appends continue its id sequence.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut kb = KnowledgeBase::in_memory();
        if path.exists() && path.metadata()?.len() > 0 {
            kb.load_csv(path)?;
        } else {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            let mut file = File::create(path)?;
            writeln!(file, "{CSV_HEADER}")?;
            file.flush()?;
        }
        kb.file = Some(OpenOptions::new().append(true).open(path)?);
        kb.path = Some(path.to_path_buf());
        Ok(kb)
    }

    pub fn with_ema_alpha(mut self, alpha: f64) -> Self {
        self.ema_alpha = alpha;
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[KbRecord] {
        &self.records
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Validates, assigns the next id, persists, and stores the record.
    pub fn append(&mut self, mut record: KbRecord) -> Result<u64> {
        record.validate()?;
        // Quantize before the monotonicity check: the store keeps time at
        // 9 significant digits, so ordering is defined at that precision.
        record.quantize_floats();
        if let Some(&last) = self.last_timestamp.get(&record.session_id) {
            if record.timestamp_s < last {
                return Err(Error::InvalidRecord(format!(
                    "timestamp {} precedes session {}'s last timestamp {}",
                    record.timestamp_s, record.session_id, last
                )));
            }
        }
        record.record_id = self.records.len() as u64 + 1;
        if let Some(file) = &mut self.file {
            writeln!(file, "{}", record.to_csv_row())?;
            file.flush()?;
        }
        self.last_timestamp.insert(record.session_id.clone(), record.timestamp_s);
        let id = record.record_id;
        self.records.push(record);
        Ok(id)
    }

    /// Aggregates decision and feedback records for one anomaly category into
    /// per-adaptation (uses, smoothed impact) pairs, sorted by adaptation name.
    pub fn history(&self, category: AnomalyCategory) -> Vec<AdaptationHistory> {
        let mut by_name: BTreeMap<&str, (u64, Option<f64>)> = BTreeMap::new();
        for record in &self.records {
            if record.anomaly_category != Some(category) {
                continue;
            }
            let Some(name) = record.adaptation.as_deref() else { continue };
            match record.kind {
                RecordKind::DecisionMade => {
                    by_name.entry(name).or_default().0 += 1;
                }
                RecordKind::FeedbackMeasured => {
                    let entry = by_name.entry(name).or_default();
                    let latest = record.impact_i.expect("validated on append");
                    entry.1 = Some(match entry.1 {
                        None => latest,
                        Some(prev) => self.ema_alpha * latest + (1.0 - self.ema_alpha) * prev,
                    });
                }
                _ => {}
            }
        }
        by_name
            .into_iter()
            .map(|(name, (uses, impact))| AdaptationHistory {
                adaptation: name.to_string(),
                uses,
                impact,
            })
            .collect()
    }

    /// Current usage count for one (category, adaptation) pair.
    pub fn usage_count(&self, category: AnomalyCategory, adaptation: &str) -> u64 {
        self.records
            .iter()
            .filter(|r| {
                r.kind == RecordKind::DecisionMade
                    && r.anomaly_category == Some(category)
                    && r.adaptation.as_deref() == Some(adaptation)
            })
            .count() as u64
    }

    /// True if any record references the adaptation name.
    pub fn knows_adaptation(&self, adaptation: &str) -> bool {
        self.records.iter().any(|r| r.adaptation.as_deref() == Some(adaptation))
    }

    /// Writes all records to `path`; returns how many were written.
    pub fn export_csv(&self, path: impl AsRef<Path>) -> Result<usize> {
        let path = path.as_ref();
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let mut out = String::with_capacity(64 * (self.records.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for record in &self.records {
            out.push_str(&record.to_csv_row());
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(self.records.len())
    }

    /// Loads records from a CSV file into this (empty) store; returns the
    /// record count. Malformed rows fail with their line number.
    pub fn import_csv(&mut self, path: impl AsRef<Path>) -> Result<usize> {
        if !self.records.is_empty() {
            return Err(Error::InvalidRecord(
                "import requires an empty store (ids would clash)".into(),
            ));
        }
        let count = self.load_csv(path.as_ref())?;
        // Re-sync the backing file, if any, with the imported contents.
        if let Some(path) = self.path.clone() {
            self.file = None;
            self.export_csv(&path)?;
            self.file = Some(OpenOptions::new().append(true).open(&path)?);
        }
        Ok(count)
    }

    fn load_csv(&mut self, path: &Path) -> Result<usize> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::Parse { line: 1, message: "empty file, expected header".into() })?;
        if header != CSV_HEADER {
            return Err(Error::Parse { line: 1, message: format!("unexpected header {header:?}") });
        }
        let mut count = 0usize;
        for (idx, line) in lines.enumerate() {
            let line_no = idx + 2;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let record = KbRecord::from_csv_row(&line, line_no)?;
            let expected_id = self.records.len() as u64 + 1;
            if record.record_id != expected_id {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("record_id {} out of sequence, expected {expected_id}", record.record_id),
                });
            }
            if let Some(&last) = self.last_timestamp.get(&record.session_id) {
                if record.timestamp_s < last {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "timestamps regress within a session".into(),
                    });
                }
            }
            self.last_timestamp.insert(record.session_id.clone(), record.timestamp_s);
            self.records.push(record);
            count += 1;
        }
        Ok(count)
    }
}
