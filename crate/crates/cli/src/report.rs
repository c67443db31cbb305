//! JSON reports, the summary CSV and the writer that serializes both.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Too few premise samples to decide; never fails a run.
    Vacuous,
    /// A measurement without a pass/fail criterion.
    Info,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Vacuous => "VACUOUS",
            Verdict::Info => "INFO",
        }
    }
}

/// Non-finite numbers become "inf", "-inf" or "nan".
pub fn ext(v: f64) -> Value {
    semireg::ser::ext::serialize(&v, serde_json::value::Serializer).expect("f64 always serializes")
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub check: String,
    pub inputs: Value,
    pub seed: u64,
    pub verdict: Verdict,
    pub values: BTreeMap<String, Value>,
    pub brackets: BTreeMap<String, [Value; 2]>,
    pub witnesses: Vec<Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// The full report of the underlying check.
    pub details: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<u64>,
    pub schema_version: u32,
}

impl Report {
    pub fn new(check: impl Into<String>, inputs: Value, seed: u64, verdict: Verdict) -> Self {
        Report {
            check: check.into(),
            inputs,
            seed,
            verdict,
            values: BTreeMap::new(),
            brackets: BTreeMap::new(),
            witnesses: Vec::new(),
            notes: Vec::new(),
            details: Value::Null,
            runtime_ms: None,
            schema_version: SCHEMA_VERSION,
        }
    }

    pub fn value(mut self, key: &str, v: f64) -> Self {
        self.values.insert(key.to_string(), ext(v));
        self
    }

    pub fn bracket(mut self, key: &str, (lo, hi): (f64, f64)) -> Self {
        self.brackets.insert(key.to_string(), [ext(lo), ext(hi)]);
        self
    }

    pub fn details(mut self, d: impl Serialize) -> Self {
        self.details = serde_json::to_value(d).unwrap_or(Value::Null);
        self
    }

    pub fn witnesses<T: Serialize>(mut self, ws: impl IntoIterator<Item = T>) -> Self {
        self.witnesses.extend(ws.into_iter().filter_map(|w| serde_json::to_value(w).ok()));
        self
    }

    pub fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }

    /// One console line: verdict, check name and up to four values.
    pub fn line(&self) -> String {
        let shown: Vec<String> = self.values.iter().take(4).map(|(k, v)| format!("{k}={}", short(v))).collect();
        format!("{:<7} {} {}", self.verdict.label(), self.check, shown.join(" "))
    }
}

fn short(v: &Value) -> String {
    match v.as_f64() {
        Some(x) if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e6) => format!("{x:.3e}"),
        Some(x) => format!("{x:.4}"),
        None => v.as_str().map_or_else(|| v.to_string(), str::to_string),
    }
}

/// A file that accompanies a report, such as an iteration CSV.
#[derive(Debug, Clone)]
pub struct Attachment {
    pub name: String,
    pub contents: String,
}

struct Row {
    check: String,
    verdict: Verdict,
    seed: u64,
    file: String,
}

/// Writes reports into one directory. All writes go through one lock, so
/// concurrent suite entries never interleave files or summary rows.
pub struct Writer {
    dir: PathBuf,
    quiet: bool,
    rows: Mutex<Vec<Row>>,
}

impl Writer {
    pub fn new(dir: &Path, quiet: bool) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Writer { dir: dir.to_path_buf(), quiet, rows: Mutex::new(Vec::new()) })
    }

    pub fn write(&self, report: &Report, attachments: &[Attachment]) -> std::io::Result<()> {
        let mut rows = self.rows.lock().expect("writer lock poisoned");
        let file = format!("{}.json", report.check);
        let mut text = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
        text.push('\n');
        std::fs::write(self.dir.join(&file), text)?;
        for a in attachments {
            std::fs::write(self.dir.join(&a.name), &a.contents)?;
        }
        if !self.quiet {
            // A closed pipe (e.g. `| head`) must not abort the run.
            let _ = writeln!(std::io::stdout(), "{}", report.line());
        }
        rows.push(Row { check: report.check.clone(), verdict: report.verdict, seed: report.seed, file });
        Ok(())
    }

    /// Writes summary.csv sorted by check name; returns (total, failed).
    pub fn finish(self) -> std::io::Result<(usize, usize)> {
        let mut rows = self.rows.into_inner().expect("writer lock poisoned");
        rows.sort_by(|a, b| a.check.cmp(&b.check));
        let mut csv = String::from("check,verdict,seed,file\n");
        for r in &rows {
            csv.push_str(&format!("{},{},{},{}\n", r.check, r.verdict.label().to_lowercase(), r.seed, r.file));
        }
        std::fs::write(self.dir.join("summary.csv"), csv)?;
        Ok((rows.len(), rows.iter().filter(|r| r.verdict == Verdict::Fail).count()))
    }
}
