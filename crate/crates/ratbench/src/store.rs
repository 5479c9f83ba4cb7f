//! Append-only record store backed by a JSON Lines file.
//!
//! The file is the only state: indexes are rebuilt on load, so a dump and
//! reload reproduces every query result.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ratbench_core::{validate_record, MeasurementRecord, Technology, ValidationError};

use crate::query::FilterExpr;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("validation error: {0}")]
    Validation(#[from] ValidationError),
    #[error("line {line}: {source}")]
    AtLine { line: usize, source: Box<IngestError> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IngestError {
    /// The innermost error, without line context.
    pub fn root(&self) -> &IngestError {
        match self {
            IngestError::AtLine { source, .. } => source.root(),
            e => e,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct Ingested {
    pub record_id: String,
    /// False when the id was already stored.
    pub created: bool,
}

#[derive(Debug, Default)]
pub struct RecordStore {
    records: Vec<MeasurementRecord>,
    by_id: HashMap<String, usize>,
    by_tech: [Vec<usize>; 3],
    file: Option<(PathBuf, BufWriter<File>)>,
}

impl RecordStore {
    /// In-memory store without persistence.
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads `path` (created if missing) and appends new records to it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref().to_path_buf();
        let mut store = RecordStore::new();
        if path.exists() {
            let r = BufReader::new(File::open(&path)?);
            for (i, line) in r.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                store.ingest_line(&line).map_err(|e| IngestError::AtLine { line: i + 1, source: Box::new(e) })?;
            }
        }
        let f = OpenOptions::new().create(true).append(true).open(&path)?;
        store.file = Some((path, BufWriter::new(f)));
        Ok(store)
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[MeasurementRecord] {
        &self.records
    }

    pub fn get(&self, record_id: &str) -> Option<&MeasurementRecord> {
        self.by_id.get(record_id).map(|&i| &self.records[i])
    }

    pub fn ingest_line(&mut self, line: &str) -> Result<Ingested, IngestError> {
        let record: MeasurementRecord = serde_json::from_str(line)?;
        self.ingest(record)
    }

    /// Validates and appends; a known `record_id` returns the stored id
    /// without appending.
    pub fn ingest(&mut self, record: MeasurementRecord) -> Result<Ingested, IngestError> {
        validate_record(&record)?;
        if self.by_id.contains_key(&record.record_id) {
            return Ok(Ingested { record_id: record.record_id, created: false });
        }
        if let Some((_, w)) = &mut self.file {
            serde_json::to_writer(&mut *w, &record)?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        let i = self.records.len();
        self.by_id.insert(record.record_id.clone(), i);
        self.by_tech[record.technology.index()].push(i);
        let record_id = record.record_id.clone();
        self.records.push(record);
        Ok(Ingested { record_id, created: true })
    }

    /// Parses and validates a JSON Lines batch first, then appends it, so a
    /// bad line leaves the store untouched.
    pub fn ingest_batch(&mut self, text: &str) -> Result<Vec<Ingested>, IngestError> {
        let mut parsed = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let at = |e: IngestError| IngestError::AtLine { line: i + 1, source: Box::new(e) };
            let r: MeasurementRecord = serde_json::from_str(line).map_err(|e| at(e.into()))?;
            validate_record(&r).map_err(|e| at(e.into()))?;
            parsed.push(r);
        }
        parsed.into_iter().map(|r| self.ingest(r)).collect()
    }

    /// Records matching `filter`, in insertion order.
    pub fn query<'a>(&'a self, filter: &'a FilterExpr) -> impl Iterator<Item = &'a MeasurementRecord> + 'a {
        let idx: Box<dyn Iterator<Item = usize> + 'a> = match filter.technology {
            Some(t) => Box::new(self.by_tech[t.index()].iter().copied()),
            None => Box::new(0..self.records.len()),
        };
        idx.map(|i| &self.records[i]).filter(|r| filter.matches(r))
    }

    pub fn count_by_technology(&self, tech: Technology) -> usize {
        self.by_tech[tech.index()].len()
    }

    /// Writes every record as JSON Lines, in insertion order.
    pub fn dump(&self, w: impl Write) -> std::io::Result<()> {
        crate::io::write_jsonl(w, &self.records)
    }
}
