mod common;

use common::{line, record};
use proptest::prelude::*;
use ratbench::{IngestError, RecordStore};
use ratbench_core::{Technology, ValidationError};

#[test]
fn valid_line_is_appended_once() {
    let mut s = RecordStore::new();
    let l = line(&record("a", Technology::LoRaWAN, 10, true));
    let first = s.ingest_line(&l).unwrap();
    assert!(first.created);
    assert_eq!(first.record_id, "a");
    assert_eq!(s.len(), 1);
    let again = s.ingest_line(&l).unwrap();
    assert_eq!(again.record_id, "a");
    assert!(!again.created);
    assert_eq!(s.len(), 1);
}

#[test]
fn duplicate_id_keeps_the_first_record() {
    let mut s = RecordStore::new();
    s.ingest(record("a", Technology::LoRaWAN, 10, true)).unwrap();
    s.ingest(record("a", Technology::NBIoT, 500, false)).unwrap();
    assert_eq!(s.get("a").unwrap().technology, Technology::LoRaWAN);
}

#[test]
fn oversized_sigfox_payload_is_rejected() {
    let mut s = RecordStore::new();
    let err = s.ingest_line(&line(&record("x", Technology::Sigfox, 13, true))).unwrap_err();
    assert!(matches!(err, IngestError::Validation(ValidationError::PayloadExceedsMax(Technology::Sigfox, 13))));
    assert!(s.is_empty());
}

#[test]
fn malformed_line_is_a_parse_error() {
    let mut s = RecordStore::new();
    assert!(matches!(s.ingest_line("{not json"), Err(IngestError::Parse(_))));
    assert!(matches!(s.ingest_line(r#"{"record_id": "a"}"#), Err(IngestError::Parse(_))));
}

#[test]
fn bad_batch_line_leaves_the_store_untouched() {
    let mut s = RecordStore::new();
    let batch = [
        line(&record("a", Technology::LoRaWAN, 10, true)),
        String::new(),
        line(&record("b", Technology::Sigfox, 20, true)),
    ]
    .join("\n");
    let err = s.ingest_batch(&batch).unwrap_err();
    assert!(matches!(err, IngestError::AtLine { line: 3, .. }), "{err}");
    assert!(matches!(err.root(), IngestError::Validation(_)));
    assert!(s.is_empty());
}

#[test]
fn file_store_survives_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.jsonl");
    {
        let mut s = RecordStore::open(&path).unwrap();
        s.ingest(record("a", Technology::LoRaWAN, 10, true)).unwrap();
        s.ingest(record("b", Technology::NBIoT, 400, false)).unwrap();
    }
    let mut s = RecordStore::open(&path).unwrap();
    assert_eq!(s.len(), 2);
    assert!(!s.ingest(record("a", Technology::LoRaWAN, 10, true)).unwrap().created);
    s.ingest(record("c", Technology::Sigfox, 12, true)).unwrap();
    drop(s);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 3);
    let s = RecordStore::open(&path).unwrap();
    let ids: Vec<&str> = s.records().iter().map(|r| r.record_id.as_str()).collect();
    assert_eq!(ids, ["a", "b", "c"]);
}

#[test]
fn corrupt_file_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("records.jsonl");
    std::fs::write(&path, format!("{}\ngarbage\n", line(&record("a", Technology::LoRaWAN, 10, true)))).unwrap();
    assert!(matches!(RecordStore::open(&path), Err(IngestError::AtLine { line: 2, .. })));
}

proptest! {
    /// Redelivering records in any order never grows the store past the
    /// number of distinct ids, and ids keep first-arrival order.
    #[test]
    fn at_least_once_delivery_is_idempotent(deliveries in prop::collection::vec(0usize..20, 1..120)) {
        let mut s = RecordStore::new();
        let mut first_seen: Vec<usize> = Vec::new();
        for &i in &deliveries {
            let r = record(&format!("r{i}"), Technology::ALL[i % 3], 1 + i as u32 % 12, i % 2 == 0);
            let out = s.ingest(r).unwrap();
            prop_assert_eq!(out.created, !first_seen.contains(&i));
            if out.created {
                first_seen.push(i);
            }
        }
        prop_assert_eq!(s.len(), first_seen.len());
        let ids: Vec<String> = first_seen.iter().map(|i| format!("r{i}")).collect();
        let stored: Vec<String> = s.records().iter().map(|r| r.record_id.clone()).collect();
        prop_assert_eq!(stored, ids);
    }
}
