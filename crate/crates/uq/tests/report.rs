use std::collections::BTreeMap;

use proptest::prelude::*;
use uq::harness::{emit_report, load_results, to_csv, ReportFormat, ResultRecord};

fn record() -> impl Strategy<Value = ResultRecord> {
    (
        "[a-z0-9]{1,8}",
        proptest::option::of(".{0,20}"),
        proptest::collection::btree_map("[a-z_]{1,10}", 0.0..=1.0f64, 0..4),
        proptest::option::of(0.0..=1.0f64),
        proptest::option::of("[a-z ]{1,12}"),
    )
        .prop_map(|(id, response, scores, ensemble, error)| ResultRecord {
            id,
            response,
            scores,
            ensemble,
            verdicts: None,
            error,
        })
}

proptest! {
    #[test]
    fn jsonl_round_trips_exactly(records in proptest::collection::vec(record(), 1..6)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        emit_report(&records, ReportFormat::Jsonl, &path).unwrap();
        prop_assert_eq!(load_results(&path).unwrap(), records);
    }

    #[test]
    fn csv_has_one_row_per_record(records in proptest::collection::vec(record(), 1..6)) {
        let text = to_csv(&records).unwrap();
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader.headers().unwrap().clone();
        let rows: Vec<_> = reader.records().map(Result::unwrap).collect();
        prop_assert_eq!(rows.len(), records.len());
        prop_assert_eq!(&header[0], "id");
        prop_assert_eq!(&header[1], "response");
        for (row, rec) in rows.iter().zip(&records) {
            prop_assert_eq!(&row[0], rec.id.as_str());
            prop_assert_eq!(row.len(), header.len());
        }
        let has_ensemble = header.iter().any(|h| h == "ensemble");
        prop_assert_eq!(has_ensemble, records.iter().any(|r| r.ensemble.is_some()));
    }
}

#[test]
fn out_of_range_scores_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.jsonl");
    let bad = ResultRecord {
        id: "x".into(),
        response: Some("y".into()),
        scores: BTreeMap::from([("exact_match".to_string(), 1.5)]),
        ensemble: None,
        verdicts: None,
        error: None,
    };
    assert!(emit_report(&[bad], ReportFormat::Csv, &path).is_err());
    assert!(!path.exists());
    assert!(emit_report(&[], ReportFormat::Jsonl, &path).is_err());
}
