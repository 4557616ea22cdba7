//! The committed toy oracles: shape checks and drift detection.

use std::path::{Path, PathBuf};

use gridsched::fixtures::{check_enumeration_shape, check_oracles, oracle_contents, FIXTURE_FILES};
use gridsched::Error;

fn toy5_dir() -> PathBuf {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/toy5")).to_path_buf()
}

#[test]
fn enumeration_lists_all_nine_schedules() {
    assert_eq!(check_enumeration_shape(&toy5_dir()).unwrap(), 9);
}

#[test]
fn committed_oracles_match_and_tampering_is_detected() {
    let files = oracle_contents("toy5").unwrap();
    check_oracles(&toy5_dir(), &files).unwrap();

    let tmp = tempfile::tempdir().unwrap();
    for name in FIXTURE_FILES {
        std::fs::copy(toy5_dir().join(name), tmp.path().join(name)).unwrap();
    }
    let path = tmp.path().join("enumeration.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let row = text.lines().nth(2).unwrap();
    let cost = row.split(',').nth(2).unwrap();
    std::fs::write(&path, text.replacen(cost, "1.000000", 1)).unwrap();
    match check_oracles(tmp.path(), &files) {
        Err(Error::OracleDrift { file, diffs }) => {
            assert!(file.ends_with("enumeration.csv"));
            assert_eq!(diffs.len(), 1);
            assert!(diffs[0].starts_with("line 3:"), "{}", diffs[0]);
        }
        other => panic!("expected drift, got {other:?}"),
    }
}

#[test]
fn unknown_fixture_is_rejected() {
    assert!(matches!(oracle_contents("rts79"), Err(Error::Validation { .. })));
}
