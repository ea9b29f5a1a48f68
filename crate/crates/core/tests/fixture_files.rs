//! The shipped task files are the canonical serialisation of the built-in
//! fixtures. `UPDATE_FIXTURES=1` rewrites them.

use std::path::PathBuf;

use summoning::fixtures;
use summoning::task::{parse_task, serialize_task, ParseErrorCode};

fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[test]
fn files_match_fixtures() {
    let update = std::env::var_os("UPDATE_FIXTURES").is_some();
    for (name, task) in fixtures::all() {
        let path = dir().join(format!("{name}.json"));
        let want = serialize_task(&task);
        if update {
            std::fs::write(&path, &want).unwrap();
        }
        let got = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(got, want, "{name}");
        assert_eq!(parse_task(&got).unwrap(), task, "{name}");
    }
}

#[test]
fn malformed_file_is_rejected() {
    let text = std::fs::read_to_string(dir().join("malformed.json")).unwrap();
    let err = parse_task(&text).unwrap_err();
    assert_eq!(err.code, ParseErrorCode::Syntax);
    assert!(err.line > 0);
}
