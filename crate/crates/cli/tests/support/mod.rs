#![allow(dead_code)]

pub mod fixtures;
#[path = "../../../core/tests/support/oracles.rs"]
pub mod oracles;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn epiforge(data_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epiforge"))
        .arg("--data-dir")
        .arg(data_dir)
        .args(args)
        .output()
        .expect("run epiforge")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Runs `args` and panics with the captured streams unless it exits 0.
pub fn ok(data_dir: &Path, args: &[&str]) -> Output {
    let o = epiforge(data_dir, args);
    assert!(o.status.success(), "epiforge {args:?} failed:\n{}\n{}", stdout(&o), stderr(&o));
    o
}

/// A fresh data directory holding the ingested fixture set.
pub fn ingested() -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("store");
    let src = fixtures_dir().join("data");
    ok(&data, &["ingest", src.to_str().unwrap()]);
    (tmp, data)
}
