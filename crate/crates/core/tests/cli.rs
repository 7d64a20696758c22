use std::path::Path;
use std::process::{Command, Output};

fn densefree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_densefree")).args(args).output().unwrap()
}

fn gen(dir: &Path, name: &str, args: &[&str]) -> String {
    let path = dir.join(name);
    let path = path.to_str().unwrap().to_string();
    let mut full = vec!["gen"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", &path]);
    let out = densefree(&full);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn every_generator_round_trips_through_verify() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [(&str, &[&str]); 4] = [
        ("tree.json", &["tree", "--stages", "3", "--words-per-stage", "300"]),
        ("dlo.json", &["tree", "--kind", "dlo", "--stages", "3", "--words-per-stage", "300"]),
        ("stable.json", &["stable", "--seed", "3"]),
        ("dense.json", &["dense", "--seed", "3"]),
    ];
    for (name, args) in runs {
        let path = gen(dir.path(), name, args);
        let out = densefree(&["verify", &path]);
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert_eq!(out.status.code(), Some(0), "{name}: {stdout}");
        assert_eq!(stdout.lines().last(), Some("verified"), "{name}");
    }
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["tree", "--kind", "eqrel", "--stages", "3", "--words-per-stage", "200", "--seed", "11"];
    let a = std::fs::read(gen(dir.path(), "a.json", &args)).unwrap();
    let b = std::fs::read(gen(dir.path(), "b.json", &args)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn json_report_parses() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(dir.path(), "s.json", &["stable"]);
    let out = densefree(&["verify", &path, "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["freeness"]["witnessed"].as_u64().unwrap() > 0);
}

#[test]
fn bad_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("junk.json");
    std::fs::write(&path, "{ not json").unwrap();
    assert_eq!(densefree(&["verify", path.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(densefree(&["verify", "/nonexistent/file.json"]).status.code(), Some(2));
    assert_eq!(densefree(&["gen", "stable", "--kind", "graph"]).status.code(), Some(2));
}

#[test]
fn words_enumerate_counts() {
    let out = densefree(&["words", "enumerate", "--rank", "2", "--max-word-len", "2"]);
    assert!(out.status.success());
    // 4 words of length 1 and 12 of length 2
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 16);
}
