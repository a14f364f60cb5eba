use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use sigma_cli::{parse_document, print_document, EXIT_INPUT, EXIT_OK, EXIT_UNDECIDED, SCHEMA_VERSION};

fn input(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("inputs").join(format!("{name}.sigma"))
}

fn sigma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sigma")).args(args).output().unwrap()
}

fn sigma_stdin(args: &[&str], text: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_sigma"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(text.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn torsor_of_one_is_solved() {
    let out = sigma(&["solve-sas", input("torsor_one").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let r = report(&out);
    assert_eq!(r["schema_version"], SCHEMA_VERSION);
    assert_eq!(r["verdict"], "Solution");
    assert_eq!(r["decided"], true);
}

#[test]
fn exit_codes() {
    let unknown = input("unknown");
    let unknown = unknown.to_str().unwrap();
    assert_eq!(sigma(&["solve-sas", unknown]).status.code(), Some(EXIT_OK));
    let out = sigma(&["solve-sas", unknown, "--require-decision"]);
    assert_eq!(out.status.code(), Some(EXIT_UNDECIDED));
    assert_eq!(report(&out)["verdict"], "Unknown");
    let twisted = input("twisted_a1");
    assert_eq!(sigma(&["solve-sas", twisted.to_str().unwrap(), "--require-decision"]).status.code(), Some(EXIT_OK));
    assert_eq!(sigma(&["solve-sas", "/nonexistent.sigma"]).status.code(), Some(EXIT_INPUT));
    assert_eq!(sigma(&["no-such-command"]).status.code(), Some(EXIT_INPUT));
}

#[test]
fn syntax_error_reports_column() {
    let out = sigma_stdin(&["solve-sas", "-"], "gen g free;\ntorsor g[;\n");
    assert_eq!(out.status.code(), Some(EXIT_INPUT));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("2:10: syntax error"), "{err}");
    let out = sigma_stdin(&["solve-sas", "-"], "gen g free;\ntorsor h;\n");
    assert!(String::from_utf8(out.stderr).unwrap().contains("unknown generator `h`"));
}

#[test]
fn same_seed_gives_identical_report_files() {
    let dir = std::env::temp_dir().join(format!("sigma-cli-test-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = input("decompose3");
    let mut bytes = Vec::new();
    for k in 0..2 {
        let out_path = dir.join(format!("r{k}.json"));
        let out = sigma(&["decompose", path.to_str().unwrap(), "--seed", "9", "--out", out_path.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(EXIT_OK));
        assert!(String::from_utf8(out.stdout).unwrap().contains("verdict: Decomposed"));
        bytes.push(std::fs::read(&out_path).unwrap());
    }
    assert_eq!(bytes[0], bytes[1]);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn sample_documents_round_trip() {
    for entry in std::fs::read_dir(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("inputs")).unwrap() {
        let path = entry.unwrap().path();
        let doc = parse_document(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let again = parse_document(&print_document(&doc)).unwrap();
        assert_eq!(doc, again, "{}", path.display());
    }
}

#[test]
fn bounds_flags_are_echoed() {
    let path = input("unknown");
    let out = sigma(&["solve-sas", path.to_str().unwrap(), "--bounds-degree", "2", "--bounds-window", "1"]);
    let r = report(&out);
    assert_eq!(r["bounds"]["degree"], 2);
    assert_eq!(r["bounds"]["window"], 1);
}
