use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn ddr(ws: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddr"))
        .arg("-w")
        .arg(ws)
        .args(args)
        .env_remove("DDR_WORKSPACE")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn workspace(fixture: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let defs = fixtures().join(fixture).join("defs");
    let o = ddr(dir.path(), &["init", "--from", defs.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    dir
}

#[test]
fn eval_prints_sectioned_dictionary() {
    let ws = workspace("personnel");
    let o = ddr(ws.path(), &["eval", "P(D,B) // D"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "\
IT:         {D(B) IT}
  Person1   {B USA, D(USA) IT}
  Person2   {B USA, D(USA) IT}
  Person3   {B Can, D(Can) IT}
HR:         {D(B) HR}
  Person4   {B USA, D(USA) HR}
  Person5   {B EMU, D(EMU) HR}
"
    );
}

#[test]
fn eval_collapse_lists_members() {
    let ws = workspace("personnel");
    let o = ddr(ws.path(), &["eval", "union P(D,B) | B"]);
    let text = stdout(&o);
    assert!(text.contains("P(USA) = { Person1, Person2, Person4 }"), "{text}");
    assert!(text.contains("P(Can) = { Person3 }"));
    assert!(text.contains("P(EMU) = { Person5 }"));
    let o = ddr(ws.path(), &["eval", "D union NOPE"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn check_reports_intro_inconsistency() {
    let ws = workspace("intro");
    let bad = fixtures().join("intro/inbox/bad-report.ddr");
    let o = ddr(ws.path(), &["check", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 2, "{text}");
    assert!(text.contains("unknown row element `p01`"));
    assert!(text.contains("hierarchy violation at (pr1, amount): 12 != 10"));
    let o = ddr(ws.path(), &["--format", "json", "check", bad.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["findings"][1]["kind"], "Hierarchy");
}

#[test]
fn ingest_missing_run_and_show() {
    let ws = workspace("example2");
    let o = ddr(ws.path(), &["missing", "--series", "EXPENSE-REPORT"]);
    assert!(stdout(&o).ends_with("24 missing\n"));
    let report = fixtures().join("example2/inbox/report-d21-q3.ddr");
    let o = ddr(ws.path(), &["ingest", report.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    let o = ddr(ws.path(), &["missing", "--series", "EXPENSE-REPORT"]);
    let text = stdout(&o);
    assert!(text.ends_with("23 missing\n") && !text.contains("DEP=d21 BRANCH=br2 QUART=3"));
    assert_eq!(stdout(&ddr(ws.path(), &["show", "--queue"])), "1 R1 (EXPENSE%2DREPORT__-__br2-d21-3.ddr)\n");
    let o = ddr(ws.path(), &["run"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "R1: wrote EXPENSE%2DBY%2DBRANCHES__-__.ddr\nR2: wrote EXPENSE%2DEFFICIENCY__-__.ddr\nquiescent after 2 steps\n"
    );
    let o = ddr(ws.path(), &["show", "--series", "EXPENSE-EFFICIENCY"]);
    assert!(stdout(&o).contains("row br2 : 11, 5, 2.2\n"));
    let o = ddr(ws.path(), &["run", "--once"]);
    assert_eq!(stdout(&o), "quiescent after 0 steps\n");
}

#[test]
fn ingest_rejects_invalid_tables() {
    let ws = workspace("intro");
    let bad = fixtures().join("intro/inbox/bad-report.ddr");
    let o = ddr(ws.path(), &["ingest", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(std::fs::read_dir(ws.path().join("tables")).unwrap().next().is_none());
}

#[test]
fn delta_flags_large_changes() {
    let ws = workspace("example2");
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, v: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, format!("table EXPENSE-BY-BRANCHES\ncolumns: expenses\nrow br1 : {v}\n")).unwrap();
        p
    };
    let prev = write("prev.ddr", "100");
    let cur = write("cur.ddr", "120");
    let o = ddr(ws.path(), &["delta", cur.to_str().unwrap(), prev.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o), "(br1, expenses): 100 -> 120 changes by 20.0%\n");
    let cur = write("cur.ddr", "110");
    let o = ddr(ws.path(), &["delta", cur.to_str().unwrap(), prev.to_str().unwrap()]);
    assert!(o.status.success());
}

#[test]
fn watch_ingests_dropped_files() {
    let ws = workspace("example2");
    let inbox = tempfile::tempdir().unwrap();
    std::fs::copy(fixtures().join("example2/inbox/report-d21-q3.ddr"), inbox.path().join("r.ddr")).unwrap();
    let o = ddr(ws.path(), &["run", "--watch", inbox.path().to_str().unwrap(), "--watch-cycles", "2", "--poll-ms", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("ingested "), "{text}");
    assert!(text.contains("R2: wrote"));
}

#[test]
fn output_is_deterministic() {
    let a = workspace("example2");
    let b = workspace("example2");
    for args in [&["missing", "--series", "EXPENSE-REPORT"][..], &["--format", "json", "eval", "PROJECTS(DEP(BRANCH), TYPE) // TYPE"][..]] {
        let x = ddr(a.path(), args);
        let y = ddr(b.path(), args);
        assert!(x.status.success(), "{x:?}");
        assert_eq!(x.stdout, y.stdout);
    }
}

#[test]
fn usage_errors_exit_2() {
    let ws = workspace("example2");
    assert_eq!(ddr(ws.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(ddr(ws.path(), &["missing"]).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_ddr")).args(["show"]).env_remove("DDR_WORKSPACE").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_ddr")).args(["show", "--queue"]).env("DDR_WORKSPACE", ws.path()).output().unwrap();
    assert!(o.status.success());
}
