#![allow(dead_code)]

use std::collections::BTreeMap;

use ddr_core::lang::{parse_workspace, Source, Workspace};
use ddr_core::table::{instantiate, CellValue, Table};
use rand::Rng;

pub const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

pub fn fixture(path: &str) -> String {
    std::fs::read_to_string(format!("{FIXTURES}/{path}")).unwrap()
}

pub fn load(files: &[&str]) -> Workspace {
    let sources: Vec<Source> = files.iter().map(|f| Source::new(*f, fixture(f))).collect();
    parse_workspace(&sources).unwrap_or_else(|d| panic!("{d:?}")).workspace
}

pub fn example2() -> Workspace {
    load(&["example2/defs/company.ddr"])
}

pub fn personnel() -> Workspace {
    load(&["personnel/defs/personnel.ddr"])
}

/// Department to branch, written out by hand for the oracles.
pub const DEPS: [(&str, &str); 6] = [("d11", "br1"), ("d12", "br1"), ("d13", "br1"), ("d21", "br2"), ("d22", "br2"), ("d31", "br3")];

/// One full quarter-by-department set of reports with values in 0..=100.
pub fn random_reports(ws: &Workspace, rng: &mut impl Rng) -> Vec<Table> {
    let mut out = Vec::new();
    for (dep, branch) in DEPS {
        for q in ["1", "2", "3", "4"] {
            let mut t = instantiate(ws, "EXPENSE-REPORT", None, &[("DEP", dep), ("BRANCH", branch), ("QUART", q)]).unwrap();
            for row in t.rows.iter_mut() {
                for v in row.values.iter_mut() {
                    *v = CellValue::Num(rng.gen_range(0..=100) as f64);
                }
            }
            out.push(t);
        }
    }
    out
}

/// Per-branch (expenses, personal) totals by walking every cell and reading the
/// branch straight from the table attributes.
pub fn oracle_by_branch(reports: &[Table]) -> BTreeMap<String, (i64, i64)> {
    let mut out: BTreeMap<String, (i64, i64)> = BTreeMap::new();
    for t in reports {
        let branch = t.attrs.iter().find(|(d, _)| d == "BRANCH").unwrap().1.clone();
        let e = t.columns.iter().position(|c| c == "expenses").unwrap();
        let p = t.columns.iter().position(|c| c == "personal").unwrap();
        let slot = out.entry(branch).or_default();
        for row in &t.rows {
            if let CellValue::Num(v) = row.values[e] {
                slot.0 += v as i64;
            }
            if let CellValue::Num(v) = row.values[p] {
                slot.1 += v as i64;
            }
        }
    }
    out
}

pub fn value(t: &Table, row: &str, column: &str) -> CellValue {
    t.cell(&[row], column).unwrap().value.clone()
}

/// Fresh workspace directory holding a copy of a fixture's definitions.
pub fn workspace_dir(fixture_dir: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let defs = dir.path().join("defs");
    std::fs::create_dir_all(&defs).unwrap();
    for entry in std::fs::read_dir(format!("{FIXTURES}/{fixture_dir}/defs")).unwrap() {
        let p = entry.unwrap().path();
        std::fs::copy(&p, defs.join(p.file_name().unwrap())).unwrap();
    }
    dir
}

/// File name to content for everything under `tables/`.
pub fn snapshot(root: &std::path::Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(root.join("tables")).unwrap() {
        let p = entry.unwrap().path();
        out.insert(p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap());
    }
    out
}

pub fn open_monitor(root: &std::path::Path, fault: Option<ddr_core::store::FaultInjector>) -> Result<ddr_core::monitor::Monitor, ddr_core::monitor::MonitorError> {
    let mut store = ddr_core::store::Store::open(root)?;
    if let Some(f) = fault {
        store = store.with_fault(f);
    }
    let ws = store.load_workspace()?.workspace;
    ddr_core::monitor::Monitor::open(ws, store)
}

/// Ingest the sample department report and drain the queue (R1 then R2).
pub fn cascade(root: &std::path::Path, fault: Option<ddr_core::store::FaultInjector>) -> Result<ddr_core::monitor::RunReport, ddr_core::monitor::MonitorError> {
    let mut m = open_monitor(root, fault)?;
    m.initialize()?;
    let raw = ddr_core::table::parse_table(&fixture("example2/inbox/report-d21-q3.ddr")).unwrap();
    let t = ddr_core::table::bind_table(m.workspace(), &raw).unwrap();
    m.ingest(&t)?;
    m.run_to_quiescence(50)
}

/// Crash at every write boundary of the cascade, recover, finish, and compare with the
/// crash-free tables. Returns the number of injection runs.
pub fn crash_everywhere() -> usize {
    use ddr_core::store::{FaultInjector, FaultPoint};
    let clean = workspace_dir("example2");
    cascade(clean.path(), None).unwrap();
    let expected = snapshot(clean.path());
    let mut runs = 0;
    for point in FaultPoint::ALL {
        for index in 0.. {
            let dir = workspace_dir("example2");
            match cascade(dir.path(), Some(FaultInjector { index, point })) {
                Ok(_) => break,
                Err(ddr_core::monitor::MonitorError::Store(ddr_core::store::StoreError::Crash { .. })) => {}
                Err(e) => panic!("{e}"),
            }
            cascade(dir.path(), None).unwrap();
            assert_eq!(snapshot(dir.path()), expected, "crash at write {index} {point:?}");
            runs += 1;
        }
    }
    runs
}

/// Small rules exercising the monitor edges: a self-loop, a failing rule, and the
/// two initialization kinds.
pub const LOOPS: &str = "\
universe U : string { a }
universe C : string { x, y }
universe N : string
dict R from U { a }
dict COLS from C { x, y }
series T { names = - ; attrs = - ; columns = COLS ; rows = R }
series BROKEN { names = N ; attrs = - ; columns = COLS ; rows = R }
series OUT { names = - ; attrs = - ; columns = COLS ; rows = R }
scale T.x : ratio
scale T.y : ratio
scale BROKEN.x : ratio
scale OUT.x : ratio
scale OUT.y : ratio
rule GROW { in: T ; out: T ; T.x = accum(sum, T.y) ; T.y = T.x + 1 }
rule FAIL { in: - ; out: BROKEN ; BROKEN.x = 1 }
rule ONCE { in: - ; out: OUT ; OUT.x = 5 }
rule PING { in: - ; out: OUT ; OUT.y = 7 }
init ONCE at-start
init PING on-event ping
";

pub fn loops_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("defs")).unwrap();
    std::fs::write(dir.path().join("defs/loops.ddr"), LOOPS).unwrap();
    dir
}
