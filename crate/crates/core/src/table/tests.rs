use proptest::prelude::*;

use super::*;
use crate::lang::{parse_workspace, Source};

const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

fn load(files: &[&str]) -> Workspace {
    let sources: Vec<Source> = files
        .iter()
        .map(|f| Source::new(*f, std::fs::read_to_string(format!("{FIXTURES}/{f}")).unwrap()))
        .collect();
    parse_workspace(&sources).unwrap_or_else(|d| panic!("{d:?}")).workspace
}

fn fixture(f: &str) -> String {
    std::fs::read_to_string(format!("{FIXTURES}/{f}")).unwrap()
}

fn example2() -> Workspace {
    load(&["example2/defs/company.ddr"])
}

#[test]
fn cell_genesis_of_example_report() {
    let ws = example2();
    let t = bind_table(&ws, &parse_table(&fixture("example2/inbox/report-d21-q3.ddr")).unwrap()).unwrap();
    let cell = t.cell(&["p22"], "expenses").unwrap();
    assert_eq!(*cell.value, CellValue::Num(4.0));
    let expected: Genesis = [("PROJECTS", "p22"), ("DEP", "d21"), ("BRANCH", "br2"), ("TYPE", "r"), ("QUART", "3")]
        .into_iter()
        .collect();
    assert_eq!(*cell.genesis, expected);
    assert!(validate(&ws, &t).is_empty());
}

#[test]
fn instantiate_lists_department_projects() {
    let ws = example2();
    let t = instantiate(&ws, "EXPENSE-REPORT", None, &[("DEP", "d21"), ("BRANCH", "br2"), ("QUART", "3")]).unwrap();
    let labels: Vec<&str> = t.rows.iter().map(Row::label).collect();
    assert_eq!(labels, ["p21", "p22", "p23", "p24"]);
    assert_eq!(t.columns, ["expenses", "personal"]);
}

#[test]
fn inconsistent_attributes_are_rejected() {
    let ws = example2();
    let err = instance(&ws, "EXPENSE-REPORT", None, &[("DEP", "d21"), ("BRANCH", "br1"), ("QUART", "3")]).unwrap_err();
    assert!(matches!(err, TableError::BindingConflict { .. }), "{err:?}");
    let err = instance(&ws, "EXPENSE-REPORT", None, &[("DEP", "d21"), ("BRANCH", "br2")]).unwrap_err();
    assert_eq!(err, TableError::MissingAttribute("QUART".into()));
    let err = instance(&ws, "EXPENSE-REPORT", None, &[("DEP", "d99"), ("BRANCH", "br2"), ("QUART", "3")]).unwrap_err();
    assert!(matches!(err, TableError::UnknownElement { .. }));
}

#[test]
fn intro_report_diagnostics() {
    let ws = load(&["intro/defs/expenses.ddr"]);
    let t = bind_table(&ws, &parse_table(&fixture("intro/inbox/bad-report.ddr")).unwrap()).unwrap();
    assert_eq!(t.name.as_deref(), Some("(IT,3,2007)"));
    let findings = validate(&ws, &t);
    assert_eq!(
        findings,
        [
            Finding::UnknownElement {
                axis: "row".into(),
                label: "p01".into(),
                path: vec!["pr1".into(), "office".into(), "p01".into()],
            },
            Finding::Hierarchy {
                path: vec!["pr1".into()],
                column: "amount".into(),
                value: 12.0,
                children: 10.0,
            },
        ]
    );
    let row = t.row(&["pr2", "trip", "p23"]).unwrap();
    assert!(row.genesis.contains(&GenesisEntry::new("PERSONEL", "p23")));
    assert!(row.genesis.contains(&GenesisEntry::new("ADDRESS", "08550")));
}

#[test]
fn header_totals_in_nominal_column() {
    let ws = load(&["intro/defs/expenses.ddr"]);
    let src = fixture("intro/defs/expenses.ddr").replace("scale EXPENSE-REPORT.amount : ratio unit USD", "scale EXPENSE-REPORT.amount : nominal in RealR");
    let nominal = parse_workspace(&[Source::new("x", src)]).unwrap().workspace;
    let raw = parse_table(&fixture("intro/inbox/bad-report.ddr")).unwrap();
    let t = bind_table(&nominal, &raw).unwrap();
    let f = validate(&nominal, &t);
    assert_eq!(f.iter().filter(|f| matches!(f, Finding::ScaleViolation { .. })).count(), 6);
    assert!(!f.iter().any(|f| matches!(f, Finding::Hierarchy { .. })));
    let t = bind_table(&ws, &raw).unwrap();
    assert!(!validate(&ws, &t).iter().any(|f| matches!(f, Finding::ScaleViolation { .. })));
}

#[test]
fn bad_values_and_columns() {
    let ws = example2();
    let text = "table EXPENSE-REPORT\nattr DEP = d21\nattr BRANCH = br2\nattr QUART = 3\ncolumns: expenses, bogus\nrow p21 : abc, 1\nrow p21 : 1, 1\n";
    let t = bind_table(&ws, &parse_table(text).unwrap()).unwrap();
    let f = validate(&ws, &t);
    assert!(f.contains(&Finding::UnknownElement {
        axis: "column".into(),
        label: "bogus".into(),
        path: vec![],
    }));
    assert!(f.contains(&Finding::DuplicateRow { path: vec!["p21".into()] }));
    assert!(f.iter().any(|f| matches!(f, Finding::BadValue { value, .. } if value == "abc")));
}

#[test]
fn syntax_errors() {
    assert!(matches!(parse_table("columns: a"), Err(TableError::Syntax { line: 1, .. })));
    assert!(matches!(parse_table("table T\nrow a : 1"), Err(TableError::Syntax { line: 2, .. })));
    assert!(matches!(parse_table("table T\ncolumns: a\nrow x : 1, 2"), Err(TableError::Syntax { line: 3, .. })));
    assert!(matches!(parse_table("table T\nattr A = 1\nattr A = 2"), Err(TableError::Syntax { line: 3, .. })));
}

#[test]
fn write_then_parse_round_trips() {
    let ws = example2();
    let t = bind_table(&ws, &parse_table(&fixture("example2/inbox/report-d21-q3.ddr")).unwrap()).unwrap();
    let text = write_table(&t);
    let back = bind_table(&ws, &parse_table(&text).unwrap()).unwrap();
    assert_eq!(back, t);
    assert_eq!(write_table(&back), text);
}

#[test]
fn transposed_layout_swaps_axes_only() {
    let ws = example2();
    let t = bind_table(&ws, &parse_table(&fixture("example2/inbox/report-d21-q3.ddr")).unwrap()).unwrap();
    let tt = t.transpose();
    let text = write_table(&tt);
    assert!(text.contains("layout transposed\ncolumns: p21, p22, p23, p24\nrow expenses : 3, 4, 2, 2\n"), "{text}");
    let back = bind_table(&ws, &parse_table(&text).unwrap()).unwrap();
    assert_eq!(back.rows, t.rows);
    assert_eq!(back.columns, t.columns);
    assert!(back.transposed);
    let (rows, cols) = back.axes();
    assert_eq!(rows, ["expenses", "personal"]);
    assert_eq!(cols.len(), 4);
    assert_eq!(*back.grid()[0][1], CellValue::Num(4.0));
}

#[test]
fn missing_tables_of_example_series() {
    let ws = example2();
    let all = missing_tables(&ws, "EXPENSE-REPORT", &[]).unwrap();
    assert_eq!(all.len(), 24);
    assert_eq!(all[0].to_string(), "DEP=d11 BRANCH=br1 QUART=1");
    let t = bind_table(&ws, &parse_table(&fixture("example2/inbox/report-d21-q3.ddr")).unwrap()).unwrap();
    let rest = missing_tables(&ws, "EXPENSE-REPORT", &[t.key()]).unwrap();
    assert_eq!(rest.len(), 23);
    assert!(!rest.iter().any(|s| s.to_string() == "DEP=d21 BRANCH=br2 QUART=3"));
    assert_eq!(missing_tables(&ws, "EXPENSE-BY-BRANCHES", &[]).unwrap(), [Slot { name: None, attrs: vec![] }]);
}

#[test]
fn missing_tables_ignore_context_attributes() {
    let ws = load(&["intro/defs/expenses.ddr"]);
    let all = missing_tables(&ws, "EXPENSE-REPORT", &[]).unwrap();
    assert_eq!(all.len(), 16);
    assert_eq!(all[0].name.as_deref(), Some("(IT,1,2007)"));
    assert!(all[0].attrs.iter().all(|(d, _)| d != "ADDRESS"));
}

#[test]
fn infinite_name_space() {
    let src = "universe U : string\nuniverse C : string { a }\ndict COLS from C { a }\nseries S { names = U ; attrs = - ; columns = COLS ; rows = COLS }\n";
    let ws = parse_workspace(&[Source::new("x", src)]).unwrap().workspace;
    assert_eq!(missing_tables(&ws, "S", &[]).unwrap_err(), TableError::InfiniteNameSpace("S".into()));
}

fn by_branches(ws: &Workspace, values: &[(&str, f64)]) -> Table {
    let mut t = instantiate(ws, "EXPENSE-BY-BRANCHES", None, &[]).unwrap();
    for (b, v) in values {
        t.set(&[b], "expenses", CellValue::Num(*v));
    }
    t
}

#[test]
fn delta_examples() {
    let ws = example2();
    let prev = by_branches(&ws, &[("br1", 100.0), ("br2", 100.0), ("br3", 0.0)]);
    let cur = by_branches(&ws, &[("br1", 120.0), ("br2", 110.0), ("br3", 5.0)]);
    let f = delta_check(&ws, &cur, &prev, DEFAULT_DELTA_THRESHOLD).unwrap();
    assert_eq!(f.len(), 2);
    assert!(matches!(&f[0], DeltaFinding::Exceeds { path, .. } if path == &["br1"]));
    assert!(matches!(&f[1], DeltaFinding::ZeroBaseline { path, current, .. } if path == &["br3"] && *current == 5.0));
    let other = instantiate(&ws, "EXPENSE-EFFICIENCY", None, &[]).unwrap();
    assert!(matches!(delta_check(&ws, &cur, &other, 0.15), Err(TableError::SeriesMismatch(..))));
}

#[test]
fn delta_reports_missing_cells() {
    let ws = example2();
    let prev = by_branches(&ws, &[("br1", 100.0)]);
    let cur = by_branches(&ws, &[("br2", 1.0)]);
    let f = delta_check(&ws, &cur, &prev, 0.15).unwrap();
    assert!(matches!(&f[0], DeltaFinding::MissingCurrent { .. }));
    assert!(matches!(&f[1], DeltaFinding::MissingPrevious { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn delta_flag_matches_integer_oracle(prev in 1i64..10_000, cur in 0i64..20_000) {
        let ws = example2();
        let f = delta_check(
            &ws,
            &by_branches(&ws, &[("br1", cur as f64)]),
            &by_branches(&ws, &[("br1", prev as f64)]),
            DEFAULT_DELTA_THRESHOLD,
        ).unwrap();
        let oracle = 100 * (cur - prev).abs() > 15 * prev;
        prop_assert_eq!(!f.is_empty(), oracle);
    }

    #[test]
    fn raw_round_trip(
        cols in proptest::collection::vec("[a-z][a-z0-9]{0,4}", 1..4),
        rows in proptest::collection::vec(("[a-z][a-z0-9]{0,4}", proptest::collection::vec("-|[0-9]{1,3}", 3)), 0..5),
        transposed in any::<bool>(),
    ) {
        let n = cols.len();
        let raw = RawTable {
            series: "S".into(),
            name: None,
            attrs: vec![("A".into(), "x".into())],
            columns: cols,
            rows: rows.into_iter().map(|(l, v)| (l, v[..n].to_vec())).collect(),
            transposed,
        };
        let back = parse_table(&write_raw(&raw)).unwrap();
        prop_assert_eq!(back, raw);
    }
}
