mod common;

use common::*;
use ddr_core::process::{apply_rule, apply_rule_with, Mode, Options, ProcessError, Report};
use ddr_core::table::{bind_table, parse_table, write_table, CellValue, Table};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn printed_report_rolls_up_to_its_branch() {
    let ws = example2();
    let input = bind_table(&ws, &parse_table(&fixture("example2/inbox/report-d21-q3.ddr")).unwrap()).unwrap();
    let out = apply_rule(&ws, &ws.rules["R1"], &[input], &[]).unwrap();
    assert_eq!(out.outputs.len(), 1);
    let t = &out.outputs[0];
    assert_eq!(value(t, "br2", "expenses"), CellValue::Num(11.0));
    assert_eq!(value(t, "br2", "personal"), CellValue::Num(5.0));
    assert_eq!(value(t, "br1", "expenses"), CellValue::Empty);
    assert!(out.reports.is_empty());
}

#[test]
fn cascade_computes_efficiency() {
    let ws = example2();
    let input = bind_table(&ws, &parse_table(&fixture("example2/inbox/report-d21-q3.ddr")).unwrap()).unwrap();
    let by_branch = apply_rule(&ws, &ws.rules["R1"], &[input], &[]).unwrap().outputs;
    let eff = apply_rule(&ws, &ws.rules["R2"], &by_branch, &[]).unwrap();
    assert_eq!(value(&eff.outputs[0], "br2", "efficiency"), CellValue::Num(11.0 / 5.0));
    assert_eq!(value(&eff.outputs[0], "br1", "efficiency"), CellValue::Empty);
}

#[test]
fn zero_divisor_reports_and_leaves_cell_empty() {
    let ws = example2();
    let mut t = ddr_core::table::instantiate(&ws, "EXPENSE-BY-BRANCHES", None, &[]).unwrap();
    t.set(&["br1"], "expenses", CellValue::Num(3.0));
    t.set(&["br1"], "personal", CellValue::Num(0.0));
    let out = apply_rule(&ws, &ws.rules["R2"], &[t], &[]).unwrap();
    assert_eq!(value(&out.outputs[0], "br1", "efficiency"), CellValue::Empty);
    assert!(matches!(&out.reports[..], [Report::DivisionByZero { path, column, .. }] if path == &["br1"] && column == "efficiency"));
}

#[test]
fn unwritten_columns_keep_prior_values() {
    let src = "universe U : string { a, b }\nuniverse C : string { x, y, z }\ndict R from U { a, b }\ndict COLS from C { x }\ndict MORE from C { x, y }\n\
series IN { names = - ; attrs = - ; columns = COLS ; rows = R }\nseries OUT { names = - ; attrs = - ; columns = MORE ; rows = R }\n\
scale IN.x : ratio\nscale OUT.x : ratio\nscale OUT.y : ratio\nrule R1 { in: IN ; out: OUT ; OUT.x = accum(sum, IN.x) }\n";
    let ws = ddr_core::lang::parse_workspace(&[ddr_core::lang::Source::new("x", src)]).unwrap().workspace;
    let mut input = ddr_core::table::instantiate(&ws, "IN", None, &[]).unwrap();
    input.set(&["a"], "x", CellValue::Num(2.0));
    let mut prior = ddr_core::table::instantiate(&ws, "OUT", None, &[]).unwrap();
    prior.set(&["b"], "y", CellValue::Num(7.0));
    prior.set(&["b"], "x", CellValue::Num(9.0));
    let out = apply_rule(&ws, &ws.rules["R1"], &[input], &[prior]).unwrap().outputs.remove(0);
    assert_eq!(value(&out, "b", "y"), CellValue::Num(7.0));
    assert_eq!(value(&out, "b", "x"), CellValue::Empty);
    assert_eq!(value(&out, "a", "x"), CellValue::Num(2.0));
}

#[test]
fn overlapping_outputs_are_ambiguous() {
    let src = "universe U : string { a, b }\nuniverse C : string { x }\ndict R from U { a, b }\ndict COLS from C { x }\n\
series IN { names = - ; attrs = - ; columns = COLS ; rows = R }\nseries OUT { names = - ; attrs = - ; columns = COLS ; rows = R }\n\
scale IN.x : ratio\nscale OUT.x : ratio\nrule R1 { in: IN ; out: OUT ; OUT.x = accum(sum, IN.x) }\n";
    let ws = ddr_core::lang::parse_workspace(&[ddr_core::lang::Source::new("x", src)]).unwrap().workspace;
    let mut input = ddr_core::table::instantiate(&ws, "IN", None, &[]).unwrap();
    input.set(&["a"], "x", CellValue::Num(2.0));
    // a row carrying both labels fits either output row
    input.rows[1].genesis = [("R", "a"), ("R", "b")].into_iter().collect();
    input.set(&["b"], "x", CellValue::Num(1.0));
    let out = apply_rule(&ws, &ws.rules["R1"], &[input], &[]).unwrap();
    assert!(matches!(&out.reports[..], [Report::AmbiguousMapping { outputs: 2, .. }]));
    assert_eq!(value(&out.outputs[0], "a", "x"), CellValue::Num(2.0));
}

#[test]
fn foreign_column_in_formula_is_rejected() {
    let ws = example2();
    let mut rule = ws.rules["R2"].clone();
    let text = "rule X { in: EXPENSE-BY-BRANCHES ; out: EXPENSE-EFFICIENCY ; EXPENSE-EFFICIENCY.efficiency = EXPENSE-BY-BRANCHES.expenses * 2 }";
    let decls = ddr_core::lang::parse_file(text).unwrap();
    if let ddr_core::lang::Decl::Rule(r) = &decls[0].node {
        rule = r.clone();
    }
    assert!(matches!(apply_rule(&ws, &rule, &[], &[]), Err(ProcessError::ForeignColumn { .. })));
}

fn outputs_bits(ts: &[Table]) -> Vec<String> {
    ts.iter().map(write_table).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sums_match_brute_force(seed in any::<u64>()) {
        let ws = example2();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reports = random_reports(&ws, &mut rng);
        let out = apply_rule(&ws, &ws.rules["R1"], &reports, &[]).unwrap();
        for (branch, (e, p)) in oracle_by_branch(&reports) {
            prop_assert_eq!(value(&out.outputs[0], &branch, "expenses"), CellValue::Num(e as f64));
            prop_assert_eq!(value(&out.outputs[0], &branch, "personal"), CellValue::Num(p as f64));
        }
    }

    #[test]
    fn order_and_mode_do_not_matter(seed in any::<u64>()) {
        let ws = example2();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reports = random_reports(&ws, &mut rng);
        let base = outputs_bits(&apply_rule(&ws, &ws.rules["R1"], &reports, &[]).unwrap().outputs);
        let mut shuffled = reports.clone();
        shuffled.shuffle(&mut rng);
        for t in shuffled.iter_mut() {
            t.rows.shuffle(&mut rng);
        }
        let perm_seed = rng.gen::<u64>();
        let schedule = move |n: usize| {
            let mut v: Vec<usize> = (0..n).collect();
            v.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
            v
        };
        for mode in [Mode::Sequential, Mode::Concurrent] {
            let opts = Options { mode, schedule: Some(&schedule) };
            let got = outputs_bits(&apply_rule_with(&ws, &ws.rules["R1"], &shuffled, &[], opts).unwrap().outputs);
            prop_assert_eq!(&got, &base);
        }
    }

    #[test]
    fn transposed_inputs_give_same_outputs(seed in any::<u64>()) {
        let ws = example2();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reports = random_reports(&ws, &mut rng);
        let flipped: Vec<Table> = reports
            .iter()
            .map(|t| bind_table(&ws, &parse_table(&write_table(&t.transpose())).unwrap()).unwrap())
            .collect();
        let a = apply_rule(&ws, &ws.rules["R1"], &reports, &[]).unwrap();
        let b = apply_rule(&ws, &ws.rules["R1"], &flipped, &[]).unwrap();
        prop_assert_eq!(a, b);
    }
}
