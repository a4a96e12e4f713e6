//! Rule application: genesis-driven partitioning of input cells, accumulation, and
//! pointwise column formulas.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dictionary::{Aliases, Genesis};
use crate::lang::{pointwise_order, AccumFn, Arith, ArithOp, ColumnRef, FormulaBody, RuleDef, Workspace};
use crate::table::{instantiate, missing_tables, CellValue, Table, TableError, TableKey};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProcessError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("{0}")]
    Cycle(String),
    #[error("formula for `{target}` refers to `{column}` outside its own series")]
    ForeignColumn { target: String, column: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Sequential,
    Concurrent,
}

/// Evaluation order hook: given the partition count, returns the order in which
/// partitions are folded. Results never depend on it.
pub type Schedule<'a> = &'a (dyn Fn(usize) -> Vec<usize> + Sync);

#[derive(Clone, Copy, Default)]
pub struct Options<'a> {
    pub mode: Mode,
    pub schedule: Option<Schedule<'a>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Report {
    /// An input cell whose genesis fits more than one output cell; it is left out.
    AmbiguousMapping { input: TableKey, path: Vec<String>, column: String, outputs: usize },
    DivisionByZero { table: TableKey, path: Vec<String>, column: String },
}

impl std::fmt::Display for Report {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Report::AmbiguousMapping { input, path, column, outputs } => {
                write!(f, "cell ({}, {column}) of {input} maps to {outputs} output cells", path.join("/"))
            }
            Report::DivisionByZero { table, path, column } => {
                write!(f, "division by zero at ({}, {column}) of {table}", path.join("/"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Outcome {
    pub outputs: Vec<Table>,
    pub reports: Vec<Report>,
}

type Canon = BTreeSet<(String, String)>;

fn canon(g: &Genesis, aliases: &Aliases) -> Canon {
    g.dimensions(aliases)
        .iter()
        .map(|e| (e.dictionary_name.clone(), e.element_label.clone()))
        .collect()
}

/// One output cell fed by accumulation.
struct Partition {
    table: usize,
    row: usize,
    column: usize,
    func: AccumFn,
    values: Vec<f64>,
}

fn fold(func: AccumFn, values: &mut [f64]) -> CellValue {
    if values.is_empty() {
        return CellValue::Empty;
    }
    // canonical order makes the fold independent of arrival order
    values.sort_by(f64::total_cmp);
    let v = match func {
        AccumFn::Sum => values.iter().fold(0.0, |a, b| a + b),
        AccumFn::Max => values[values.len() - 1],
        AccumFn::Min => values[0],
        AccumFn::Count => values.len() as f64,
    };
    CellValue::Num(v)
}

fn arith(a: &Arith, t: &Table, row: usize) -> Result<Option<f64>, ()> {
    match a {
        Arith::Num(v) => Ok(Some(*v)),
        Arith::Col(c) => Ok(t.column_index(&c.column).and_then(|i| t.rows[row].values[i].as_num())),
        Arith::Bin(op, l, r) => {
            let (Some(l), Some(r)) = (arith(l, t, row)?, arith(r, t, row)?) else { return Ok(None) };
            Ok(Some(match op {
                ArithOp::Add => l + r,
                ArithOp::Sub => l - r,
                ArithOp::Mul => l * r,
                ArithOp::Div if r == 0.0 => return Err(()),
                ArithOp::Div => l / r,
            }))
        }
    }
}

fn check_local(target: &ColumnRef, a: &Arith) -> Result<(), ProcessError> {
    match a.columns().into_iter().find(|c| c.series != target.series) {
        Some(c) => Err(ProcessError::ForeignColumn {
            target: target.to_string(),
            column: c.to_string(),
        }),
        None => Ok(()),
    }
}

/// Every instance of an output series, empty, in slot order.
pub fn output_instances(ws: &Workspace, series: &str) -> Result<Vec<Table>, TableError> {
    missing_tables(ws, series, &[])?
        .iter()
        .map(|slot| {
            let attrs: Vec<(&str, &str)> = slot.attrs.iter().map(|(d, v)| (d.as_str(), v.as_str())).collect();
            instantiate(ws, series, slot.name.as_deref(), &attrs)
        })
        .collect()
}

pub fn apply_rule(ws: &Workspace, rule: &RuleDef, inputs: &[Table], prior: &[Table]) -> Result<Outcome, ProcessError> {
    apply_rule_with(ws, rule, inputs, prior, Options::default())
}

/// Apply one rule to the given input tables. Output columns without a formula keep
/// their values from `prior`, matched by table key and row path.
pub fn apply_rule_with(ws: &Workspace, rule: &RuleDef, inputs: &[Table], prior: &[Table], opts: Options<'_>) -> Result<Outcome, ProcessError> {
    let order = pointwise_order(rule).map_err(ProcessError::Cycle)?;
    for f in &rule.formulas {
        if let FormulaBody::Arith(a) = &f.body {
            check_local(&f.target, a)?;
        }
    }
    let mut outputs = Vec::new();
    for series in &rule.outputs {
        outputs.extend(output_instances(ws, series)?);
    }
    let mut reports = Vec::new();

    // keep values of columns no formula writes
    for t in outputs.iter_mut() {
        let key = t.key();
        let Some(p) = prior.iter().find(|p| p.key() == key) else { continue };
        for (c, column) in t.columns.clone().iter().enumerate() {
            if rule.formulas.iter().any(|f| f.target.series == t.series && f.target.column == *column) {
                continue;
            }
            let Some(pc) = p.column_index(column) else { continue };
            for row in t.rows.iter_mut() {
                if let Some(pr) = p.rows.iter().find(|r| r.path == row.path) {
                    row.values[c] = pr.values[pc].clone();
                }
            }
        }
    }

    let out_canon: Vec<Vec<Option<Canon>>> = outputs
        .iter()
        .map(|t| t.rows.iter().map(|r| (!r.header).then(|| canon(&r.genesis, &ws.aliases))).collect())
        .collect();
    let mut partitions: Vec<Partition> = Vec::new();
    for f in &rule.formulas {
        let FormulaBody::Accum(func, source) = &f.body else { continue };
        let first = partitions.len();
        for (ti, t) in outputs.iter().enumerate() {
            if t.series != f.target.series {
                continue;
            }
            let Some(column) = t.column_index(&f.target.column) else { continue };
            for (ri, c) in out_canon[ti].iter().enumerate() {
                if c.is_some() {
                    partitions.push(Partition {
                        table: ti,
                        row: ri,
                        column,
                        func: *func,
                        values: Vec::new(),
                    });
                }
            }
        }
        for input in inputs.iter().filter(|t| t.series == source.series) {
            let Some(ic) = input.column_index(&source.column) else { continue };
            for row in input.rows.iter().filter(|r| !r.header) {
                let Some(v) = row.values[ic].as_num() else { continue };
                let g = canon(&row.genesis, &ws.aliases);
                let hits: Vec<usize> = partitions[first..]
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| out_canon[p.table][p.row].as_ref().is_some_and(|oc| oc.is_subset(&g)))
                    .map(|(k, _)| first + k)
                    .collect();
                match hits.as_slice() {
                    [] => {}
                    [one] => partitions[*one].values.push(v),
                    many => reports.push(Report::AmbiguousMapping {
                        input: input.key(),
                        path: row.path.clone(),
                        column: source.column.clone(),
                        outputs: many.len(),
                    }),
                }
            }
        }
    }

    let schedule: Vec<usize> = match opts.schedule {
        Some(s) => s(partitions.len()),
        None => (0..partitions.len()).collect(),
    };
    let compute = |&k: &usize| {
        let p = &partitions[k];
        let mut values = p.values.clone();
        (k, fold(p.func, &mut values))
    };
    let results: Vec<(usize, CellValue)> = match opts.mode {
        Mode::Sequential => schedule.iter().map(compute).collect(),
        Mode::Concurrent => schedule.par_iter().map(compute).collect(),
    };
    for (k, v) in results {
        let p = &partitions[k];
        outputs[p.table].rows[p.row].values[p.column] = v;
    }

    for &i in &order {
        let f = &rule.formulas[i];
        let FormulaBody::Arith(a) = &f.body else { continue };
        for t in outputs.iter_mut().filter(|t| t.series == f.target.series) {
            let Some(c) = t.column_index(&f.target.column) else { continue };
            for r in 0..t.rows.len() {
                let v = match arith(a, t, r) {
                    Ok(Some(v)) => CellValue::Num(v),
                    Ok(None) => CellValue::Empty,
                    Err(()) => {
                        reports.push(Report::DivisionByZero {
                            table: t.key(),
                            path: t.rows[r].path.clone(),
                            column: f.target.column.clone(),
                        });
                        CellValue::Empty
                    }
                };
                t.rows[r].values[c] = v;
            }
        }
    }
    Ok(Outcome { outputs, reports })
}
