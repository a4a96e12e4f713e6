use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use super::{bind, instance, names_dictionary, series_items, CellValue, Table, TableError, TableKey};
use crate::dictionary::{Bindings, Dictionary, Element};
use crate::lang::Workspace;
use crate::scale::Level;

type Attrs = Vec<(String, String)>;

pub const DEFAULT_DELTA_THRESHOLD: f64 = 0.15;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Finding {
    Binding { message: String },
    UnknownElement { axis: String, label: String, path: Vec<String> },
    DuplicateRow { path: Vec<String> },
    BadValue { path: Vec<String>, column: String, value: String, universe: String },
    ScaleViolation { path: Vec<String>, column: String, message: String },
    Hierarchy { path: Vec<String>, column: String, value: f64, children: f64 },
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::Binding { message } => write!(f, "binding: {message}"),
            Finding::UnknownElement { axis, label, path } => {
                write!(f, "unknown {axis} element `{label}`")?;
                if path.len() > 1 {
                    write!(f, " at {}", path.join("/"))?;
                }
                Ok(())
            }
            Finding::DuplicateRow { path } => write!(f, "duplicate row {}", path.join("/")),
            Finding::BadValue { path, column, value, universe } => {
                write!(f, "bad value `{value}` at ({}, {column}): not in {universe}", path.join("/"))
            }
            Finding::ScaleViolation { path, column, message } => {
                write!(f, "scale violation at ({}, {column}): {message}", path.join("/"))
            }
            Finding::Hierarchy { path, column, value, children } => {
                write!(f, "hierarchy violation at ({}, {column}): {value} != {children}", path.join("/"))
            }
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * b.abs().max(1.0)
}

/// Diagnostics for one bound table. Never fails; problems become findings.
pub fn validate(ws: &Workspace, table: &Table) -> Vec<Finding> {
    let attrs: Vec<(&str, &str)> = table.attrs.iter().map(|(d, v)| (d.as_str(), v.as_str())).collect();
    let inst = match instance(ws, &table.series, table.name.as_deref(), &attrs) {
        Ok(i) => i,
        Err(e) => return vec![Finding::Binding { message: e.to_string() }],
    };
    let mut out = Vec::new();
    for c in &table.columns {
        if !inst.columns.contains(c) {
            out.push(Finding::UnknownElement {
                axis: "column".into(),
                label: c.clone(),
                path: Vec::new(),
            });
        }
    }
    let mut seen = HashSet::new();
    for r in &table.rows {
        if !r.known {
            out.push(Finding::UnknownElement {
                axis: "row".into(),
                label: r.label().to_string(),
                path: r.path.clone(),
            });
        }
        if !seen.insert(&r.path) {
            out.push(Finding::DuplicateRow { path: r.path.clone() });
        }
    }
    for (c, column) in table.columns.iter().enumerate() {
        let scale = ws.scales.column(&table.series, column);
        let universe_name = ws.column_universe(&table.series, column);
        let universe = ws.universes.get(universe_name);
        for r in &table.rows {
            let text = match &r.values[c] {
                CellValue::Empty => continue,
                CellValue::Num(v) => v.to_string(),
                CellValue::Text(t) => t.clone(),
            };
            if !universe.is_some_and(|u| u.contains(&text)) {
                out.push(Finding::BadValue {
                    path: r.path.clone(),
                    column: column.clone(),
                    value: text,
                    universe: universe_name.to_string(),
                });
            } else if r.header && !scale.admits("sum") {
                out.push(Finding::ScaleViolation {
                    path: r.path.clone(),
                    column: column.clone(),
                    message: format!("section total in a {} column", scale.level),
                });
            }
        }
        if scale.admits("sum") {
            for r in &table.rows {
                let Some(value) = r.values[c].as_num() else { continue };
                let children: Vec<&CellValue> = table
                    .rows
                    .iter()
                    .filter(|k| k.path.len() == r.path.len() + 1 && k.path.starts_with(&r.path))
                    .map(|k| &k.values[c])
                    .collect();
                if children.is_empty() || !children.iter().all(|v| v.as_num().is_some()) {
                    continue;
                }
                let sum: f64 = children.iter().filter_map(|v| v.as_num()).sum();
                if !close(value, sum) {
                    out.push(Finding::Hierarchy {
                        path: r.path.clone(),
                        column: column.clone(),
                        value,
                        children: sum,
                    });
                }
            }
        }
    }
    out
}

/// One expected table of a series.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Slot {
    pub name: Option<String>,
    /// Bindings of the non-context attribute items, in series order.
    pub attrs: Vec<(String, String)>,
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if let Some(n) = &self.name {
            parts.push(format!("name={n}"));
        }
        parts.extend(self.attrs.iter().map(|(d, v)| format!("{d}={v}")));
        f.write_str(&parts.join(" "))
    }
}

impl Slot {
    fn normalized(&self) -> (Option<String>, Vec<(String, String)>) {
        let mut a = self.attrs.clone();
        a.sort();
        (self.name.clone(), a)
    }
}

/// Every name × attribute combination with consistent bindings that has no received
/// table, in dictionary order. Context attributes do not take part.
pub fn missing_tables(ws: &Workspace, series: &str, received: &[TableKey]) -> Result<Vec<Slot>, TableError> {
    let names = names_dictionary(ws, series)?;
    let items = series_items(ws, series)?;
    let mut dims: Vec<(String, Dictionary)> = Vec::new();
    for item in items.iter().filter(|i| i.context.is_none()) {
        dims.push((item.dimension.clone(), ws.env().eval_dict(item.expr)?));
    }
    let context: HashSet<&str> = items.iter().filter(|i| i.context.is_some()).map(|i| i.dimension.as_str()).collect();
    let have: HashSet<(Option<String>, Attrs)> = received
        .iter()
        .filter(|k| k.series == series)
        .map(|k| {
            let mut a: Vec<(String, String)> = k.attrs.iter().filter(|(d, _)| !context.contains(d.as_str())).cloned().collect();
            a.sort();
            (k.name.clone(), a)
        })
        .collect();
    let name_choices: Vec<Option<(&Dictionary, &Element)>> = match &names {
        Some(d) => d.entries.iter().map(|e| Some((d, e))).collect(),
        None => vec![None],
    };
    let mut out = Vec::new();
    for choice in name_choices {
        let mut bindings = Bindings::new();
        if let Some((d, e)) = choice {
            if bind(&mut bindings, &d.coordinates(e), &ws.aliases).is_err() {
                continue;
            }
        }
        let name = choice.map(|(_, e)| e.label.clone());
        enumerate(ws, &dims, 0, &mut bindings, &mut Vec::new(), &mut |attrs| {
            let slot = Slot {
                name: name.clone(),
                attrs: attrs.to_vec(),
            };
            if !have.contains(&slot.normalized()) {
                out.push(slot);
            }
        });
    }
    Ok(out)
}

fn enumerate(
    ws: &Workspace,
    dims: &[(String, Dictionary)],
    k: usize,
    bindings: &mut Bindings,
    chosen: &mut Attrs,
    emit: &mut dyn FnMut(&Attrs),
) {
    let Some((dim, dict)) = dims.get(k) else {
        emit(chosen);
        return;
    };
    for e in dict.entries.iter().filter(|e| !e.header) {
        let mut b = bindings.clone();
        if bind(&mut b, &dict.coordinates(e), &ws.aliases).is_err() {
            continue;
        }
        chosen.push((dim.clone(), e.label.clone()));
        enumerate(ws, dims, k + 1, &mut b, chosen, emit);
        chosen.pop();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum DeltaFinding {
    Exceeds { path: Vec<String>, column: String, previous: f64, current: f64, ratio: f64 },
    ZeroBaseline { path: Vec<String>, column: String, current: f64 },
    MissingCurrent { path: Vec<String>, column: String, previous: f64 },
    MissingPrevious { path: Vec<String>, column: String, current: f64 },
}

impl fmt::Display for DeltaFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaFinding::Exceeds { path, column, previous, current, ratio } => write!(
                f,
                "({}, {column}): {previous} -> {current} changes by {:.1}%",
                path.join("/"),
                ratio * 100.0
            ),
            DeltaFinding::ZeroBaseline { path, column, current } => {
                write!(f, "({}, {column}): zero baseline, now {current}", path.join("/"))
            }
            DeltaFinding::MissingCurrent { path, column, previous } => {
                write!(f, "({}, {column}): missing in current report (was {previous})", path.join("/"))
            }
            DeltaFinding::MissingPrevious { path, column, current } => {
                write!(f, "({}, {column}): missing in previous report (now {current})", path.join("/"))
            }
        }
    }
}

/// Compare two reports of one series cell by cell over ratio columns.
pub fn delta_check(ws: &Workspace, current: &Table, previous: &Table, threshold: f64) -> Result<Vec<DeltaFinding>, TableError> {
    if current.series != previous.series {
        return Err(TableError::SeriesMismatch(current.series.clone(), previous.series.clone()));
    }
    let mut columns: Vec<&String> = current.columns.iter().collect();
    columns.extend(previous.columns.iter().filter(|c| !current.columns.contains(c)));
    let mut paths: Vec<&Vec<String>> = current.rows.iter().map(|r| &r.path).collect();
    paths.extend(previous.rows.iter().map(|r| &r.path).filter(|p| !current.rows.iter().any(|r| &r.path == *p)));
    let value = |t: &Table, path: &[String], column: &str| -> Option<f64> {
        let c = t.column_index(column)?;
        t.rows.iter().find(|r| r.path == path)?.values[c].as_num()
    };
    let mut out = Vec::new();
    for column in columns {
        if ws.scales.column(&current.series, column).level != Level::Ratio {
            continue;
        }
        for path in &paths {
            let (cur, prev) = (value(current, path, column), value(previous, path, column));
            let (path, column) = ((*path).clone(), column.clone());
            match (cur, prev) {
                (Some(current), Some(0.0)) if current != 0.0 => out.push(DeltaFinding::ZeroBaseline { path, column, current }),
                (Some(current), Some(previous)) if previous != 0.0 => {
                    let ratio = (current - previous).abs() / previous.abs();
                    if ratio > threshold {
                        out.push(DeltaFinding::Exceeds {
                            path,
                            column,
                            previous,
                            current,
                            ratio,
                        });
                    }
                }
                (None, Some(previous)) => out.push(DeltaFinding::MissingCurrent { path, column, previous }),
                (Some(current), None) => out.push(DeltaFinding::MissingPrevious { path, column, current }),
                _ => {}
            }
        }
    }
    Ok(out)
}
