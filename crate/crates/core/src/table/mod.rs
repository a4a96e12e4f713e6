//! Table series instances: binding, cell genesis, and the checks run on ingested tables.

mod check;
mod format;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::dictionary::{base_name, Aliases, Bindings, Dictionary, Genesis, GenesisEntry};
use crate::lang::{DictExpr, EvalError, SeriesDef, Workspace};
use crate::scale::parents;
use crate::universe::Universe;

pub use check::{delta_check, missing_tables, validate, DeltaFinding, Finding, Slot, DEFAULT_DELTA_THRESHOLD};
pub use format::{parse_table, write_raw, write_table, RawTable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TableError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("unknown series `{0}`")]
    UnknownSeries(String),
    #[error("`{label}` is not an element of `{dimension}`")]
    UnknownElement { dimension: String, label: String },
    #[error("`{0}` is not an attribute of the series")]
    UnknownAttribute(String),
    #[error("attribute `{0}` is not bound")]
    MissingAttribute(String),
    #[error("`{dimension}` is bound to both `{first}` and `{second}`")]
    BindingConflict { dimension: String, first: String, second: String },
    #[error("no unique table name is compatible with the attributes of this `{0}` table")]
    AmbiguousName(String),
    #[error("names of series `{0}` range over an infinite universe")]
    InfiniteNameSpace(String),
    #[error("tables belong to different series: `{0}` and `{1}`")]
    SeriesMismatch(String, String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum CellValue {
    Empty,
    Num(f64),
    Text(String),
}

impl CellValue {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            CellValue::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, CellValue::Empty)
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellValue::Empty => f.write_str("-"),
            CellValue::Num(v) => write!(f, "{v}"),
            CellValue::Text(t) => f.write_str(t),
        }
    }
}

/// One table row. Every cell of the row shares the row's genesis, since cell genesis
/// leaves out the column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    /// Labels from the top section down to this row.
    pub path: Vec<String>,
    pub header: bool,
    /// False when the label is not in the instance row dictionary.
    pub known: bool,
    pub genesis: Genesis,
    pub values: Vec<CellValue>,
}

impl Row {
    pub fn label(&self) -> &str {
        self.path.last().map(String::as_str).unwrap_or("")
    }
}

/// A cell with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell<'a> {
    pub value: &'a CellValue,
    pub genesis: &'a Genesis,
}

/// Identity of a table within its series.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TableKey {
    pub series: String,
    pub name: Option<String>,
    pub attrs: Vec<(String, String)>,
}

impl fmt::Display for TableKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.series)?;
        if let Some(n) = &self.name {
            write!(f, " name={n}")?;
        }
        for (d, v) in &self.attrs {
            write!(f, " {d}={v}")?;
        }
        Ok(())
    }
}

/// A table instance. Cells are held in series orientation; `transposed` only changes
/// how the table is laid out when written.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub series: String,
    pub name: Option<String>,
    /// Attribute bindings in series item order.
    pub attrs: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
    pub transposed: bool,
}

impl Table {
    pub fn key(&self) -> TableKey {
        let mut attrs = self.attrs.clone();
        attrs.sort();
        TableKey {
            series: self.series.clone(),
            name: self.name.clone(),
            attrs,
        }
    }

    pub fn column_index(&self, column: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == column)
    }

    pub fn row(&self, path: &[&str]) -> Option<&Row> {
        self.rows.iter().find(|r| r.path.iter().map(String::as_str).eq(path.iter().copied()))
    }

    /// Cell at a row path and column, in series orientation.
    pub fn cell(&self, path: &[&str], column: &str) -> Option<Cell<'_>> {
        let c = self.column_index(column)?;
        let row = self.row(path)?;
        Some(Cell {
            value: &row.values[c],
            genesis: &row.genesis,
        })
    }

    pub fn set(&mut self, path: &[&str], column: &str, value: CellValue) -> bool {
        let Some(c) = self.column_index(column) else { return false };
        match self.rows.iter_mut().find(|r| r.path.iter().map(String::as_str).eq(path.iter().copied())) {
            Some(row) => {
                row.values[c] = value;
                true
            }
            None => false,
        }
    }

    /// Swap the presentation axes. Values and genesis are untouched.
    pub fn transpose(&self) -> Table {
        let mut t = self.clone();
        t.transposed = !t.transposed;
        t
    }

    /// Presentation axes: (row labels, column labels) after applying `transposed`.
    pub fn axes(&self) -> (Vec<String>, Vec<String>) {
        let rows: Vec<String> = self.rows.iter().map(|r| r.label().to_string()).collect();
        if self.transposed {
            (self.columns.clone(), rows)
        } else {
            (rows, self.columns.clone())
        }
    }

    /// Value grid in presentation orientation.
    pub fn grid(&self) -> Vec<Vec<&CellValue>> {
        if self.transposed {
            (0..self.columns.len()).map(|c| self.rows.iter().map(|r| &r.values[c]).collect()).collect()
        } else {
            self.rows.iter().map(|r| r.values.iter().collect()).collect()
        }
    }
}

/// One attribute dimension of a series.
#[derive(Debug, Clone)]
pub struct Item<'a> {
    pub dimension: String,
    pub expr: &'a DictExpr,
    /// Set for free-valued context dimensions.
    pub context: Option<&'a Universe>,
}

fn expr_dimension(e: &DictExpr) -> Option<&str> {
    match e {
        DictExpr::Name(n) | DictExpr::Hierarchy(n, _) => Some(n),
        _ => None,
    }
}

pub fn series_def<'a>(ws: &'a Workspace, series: &str) -> Result<&'a SeriesDef, TableError> {
    ws.series.get(series).ok_or_else(|| TableError::UnknownSeries(series.to_string()))
}

pub fn series_items<'a>(ws: &'a Workspace, series: &str) -> Result<Vec<Item<'a>>, TableError> {
    let def = series_def(ws, series)?;
    def.attrs
        .iter()
        .map(|e| {
            let context = ws.context_universe(e);
            let dimension = match expr_dimension(e) {
                Some(d) => d.to_string(),
                None => ws.env().eval_dict(e)?.name,
            };
            Ok(Item {
                dimension,
                expr: e,
                context,
            })
        })
        .collect()
}

/// The names dictionary of a series, if it has one.
pub fn names_dictionary(ws: &Workspace, series: &str) -> Result<Option<Dictionary>, TableError> {
    let def = series_def(ws, series)?;
    let Some(e) = &def.names else { return Ok(None) };
    if let Some(u) = ws.context_universe(e) {
        return match u.members() {
            Some(m) => {
                let labels: Vec<&str> = m.iter().map(String::as_str).collect();
                Ok(Some(Dictionary::make(u.name(), u, &labels).map_err(EvalError::from)?))
            }
            None => Err(TableError::InfiniteNameSpace(series.to_string())),
        };
    }
    Ok(Some(ws.env().eval_dict(e)?))
}

fn project(g: &Genesis) -> Genesis {
    g.dimensions(&Aliases::new())
}

/// Fold single-valued dimensions of `coords` into `bindings`.
fn bind(bindings: &mut Bindings, coords: &Genesis, aliases: &Aliases) -> Result<(), TableError> {
    let projected = project(coords);
    let mut dims: std::collections::BTreeMap<&str, Vec<&str>> = std::collections::BTreeMap::new();
    for e in projected.iter() {
        dims.entry(e.dictionary_name.as_str()).or_default().push(e.element_label.as_str());
    }
    for (dim, labels) in dims {
        if labels.len() != 1 {
            continue;
        }
        let canonical = aliases.canonical(dim).to_string();
        match bindings.get(&canonical) {
            Some(existing) if existing != labels[0] => {
                return Err(TableError::BindingConflict {
                    dimension: canonical,
                    first: existing.clone(),
                    second: labels[0].to_string(),
                })
            }
            _ => {
                bindings.insert(canonical, labels[0].to_string());
            }
        }
    }
    Ok(())
}

/// Bindings and fixed cell-genesis part of one table instance.
#[derive(Debug, Clone)]
pub struct Instance {
    pub name: Option<String>,
    pub attrs: Vec<(String, String)>,
    pub bindings: Bindings,
    /// Genesis from the name and attributes, shared by every cell.
    pub fixed: Genesis,
    pub rows: Dictionary,
    pub columns: Dictionary,
}

impl Instance {
    /// Cell genesis for entry `i` of the instance row dictionary, including its ancestors.
    pub fn row_genesis(&self, i: usize, parent: &[Option<usize>]) -> Genesis {
        let mut g = self.fixed.clone();
        let mut cur = Some(i);
        while let Some(k) = cur {
            g.extend(&project(&self.rows.coordinates(&self.rows.entries[k])));
            cur = parent[k];
        }
        g
    }

    fn unknown_row_genesis(&self, label: &str, parent: Option<usize>, parents: &[Option<usize>]) -> Genesis {
        let mut g = match parent {
            Some(p) => self.row_genesis(p, parents),
            None => self.fixed.clone(),
        };
        if !crate::dictionary::is_tuple_label(label) {
            g.insert(GenesisEntry::new(base_name(&self.rows.name), label));
        }
        g
    }
}

/// Resolve name and attribute bindings of an instance.
pub fn instance(ws: &Workspace, series: &str, name: Option<&str>, attrs: &[(&str, &str)]) -> Result<Instance, TableError> {
    let def = series_def(ws, series)?;
    let items = series_items(ws, series)?;
    for (dim, _) in attrs {
        if !items.iter().any(|i| i.dimension == *dim) {
            return Err(TableError::UnknownAttribute(dim.to_string()));
        }
    }
    let mut bindings = Bindings::new();
    let mut fixed = Genesis::new();
    let mut bound_attrs = Vec::new();
    for item in &items {
        let Some((_, label)) = attrs.iter().find(|(d, _)| *d == item.dimension) else {
            return Err(TableError::MissingAttribute(item.dimension.clone()));
        };
        let label = label.trim();
        let coords = match item.context {
            Some(u) => {
                if !u.contains(label) {
                    return Err(TableError::UnknownElement {
                        dimension: item.dimension.clone(),
                        label: label.to_string(),
                    });
                }
                Genesis::single(item.dimension.clone(), label)
            }
            None => {
                let d = ws.env().eval_dict(item.expr)?;
                let e = d.get(label).ok_or_else(|| TableError::UnknownElement {
                    dimension: item.dimension.clone(),
                    label: label.to_string(),
                })?;
                d.coordinates(e)
            }
        };
        bind(&mut bindings, &coords, &ws.aliases)?;
        fixed.extend(&project(&coords));
        bound_attrs.push((item.dimension.clone(), label.to_string()));
    }
    let name = match (names_dictionary(ws, series)?, name) {
        (None, None) => None,
        (None, Some(n)) => {
            return Err(TableError::UnknownElement {
                dimension: "names".into(),
                label: n.to_string(),
            })
        }
        (Some(names), given) => {
            let e = match given {
                Some(n) => names.get(n).ok_or_else(|| TableError::UnknownElement {
                    dimension: names.name.clone(),
                    label: n.to_string(),
                })?,
                None => {
                    let fits: Vec<_> = names
                        .entries
                        .iter()
                        .filter(|e| {
                            let mut b = bindings.clone();
                            bind(&mut b, &names.coordinates(e), &ws.aliases).is_ok()
                        })
                        .collect();
                    match fits.as_slice() {
                        [one] => *one,
                        _ => return Err(TableError::AmbiguousName(series.to_string())),
                    }
                }
            };
            let coords = names.coordinates(e);
            bind(&mut bindings, &coords, &ws.aliases)?;
            fixed.extend(&project(&coords));
            Some(e.label.clone())
        }
    };
    let env = crate::lang::Env::with_bindings(ws, &bindings);
    let rows = env.eval_dict(&def.rows)?;
    let columns = env.eval_dict(&def.columns)?;
    Ok(Instance {
        name,
        attrs: bound_attrs,
        bindings,
        fixed,
        rows,
        columns,
    })
}

fn depths(d: &Dictionary) -> Vec<usize> {
    d.entries.iter().map(|e| e.depth).collect()
}

/// Empty table with every instance row and column.
pub fn instantiate(ws: &Workspace, series: &str, name: Option<&str>, attrs: &[(&str, &str)]) -> Result<Table, TableError> {
    let inst = instance(ws, series, name, attrs)?;
    let parent = parents(&depths(&inst.rows));
    let columns: Vec<String> = inst.columns.labels().into_iter().map(str::to_string).collect();
    let mut rows = Vec::with_capacity(inst.rows.len());
    for (i, e) in inst.rows.entries.iter().enumerate() {
        let mut path = vec![e.label.clone()];
        let mut cur = parent[i];
        while let Some(p) = cur {
            path.insert(0, inst.rows.entries[p].label.clone());
            cur = parent[p];
        }
        rows.push(Row {
            path,
            header: e.header,
            known: true,
            genesis: inst.row_genesis(i, &parent),
            values: vec![CellValue::Empty; columns.len()],
        });
    }
    Ok(Table {
        series: series.to_string(),
        name: inst.name,
        attrs: inst.attrs,
        columns,
        rows,
        transposed: false,
    })
}

/// Turn a parsed table file into a table: rows are matched against the instance row
/// tree; labels outside it are kept as unknown rows next to their predecessor.
pub fn bind_table(ws: &Workspace, raw: &RawTable) -> Result<Table, TableError> {
    let attrs: Vec<(&str, &str)> = raw.attrs.iter().map(|(d, v)| (d.as_str(), v.as_str())).collect();
    let inst = instance(ws, &raw.series, raw.name.as_deref(), &attrs)?;
    let entries = &inst.rows.entries;
    let parent = parents(&depths(&inst.rows));
    let parent = &parent;
    let children = |p: Option<usize>| (0..entries.len()).filter(move |&i| parent[i] == p);
    // current path; `None` marks a row outside the instance tree
    let mut stack: Vec<(Option<usize>, String)> = Vec::new();
    let mut rows = Vec::with_capacity(raw.rows.len());
    for (label, raw_values) in &raw.rows {
        let mut found = None;
        for level in (0..=stack.len()).rev() {
            let p = match level {
                0 => None,
                _ => match stack[level - 1].0 {
                    Some(node) => Some(node),
                    None => continue,
                },
            };
            if let Some(i) = children(p).find(|&i| entries[i].label == *label) {
                found = Some((level, i));
                break;
            }
        }
        let (node, header, genesis) = match found {
            Some((level, i)) => {
                stack.truncate(level);
                (Some(i), entries[i].header, inst.row_genesis(i, parent))
            }
            None => {
                stack.truncate(stack.len().saturating_sub(1));
                let p = stack.last().and_then(|(n, _)| *n);
                (None, false, inst.unknown_row_genesis(label, p, parent))
            }
        };
        stack.push((node, label.clone()));
        let mut values: Vec<CellValue> = raw_values
            .iter()
            .zip(&raw.columns)
            .map(|(v, c)| interpret(ws, &raw.series, c, v))
            .collect();
        values.resize(raw.columns.len(), CellValue::Empty);
        rows.push(Row {
            path: stack.iter().map(|(_, l)| l.clone()).collect(),
            header,
            known: node.is_some(),
            genesis,
            values,
        });
    }
    Ok(Table {
        series: raw.series.clone(),
        name: inst.name,
        attrs: inst.attrs,
        columns: raw.columns.clone(),
        rows,
        transposed: raw.transposed,
    })
}

/// Parse a raw cell according to the column's value universe. Values that fail to
/// parse are kept as text and reported by validation.
pub fn interpret(ws: &Workspace, series: &str, column: &str, raw: &str) -> CellValue {
    let raw = raw.trim();
    if raw == "-" || raw.is_empty() {
        return CellValue::Empty;
    }
    let numeric = ws
        .universes
        .get(ws.column_universe(series, column))
        .is_some_and(|u| u.kind().is_numeric());
    match raw.parse::<f64>() {
        Ok(v) if numeric && v.is_finite() => CellValue::Num(v),
        _ => CellValue::Text(raw.to_string()),
    }
}

#[cfg(test)]
mod tests;
