//! The line-oriented table file format.
//!
//! ```text
//! table EXPENSE-REPORT
//! attr DEP = d21
//! columns: expenses, personal
//! row p21 : 3, 2
//! ```
//!
//! `layout transposed` swaps the meaning of `columns:` and `row` lines.

use super::{Table, TableError};

/// A table file before it is bound to a workspace, in series orientation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawTable {
    pub series: String,
    pub name: Option<String>,
    pub attrs: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<String>)>,
    pub transposed: bool,
}

fn syntax(line: usize, message: impl Into<String>) -> TableError {
    TableError::Syntax {
        line,
        message: message.into(),
    }
}

fn split_list(s: &str) -> Vec<String> {
    if s.trim().is_empty() {
        return Vec::new();
    }
    s.split(',').map(|v| v.trim().to_string()).collect()
}

pub fn parse_table(text: &str) -> Result<RawTable, TableError> {
    let mut raw = RawTable::default();
    let mut header_seen = false;
    let mut columns_seen = false;
    let mut lines: Vec<(String, Vec<String>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (word, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        if !header_seen {
            if word != "table" {
                return Err(syntax(n, "expected `table TYPE`"));
            }
            let (series, tail) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
            if series.is_empty() {
                return Err(syntax(n, "missing series type"));
            }
            raw.series = series.to_string();
            let tail = tail.trim();
            if !tail.is_empty() {
                let value = tail
                    .strip_prefix("name")
                    .and_then(|t| t.trim_start().strip_prefix('='))
                    .ok_or_else(|| syntax(n, "expected `name = ELEMENT`"))?;
                let value = value.trim();
                if value != "-" {
                    raw.name = Some(value.to_string());
                }
            }
            header_seen = true;
            continue;
        }
        match word {
            "attr" => {
                let (dim, value) = rest.split_once('=').ok_or_else(|| syntax(n, "expected `attr DIM = ELEMENT`"))?;
                let dim = dim.trim().to_string();
                if raw.attrs.iter().any(|(d, _)| *d == dim) {
                    return Err(syntax(n, format!("attribute `{dim}` given twice")));
                }
                raw.attrs.push((dim, value.trim().to_string()));
            }
            "layout" => match rest {
                "transposed" if !columns_seen => raw.transposed = true,
                "transposed" => return Err(syntax(n, "`layout` must precede `columns:`")),
                _ => return Err(syntax(n, format!("unknown layout `{rest}`"))),
            },
            "row" => {
                if !columns_seen {
                    return Err(syntax(n, "`row` before `columns:`"));
                }
                let (label, values) = rest.split_once(':').unwrap_or((rest, ""));
                let label = label.trim();
                if label.is_empty() {
                    return Err(syntax(n, "missing row label"));
                }
                lines.push((label.to_string(), split_list(values)));
            }
            _ if line.starts_with("columns:") => {
                if columns_seen {
                    return Err(syntax(n, "`columns:` given twice"));
                }
                columns_seen = true;
                raw.columns = split_list(&line["columns:".len()..]);
            }
            other => return Err(syntax(n, format!("unknown line `{other}`"))),
        }
        if let Some((label, values)) = lines.last() {
            if values.len() > raw.columns.len() {
                return Err(syntax(n, format!("row `{label}` has {} values for {} columns", values.len(), raw.columns.len())));
            }
        }
    }
    if !header_seen {
        return Err(syntax(1, "empty table file"));
    }
    if raw.transposed {
        let row_labels = std::mem::take(&mut raw.columns);
        raw.columns = lines.iter().map(|(l, _)| l.clone()).collect();
        raw.rows = row_labels
            .into_iter()
            .enumerate()
            .map(|(r, label)| {
                let values = lines.iter().map(|(_, v)| v.get(r).cloned().unwrap_or_else(|| "-".into())).collect();
                (label, values)
            })
            .collect();
    } else {
        raw.rows = lines;
    }
    Ok(raw)
}

pub fn write_raw(raw: &RawTable) -> String {
    let mut out = format!("table {}", raw.series);
    if let Some(n) = &raw.name {
        out.push_str(&format!(" name = {n}"));
    }
    out.push('\n');
    for (d, v) in &raw.attrs {
        out.push_str(&format!("attr {d} = {v}\n"));
    }
    let cell = |v: &str| if v.is_empty() { "-".to_string() } else { v.to_string() };
    let mut body = String::new();
    if raw.transposed {
        body.push_str("layout transposed\n");
        let labels: Vec<&str> = raw.rows.iter().map(|(l, _)| l.as_str()).collect();
        body.push_str(&format!("columns: {}\n", labels.join(", ")));
    } else {
        body.push_str(&format!("columns: {}\n", raw.columns.join(", ")));
    }
    out.push_str(&body);
    let mut push = |label: &str, values: Vec<String>| {
        out.push_str(&format!("row {label} :"));
        if !values.is_empty() {
            out.push(' ');
            out.push_str(&values.join(", "));
        }
        out.push('\n');
    };
    if raw.transposed {
        for (c, col) in raw.columns.iter().enumerate() {
            push(col, raw.rows.iter().map(|(_, v)| cell(v.get(c).map(String::as_str).unwrap_or("-"))).collect());
        }
    } else {
        for (label, values) in &raw.rows {
            push(label, values.iter().map(|v| cell(v)).collect());
        }
    }
    out
}

impl From<&Table> for RawTable {
    fn from(t: &Table) -> Self {
        RawTable {
            series: t.series.clone(),
            name: t.name.clone(),
            attrs: t.attrs.clone(),
            columns: t.columns.clone(),
            rows: t
                .rows
                .iter()
                .map(|r| (r.label().to_string(), r.values.iter().map(ToString::to_string).collect()))
                .collect(),
            transposed: t.transposed,
        }
    }
}

/// Canonical text of a table. Numbers use the shortest round-trip decimal form.
pub fn write_table(t: &Table) -> String {
    write_raw(&RawTable::from(t))
}
