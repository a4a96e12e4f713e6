//! Measurement scales and the operS registry deciding which operations make sense.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::dictionary::Dictionary;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScaleError {
    #[error("operation `{op}` is already registered for ({args})")]
    DuplicateSignature { op: String, args: String },
    #[error("operation `{op}` is not applicable to ({args})")]
    NotApplicable { op: String, args: String },
    #[error("selection mixes hierarchy levels")]
    MixedLevels,
    #[error("selection is only part of one hierarchy level")]
    PartialLevel,
    #[error("operS entry `{0}` needs at least one argument")]
    EmptySignature(String),
    #[error("unknown scale level `{0}`")]
    UnknownLevel(String),
}

/// Nominal < ordinal < ratio. Interval scales are folded into ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Nominal,
    Ordinal,
    Ratio,
}

impl FromStr for Level {
    type Err = ScaleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nominal" => Ok(Level::Nominal),
            "ordinal" => Ok(Level::Ordinal),
            "ratio" | "interval" => Ok(Level::Ratio),
            other => Err(ScaleError::UnknownLevel(other.to_string())),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Nominal => "nominal",
            Level::Ordinal => "ordinal",
            Level::Ratio => "ratio",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Scale {
    pub level: Level,
    /// `None` means dimensionless.
    pub unit: Option<String>,
}

impl Scale {
    pub fn new(level: Level, unit: Option<&str>) -> Self {
        let unit = unit.filter(|u| *u != "dimensionless").map(str::to_string);
        Scale { level, unit }
    }

    pub fn nominal() -> Self {
        Scale::new(Level::Nominal, None)
    }

    pub fn ordinal() -> Self {
        Scale::new(Level::Ordinal, None)
    }

    pub fn ratio(unit: Option<&str>) -> Self {
        Scale::new(Level::Ratio, unit)
    }

    pub fn boolean() -> Self {
        Scale::new(Level::Nominal, Some("boolean"))
    }

    pub fn is_dimensionless(&self) -> bool {
        self.unit.is_none()
    }

    pub fn admits(&self, op: &str) -> bool {
        match op {
            "eq" | "neq" | "count" => true,
            "lt" | "gt" | "max" | "min" => self.level >= Level::Ordinal,
            "sum" | "add" | "sub" | "scalar_mul" | "div" | "mul" => self.level >= Level::Ratio,
            _ => false,
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.level, self.unit.as_deref().unwrap_or("dimensionless"))
    }
}

/// `(function name, argument signature, result signature)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperSEntry {
    pub op_name: String,
    pub args: Vec<(String, Scale)>,
    pub result: (String, Scale),
}

/// Declared scale for a column or dictionary, plus the universe its values belong to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Declared {
    pub scale: Scale,
    pub universe: Option<String>,
}

fn render(args: &[(String, Scale)]) -> String {
    args.iter().map(|(u, s)| format!("{u} {s}")).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScaleRegistry {
    declared: IndexMap<String, Declared>,
    entries: Vec<OperSEntry>,
}

impl ScaleRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declare the scale of `target`: a dictionary name, a column label, or `SERIES.column`.
    pub fn declare(&mut self, target: impl Into<String>, scale: Scale, universe: Option<String>) {
        self.declared.insert(target.into(), Declared { scale, universe });
    }

    fn lookup(&self, series: Option<&str>, name: &str) -> Option<&Declared> {
        series
            .and_then(|s| self.declared.get(&format!("{s}.{name}")))
            .or_else(|| self.declared.get(name))
    }

    /// Scale of a column; undeclared targets default to nominal.
    pub fn column(&self, series: &str, column: &str) -> Scale {
        self.lookup(Some(series), column).map(|d| d.scale.clone()).unwrap_or_else(Scale::nominal)
    }

    pub fn lookup_column(&self, series: &str, column: &str) -> Option<&Declared> {
        self.lookup(Some(series), column)
    }

    pub fn column_universe(&self, series: &str, column: &str) -> Option<&str> {
        self.lookup(Some(series), column).and_then(|d| d.universe.as_deref())
    }

    pub fn dictionary(&self, name: &str) -> Scale {
        self.lookup(None, name).map(|d| d.scale.clone()).unwrap_or_else(Scale::nominal)
    }

    pub fn declared(&self) -> impl Iterator<Item = (&String, &Declared)> {
        self.declared.iter()
    }

    pub fn entries(&self) -> &[OperSEntry] {
        &self.entries
    }

    pub fn register(&mut self, entry: OperSEntry) -> Result<(), ScaleError> {
        if entry.args.is_empty() {
            return Err(ScaleError::EmptySignature(entry.op_name));
        }
        if self.entries.iter().any(|e| e.op_name == entry.op_name && e.args == entry.args) {
            return Err(ScaleError::DuplicateSignature {
                op: entry.op_name,
                args: render(&entry.args),
            });
        }
        self.entries.push(entry);
        Ok(())
    }

    /// Result scale of `op` over `args`, from an operS registration or the level rules.
    pub fn check_applicable(&self, op: &str, args: &[(String, Scale)]) -> Result<Scale, ScaleError> {
        if let Some(e) = self.entries.iter().find(|e| e.op_name == op && e.args == args) {
            return Ok(e.result.1.clone());
        }
        let scales: Vec<&Scale> = args.iter().map(|(_, s)| s).collect();
        builtin(op, &scales).ok_or_else(|| ScaleError::NotApplicable {
            op: op.to_string(),
            args: render(args),
        })
    }
}

fn same_unit(scales: &[&Scale]) -> bool {
    scales.windows(2).all(|w| w[0].unit == w[1].unit)
}

fn builtin(op: &str, args: &[&Scale]) -> Option<Scale> {
    if args.is_empty() || !args.iter().all(|s| s.admits(op)) {
        return None;
    }
    match (op, args) {
        ("eq" | "neq", [a, b]) if a.unit == b.unit => Some(Scale::boolean()),
        ("count", _) => Some(Scale::ratio(None)),
        ("lt" | "gt", [a, b]) if a.unit == b.unit => Some(Scale::boolean()),
        ("max" | "min" | "sum", _) if same_unit(args) => Some((*args[0]).clone()),
        ("add" | "sub", [a, b]) if a.unit == b.unit => Some((*a).clone()),
        ("scalar_mul" | "mul", [a, b]) if b.is_dimensionless() => Some((*a).clone()),
        ("scalar_mul" | "mul", [a, b]) if a.is_dimensionless() => Some((*b).clone()),
        ("div", [a, b]) if a.unit == b.unit => Some(Scale::ratio(None)),
        ("div", [a, b]) if b.is_dimensionless() => Some((*a).clone()),
        _ => None,
    }
}

/// Parent of each node of a pre-order tree given by depths; `None` is the root.
pub fn parents(depths: &[usize]) -> Vec<Option<usize>> {
    let mut stack: Vec<usize> = Vec::new();
    let mut out = Vec::with_capacity(depths.len());
    for (i, &d) in depths.iter().enumerate() {
        while stack.last().is_some_and(|&top| depths[top] >= d) {
            stack.pop();
        }
        out.push(stack.last().copied());
        stack.push(i);
    }
    out
}

/// Ok iff `selection` (positions in the tree) is exactly all children of one parent.
pub fn check_rollup(depths: &[usize], selection: &[usize]) -> Result<(), ScaleError> {
    let Some(&first) = selection.first() else {
        return Err(ScaleError::PartialLevel);
    };
    if selection.iter().any(|&i| i >= depths.len()) {
        return Err(ScaleError::PartialLevel);
    }
    if selection.iter().any(|&i| depths[i] != depths[first]) {
        return Err(ScaleError::MixedLevels);
    }
    let parent = parents(depths);
    let chosen: BTreeSet<usize> = selection.iter().copied().collect();
    let siblings: BTreeSet<usize> = (0..depths.len()).filter(|&i| parent[i] == parent[first]).collect();
    if chosen == siblings {
        Ok(())
    } else {
        Err(ScaleError::PartialLevel)
    }
}

/// Rollup admissibility over a sectioned dictionary; `selection` holds entry positions.
pub fn validate_rollup(hier: &Dictionary, selection: &[usize]) -> Result<(), ScaleError> {
    let depths: Vec<usize> = hier.entries.iter().map(|e| e.depth).collect();
    check_rollup(&depths, selection)
}

/// Position of the entry reached by following `path` (labels from the top level down).
pub fn resolve_path(hier: &Dictionary, path: &[&str]) -> Option<usize> {
    let depths: Vec<usize> = hier.entries.iter().map(|e| e.depth).collect();
    let parent = parents(&depths);
    let mut current: Option<usize> = None;
    for label in path {
        current = Some(
            (0..hier.entries.len()).find(|&i| parent[i] == current && hier.entries[i].label == *label)?,
        );
    }
    current
}
