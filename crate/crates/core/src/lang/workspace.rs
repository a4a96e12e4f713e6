use std::collections::{BTreeSet, HashSet};
use std::fmt;

use indexmap::IndexMap;
use serde::Serialize;

use super::ast::*;
use super::eval::{Env, EvalError};
use super::parser::{parse_file, Spanned};
use crate::dictionary::{Aliases, Dictionary, Family};
use crate::scale::{Level, Scale, ScaleRegistry};
use crate::universe::{Universe, UniverseKind, REALS};

/// A named source text.
#[derive(Debug, Clone)]
pub struct Source {
    pub name: String,
    pub text: String,
}

impl Source {
    pub fn new(name: impl Into<String>, text: impl Into<String>) -> Self {
        Source {
            name: name.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Diagnostic {
    pub source: String,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl Diagnostic {
    pub fn new(source: impl Into<String>, line: usize, col: usize, message: impl Into<String>) -> Self {
        Diagnostic {
            source: source.into(),
            line,
            col,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.source.is_empty() {
            return f.write_str(&self.message);
        }
        write!(f, "{}:{}:{}: {}", self.source, self.line, self.col, self.message)
    }
}

/// Everything a set of definition files declares, resolved by name.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub universes: IndexMap<String, Universe>,
    pub dictionaries: IndexMap<String, Dictionary>,
    pub families: IndexMap<String, Family>,
    pub series: IndexMap<String, SeriesDef>,
    pub scales: ScaleRegistry,
    pub rules: IndexMap<String, RuleDef>,
    pub aliases: Aliases,
    pub inits: Vec<InitDecl>,
    /// Declarations in load order; printing them reproduces the workspace.
    pub decls: Vec<Decl>,
}

impl Default for Workspace {
    fn default() -> Self {
        Workspace {
            universes: Universe::builtins().into_iter().map(|u| (u.name().to_string(), u)).collect(),
            dictionaries: IndexMap::new(),
            families: IndexMap::new(),
            series: IndexMap::new(),
            scales: ScaleRegistry::new(),
            rules: IndexMap::new(),
            aliases: Aliases::new(),
            inits: Vec::new(),
            decls: Vec::new(),
        }
    }
}

#[derive(Debug)]
pub struct Loaded {
    pub workspace: Workspace,
    /// Non-fatal findings, such as family members that were never filled.
    pub warnings: Vec<Diagnostic>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn env(&self) -> Env<'_> {
        Env::new(self)
    }

    /// An attribute item naming a universe, rather than a dictionary, is a free-valued
    /// context dimension.
    pub fn context_universe(&self, item: &DictExpr) -> Option<&Universe> {
        match item {
            DictExpr::Name(n) if !self.dictionaries.contains_key(n) && !self.families.contains_key(n) => self.universes.get(n),
            _ => None,
        }
    }

    /// Columns of a series evaluated without instance bindings.
    pub fn series_columns(&self, series: &str) -> Result<Dictionary, EvalError> {
        let s = self.series.get(series).ok_or_else(|| EvalError::UnboundName(series.to_string()))?;
        self.env().eval_dict(&s.columns)
    }

    /// Value universe of a series column: declared, else RealR for ratio and CharC otherwise.
    pub fn column_universe(&self, series: &str, column: &str) -> &str {
        match self.scales.column_universe(series, column) {
            Some(u) => u,
            None if self.scales.column(series, column).level == Level::Ratio => REALS,
            None => crate::universe::STRINGS,
        }
    }

    /// Render the workspace as one definition file.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        for d in &self.decls {
            out.push_str(&d.to_string());
            out.push('\n');
        }
        out
    }
}

fn phase(d: &Decl) -> u8 {
    match d {
        Decl::Universe { .. } => 0,
        Decl::Alias { .. } => 1,
        Decl::Dict { .. } | Decl::DictExpr { .. } | Decl::Family { .. } | Decl::Member { .. } => 2,
        Decl::Scale { .. } | Decl::Oper(_) => 3,
        Decl::Series(_) => 4,
        Decl::Rule(_) => 5,
        Decl::Init(_) => 6,
    }
}

/// Stable topological order of a rule's pointwise formulas (indices into `formulas`).
pub fn pointwise_order(rule: &RuleDef) -> Result<Vec<usize>, String> {
    let pointwise: Vec<usize> = (0..rule.formulas.len())
        .filter(|&i| matches!(rule.formulas[i].body, FormulaBody::Arith(_)))
        .collect();
    let target_of = |i: usize| &rule.formulas[i].target;
    let deps: Vec<BTreeSet<usize>> = pointwise
        .iter()
        .map(|&i| {
            let FormulaBody::Arith(a) = &rule.formulas[i].body else { unreachable!() };
            a.columns().into_iter().filter_map(|c| pointwise.iter().copied().find(|&j| target_of(j) == c)).collect()
        })
        .collect();
    let mut done: Vec<usize> = Vec::new();
    let mut remaining: Vec<usize> = (0..pointwise.len()).collect();
    while !remaining.is_empty() {
        let ready = remaining.iter().position(|&k| deps[k].iter().all(|d| done.contains(d)));
        match ready {
            Some(pos) => done.push(pointwise[remaining.remove(pos)]),
            None => {
                let cycle: Vec<String> = remaining.iter().map(|&k| target_of(pointwise[k]).to_string()).collect();
                return Err(format!("rule `{}` has cyclic formulas over {}", rule.name, cycle.join(", ")));
            }
        }
    }
    Ok(done)
}

struct Builder {
    ws: Workspace,
    errors: Vec<Diagnostic>,
    filled: HashSet<(String, Vec<String>)>,
}

impl Builder {
    fn err(&mut self, at: &(String, usize, usize), message: impl Into<String>) {
        self.errors.push(Diagnostic::new(at.0.clone(), at.1, at.2, message));
    }

    fn name_taken(&self, name: &str) -> bool {
        self.ws.dictionaries.contains_key(name) || self.ws.families.contains_key(name)
    }

    fn apply(&mut self, at: &(String, usize, usize), decl: &Decl) {
        match decl {
            Decl::Universe { name, kind, members } => {
                if self.ws.universes.contains_key(name) {
                    return self.err(at, format!("universe `{name}` is already defined"));
                }
                let result = kind
                    .parse::<UniverseKind>()
                    .and_then(|k| Universe::define(name.clone(), k, members.clone()));
                match result {
                    Ok(u) => {
                        self.ws.universes.insert(name.clone(), u);
                    }
                    Err(e) => self.err(at, e.to_string()),
                }
            }
            Decl::Alias { alias, canonical } => {
                if !self.ws.aliases.declare(alias.clone(), canonical.clone()) {
                    self.err(at, format!("alias `{alias} = {canonical}` forms a cycle"));
                }
            }
            Decl::Dict { name, universe, members } => {
                if self.name_taken(name) {
                    return self.err(at, format!("dictionary `{name}` is already defined"));
                }
                let Some(u) = self.ws.universes.get(universe) else {
                    return self.err(at, format!("unbound name `{universe}`"));
                };
                let labels: Vec<&str> = members.iter().map(String::as_str).collect();
                match Dictionary::make(name.clone(), u, &labels) {
                    Ok(d) => {
                        self.ws.dictionaries.insert(name.clone(), d);
                    }
                    Err(e) => self.err(at, e.to_string()),
                }
            }
            Decl::DictExpr { name, expr } => {
                if self.name_taken(name) {
                    return self.err(at, format!("dictionary `{name}` is already defined"));
                }
                match self.ws.env().eval_dict(expr) {
                    Ok(d) => {
                        self.ws.dictionaries.insert(name.clone(), d.renamed(name.clone()));
                    }
                    Err(e) => self.err(at, e.to_string()),
                }
            }
            Decl::Family { name, params, universe } => {
                if self.name_taken(name) {
                    return self.err(at, format!("family `{name}` is already defined"));
                }
                let u = match universe {
                    Some(u) => match self.ws.universes.get(u) {
                        Some(u) => Some(u),
                        None => return self.err(at, format!("unbound name `{u}`")),
                    },
                    None => None,
                };
                let params: Result<Vec<Dictionary>, EvalError> = params.iter().map(|p| self.ws.env().eval_dict(p)).collect();
                match params.map_err(|e| e.to_string()).and_then(|p| Family::hierarchy(name.clone(), p, u).map_err(|e| e.to_string())) {
                    Ok(f) => {
                        self.ws.families.insert(name.clone(), f);
                    }
                    Err(e) => self.err(at, e),
                }
            }
            Decl::Member { family, key, universe, members } => {
                if !self.filled.insert((family.clone(), key.clone())) {
                    return self.err(at, format!("member `{family}({})` is defined twice", key.join(",")));
                }
                let Some(u) = self.ws.universes.get(universe).cloned() else {
                    return self.err(at, format!("unbound name `{universe}`"));
                };
                let Some(f) = self.ws.families.get_mut(family) else {
                    return self.err(at, format!("unbound name `{family}`"));
                };
                let key: Vec<&str> = key.iter().map(String::as_str).collect();
                let labels: Vec<&str> = members.iter().map(String::as_str).collect();
                if let Err(e) = f.fill(&key, &u, &labels) {
                    self.err(at, e.to_string());
                }
            }
            Decl::Scale {
                target,
                level,
                unit,
                universe,
            } => {
                if let Some(u) = universe {
                    if !self.ws.universes.contains_key(u) {
                        return self.err(at, format!("unbound name `{u}`"));
                    }
                }
                self.ws.scales.declare(target.clone(), Scale::new(*level, unit.as_deref()), universe.clone());
            }
            Decl::Oper(entry) => {
                if let Err(e) = self.ws.scales.register(entry.clone()) {
                    self.err(at, e.to_string());
                }
            }
            Decl::Series(s) => self.series(at, s),
            Decl::Rule(r) => self.rule(at, r),
            Decl::Init(i) => {
                if !self.ws.rules.contains_key(&i.rule) {
                    return self.err(at, format!("unknown rule `{}`", i.rule));
                }
                self.ws.inits.push(i.clone());
            }
        }
    }

    fn series(&mut self, at: &(String, usize, usize), s: &SeriesDef) {
        if self.ws.series.contains_key(&s.type_name) {
            return self.err(at, format!("series `{}` is already defined", s.type_name));
        }
        let exprs = s.names.iter().chain(&s.attrs).filter(|a| self.ws.context_universe(a).is_none());
        let failures: Vec<String> = exprs
            .chain([&s.columns, &s.rows])
            .filter_map(|e| self.ws.env().eval(e).err())
            .map(|err| format!("series `{}`: {err}", s.type_name))
            .collect();
        let failed = !failures.is_empty();
        for f in failures {
            self.err(at, f);
        }
        if !failed {
            self.ws.series.insert(s.type_name.clone(), s.clone());
        }
    }

    fn column_scale(&self, c: &ColumnRef) -> (String, Scale) {
        (self.ws.column_universe(&c.series, &c.column).to_string(), self.ws.scales.column(&c.series, &c.column))
    }

    fn arith_scale(&self, a: &Arith) -> Result<(String, Scale), String> {
        match a {
            Arith::Num(_) => Ok((REALS.to_string(), Scale::ratio(None))),
            Arith::Col(c) => Ok(self.column_scale(c)),
            Arith::Bin(op, l, r) => {
                let (l, r) = (self.arith_scale(l)?, self.arith_scale(r)?);
                let name = match op {
                    ArithOp::Add => "add",
                    ArithOp::Sub => "sub",
                    ArithOp::Div => "div",
                    ArithOp::Mul if l.1.is_dimensionless() || r.1.is_dimensionless() => "scalar_mul",
                    ArithOp::Mul => "mul",
                };
                self.ws
                    .scales
                    .check_applicable(name, &[l, r])
                    .map(|s| (REALS.to_string(), s))
                    .map_err(|e| e.to_string())
            }
        }
    }

    fn rule(&mut self, at: &(String, usize, usize), r: &RuleDef) {
        if self.ws.rules.contains_key(&r.name) {
            return self.err(at, format!("rule `{}` is already defined", r.name));
        }
        let before = self.errors.len();
        for t in r.inputs.iter().chain(&r.outputs) {
            if !self.ws.series.contains_key(t) {
                self.err(at, format!("rule `{}`: unknown series `{t}`", r.name));
            }
        }
        if r.outputs.is_empty() {
            self.err(at, format!("rule `{}` has no output series", r.name));
        }
        if self.errors.len() > before {
            return;
        }
        let mut targets = HashSet::new();
        for f in &r.formulas {
            if !targets.insert(&f.target) {
                self.err(at, format!("rule `{}`: column `{}` has two formulas", r.name, f.target));
            }
            let mut refs = vec![(&f.target, &r.outputs, "output")];
            match &f.body {
                FormulaBody::Accum(_, src) => refs.push((src, &r.inputs, "input")),
                FormulaBody::Arith(a) => refs.extend(a.columns().into_iter().map(|c| (c, &r.outputs, "output"))),
            }
            for (c, allowed, role) in refs {
                if !allowed.contains(&c.series) {
                    self.err(at, format!("rule `{}`: `{c}` is not in the rule's {role} series", r.name));
                    continue;
                }
                match self.ws.series_columns(&c.series) {
                    Ok(cols) if cols.contains(&c.column) => {}
                    Ok(_) => self.err(at, format!("rule `{}`: unknown column `{c}`", r.name)),
                    Err(e) => self.err(at, format!("rule `{}`: {e}", r.name)),
                }
            }
        }
        if self.errors.len() > before {
            return;
        }
        for f in &r.formulas {
            let result = match &f.body {
                FormulaBody::Accum(func, src) => self
                    .ws
                    .scales
                    .check_applicable(func.as_str(), &[self.column_scale(src)])
                    .map_err(|e| e.to_string()),
                FormulaBody::Arith(a) => self.arith_scale(a).map(|(_, s)| s),
            };
            match result {
                Err(e) => self.err(at, format!("rule `{}`: scale violation in `{f}`: {e}", r.name)),
                Ok(s) => {
                    let declared = self.ws.scales.column(&f.target.series, &f.target.column);
                    if self.ws.scales.lookup_column(&f.target.series, &f.target.column).is_some() && declared != s {
                        self.err(at, format!("rule `{}`: `{f}` yields {s} but `{}` is declared {declared}", r.name, f.target));
                    }
                }
            }
        }
        if let Err(e) = pointwise_order(r) {
            self.err(at, e);
        }
        if self.errors.len() == before {
            self.ws.rules.insert(r.name.clone(), r.clone());
        }
    }

    fn warnings(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for f in self.ws.families.values() {
            for (key, m) in &f.members {
                if !self.filled.contains(&(f.base_name.clone(), key.clone())) {
                    out.push(Diagnostic::new("", 0, 0, format!("family member `{}` is not filled", m.dictionary.name)));
                }
            }
        }
        out
    }
}

/// Load declarations from every source. Any error fails the whole load and every
/// error found is reported.
pub fn parse_workspace(sources: &[Source]) -> Result<Loaded, Vec<Diagnostic>> {
    let mut errors = Vec::new();
    let mut decls: Vec<((String, usize, usize), Decl)> = Vec::new();
    for src in sources {
        match parse_file(&src.text) {
            Ok(ds) => decls.extend(ds.into_iter().map(|Spanned { line, col, node }| ((src.name.clone(), line, col), node))),
            Err(es) => errors.extend(es.into_iter().map(|e| Diagnostic::new(src.name.clone(), e.line, e.col, e.message))),
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    let mut b = Builder {
        ws: Workspace::new(),
        errors,
        filled: HashSet::new(),
    };
    let mut ordered: Vec<&((String, usize, usize), Decl)> = decls.iter().collect();
    ordered.sort_by_key(|(_, d)| phase(d));
    for (at, d) in ordered {
        b.apply(at, d);
    }
    if !b.errors.is_empty() {
        return Err(b.errors);
    }
    let warnings = b.warnings();
    b.ws.decls = decls.into_iter().map(|(_, d)| d).collect();
    Ok(Loaded {
        workspace: b.ws,
        warnings,
    })
}
