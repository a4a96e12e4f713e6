use std::fmt;

use crate::dictionary::{OrderKind, SetOp};
use crate::scale::{Level, OperSEntry, Scale};

/// Dictionary expression.
#[derive(Debug, Clone, PartialEq)]
pub enum DictExpr {
    Name(String),
    Binary(SetOp, Box<DictExpr>, Box<DictExpr>),
    Order(OrderKind, Box<DictExpr>),
    Hierarchy(String, Vec<DictExpr>),
    Collapse(SetOp, Box<DictExpr>, Vec<String>),
    Expand(Box<DictExpr>, Vec<String>),
}

impl DictExpr {
    pub fn name(n: impl Into<String>) -> Self {
        DictExpr::Name(n.into())
    }

    /// Operands of a top-level chain of `cross`, left to right.
    pub fn cross_items(&self) -> Vec<&DictExpr> {
        match self {
            DictExpr::Binary(SetOp::Cross, l, r) => {
                let mut v = l.cross_items();
                v.push(r);
                v
            }
            other => vec![other],
        }
    }

    /// Every dictionary-like name referenced by the expression.
    pub fn names(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_names(&mut out);
        out
    }

    fn collect_names<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            DictExpr::Name(n) => out.push(n),
            DictExpr::Binary(_, l, r) => {
                l.collect_names(out);
                r.collect_names(out);
            }
            DictExpr::Order(_, e) | DictExpr::Collapse(_, e, _) | DictExpr::Expand(e, _) => e.collect_names(out),
            DictExpr::Hierarchy(base, params) => {
                out.push(base);
                for p in params {
                    p.collect_names(out);
                }
            }
        }
    }
}

impl fmt::Display for DictExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DictExpr::Name(n) => f.write_str(n),
            DictExpr::Binary(op, l, r) => write!(f, "({l} {op} {r})"),
            DictExpr::Order(kind, e) => {
                let k = match kind {
                    OrderKind::Lexicographic => "lex",
                    OrderKind::Numeric => "num",
                };
                write!(f, "(order {k} {e})")
            }
            DictExpr::Hierarchy(base, params) => {
                write!(f, "{base}(")?;
                for (i, p) in params.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{p}")?;
                }
                f.write_str(")")
            }
            DictExpr::Collapse(op, e, kept) => {
                write!(f, "({op} {e}")?;
                for k in kept {
                    write!(f, " | {k}")?;
                }
                f.write_str(")")
            }
            DictExpr::Expand(e, sections) => {
                write!(f, "({e}")?;
                for s in sections {
                    write!(f, " // {s}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesDef {
    pub type_name: String,
    pub names: Option<DictExpr>,
    /// One item per attribute dimension.
    pub attrs: Vec<DictExpr>,
    pub columns: DictExpr,
    pub rows: DictExpr,
}

fn opt(e: &Option<DictExpr>) -> String {
    e.as_ref().map_or_else(|| "-".to_string(), ToString::to_string)
}

impl fmt::Display for SeriesDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let attrs = if self.attrs.is_empty() {
            "-".to_string()
        } else {
            self.attrs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
        };
        write!(
            f,
            "series {} {{ names = {} ; attrs = {} ; columns = {} ; rows = {} }}",
            self.type_name,
            opt(&self.names),
            attrs,
            self.columns,
            self.rows
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColumnRef {
    pub series: String,
    pub column: String,
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.series, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AccumFn {
    Sum,
    Max,
    Min,
    Count,
}

impl AccumFn {
    pub fn as_str(self) -> &'static str {
        match self {
            AccumFn::Sum => "sum",
            AccumFn::Max => "max",
            AccumFn::Min => "min",
            AccumFn::Count => "count",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [AccumFn::Sum, AccumFn::Max, AccumFn::Min, AccumFn::Count].into_iter().find(|f| f.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> char {
        match self {
            ArithOp::Add => '+',
            ArithOp::Sub => '-',
            ArithOp::Mul => '*',
            ArithOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Arith {
    Num(f64),
    Col(ColumnRef),
    Bin(ArithOp, Box<Arith>, Box<Arith>),
}

impl Arith {
    pub fn columns(&self) -> Vec<&ColumnRef> {
        match self {
            Arith::Num(_) => Vec::new(),
            Arith::Col(c) => vec![c],
            Arith::Bin(_, l, r) => {
                let mut v = l.columns();
                v.extend(r.columns());
                v
            }
        }
    }
}

impl fmt::Display for Arith {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arith::Num(v) => write!(f, "{v}"),
            Arith::Col(c) => write!(f, "{c}"),
            Arith::Bin(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FormulaBody {
    Accum(AccumFn, ColumnRef),
    Arith(Arith),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Formula {
    pub target: ColumnRef,
    pub body: FormulaBody,
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.body {
            FormulaBody::Accum(func, src) => write!(f, "{} = accum({}, {})", self.target, func.as_str(), src),
            FormulaBody::Arith(a) => write!(f, "{} = {}", self.target, a),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleDef {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub formulas: Vec<Formula>,
}

fn list(items: &[String]) -> String {
    if items.is_empty() {
        "-".to_string()
    } else {
        items.join(", ")
    }
}

impl fmt::Display for RuleDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "rule {} {{ in: {} ; out: {}", self.name, list(&self.inputs), list(&self.outputs))?;
        for formula in &self.formulas {
            write!(f, " ; {formula}")?;
        }
        f.write_str(" }")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitKind {
    AtStart,
    OnEvent(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitDecl {
    pub rule: String,
    pub kind: InitKind,
}

impl fmt::Display for InitDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            InitKind::AtStart => write!(f, "init {} at-start", self.rule),
            InitKind::OnEvent(e) => write!(f, "init {} on-event {}", self.rule, e),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    Universe {
        name: String,
        kind: String,
        members: Option<Vec<String>>,
    },
    Dict {
        name: String,
        universe: String,
        members: Vec<String>,
    },
    DictExpr {
        name: String,
        expr: DictExpr,
    },
    Family {
        name: String,
        params: Vec<DictExpr>,
        universe: Option<String>,
    },
    Member {
        family: String,
        key: Vec<String>,
        universe: String,
        members: Vec<String>,
    },
    Series(SeriesDef),
    Scale {
        target: String,
        level: Level,
        unit: Option<String>,
        universe: Option<String>,
    },
    Oper(OperSEntry),
    Rule(RuleDef),
    Alias {
        alias: String,
        canonical: String,
    },
    Init(InitDecl),
}

fn scale_sig(universe: &str, s: &Scale) -> String {
    match &s.unit {
        Some(u) => format!("{universe} {} unit {u}", s.level),
        None => format!("{universe} {}", s.level),
    }
}

impl fmt::Display for Decl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decl::Universe { name, kind, members } => match members {
                Some(m) => write!(f, "universe {name} : {kind} {{ {} }}", m.join(", ")),
                None => write!(f, "universe {name} : {kind}"),
            },
            Decl::Dict { name, universe, members } => {
                write!(f, "dict {name} from {universe} {{ {} }}", members.join(", "))
            }
            Decl::DictExpr { name, expr } => write!(f, "dict {name} = {expr}"),
            Decl::Family { name, params, universe } => {
                let p: Vec<String> = params.iter().map(ToString::to_string).collect();
                write!(f, "family {name}({})", p.join(", "))?;
                if let Some(u) = universe {
                    write!(f, " from {u}")?;
                }
                Ok(())
            }
            Decl::Member { family, key, universe, members } => {
                write!(f, "member {family}({}) from {universe} {{ {} }}", key.join(", "), members.join(", "))
            }
            Decl::Series(s) => write!(f, "{s}"),
            Decl::Scale { target, level, unit, universe } => {
                write!(f, "scale {target} : {level}")?;
                if let Some(u) = unit {
                    write!(f, " unit {u}")?;
                }
                if let Some(u) = universe {
                    write!(f, " in {u}")?;
                }
                Ok(())
            }
            Decl::Oper(e) => {
                let args: Vec<String> = e.args.iter().map(|(u, s)| scale_sig(u, s)).collect();
                write!(f, "oper {} ({}) -> {}", e.op_name, args.join(", "), scale_sig(&e.result.0, &e.result.1))
            }
            Decl::Rule(r) => write!(f, "{r}"),
            Decl::Alias { alias, canonical } => write!(f, "alias {alias} = {canonical}"),
            Decl::Init(i) => write!(f, "{i}"),
        }
    }
}
