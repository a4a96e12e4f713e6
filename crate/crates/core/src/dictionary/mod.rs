//! Dictionaries with genesis tracking and the dictionary algebra.
//!
//! A [`Dictionary`] is a named, ordered list of universe elements, each carrying the
//! [`Genesis`] it was derived from. Binary set operations merge geneses of matching
//! elements; [`Family`] covers parameterized dictionaries and the collapse (`|`) and
//! expand (`//`) transformations.

mod family;
mod genesis;

use std::fmt;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::universe::{Universe, UniverseError, UniverseKind};

pub use family::{Family, Member};
pub use genesis::{base_name, compatible, Aliases, Bindings, Genesis, GenesisEntry};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DictError {
    #[error("`{label}` is not an element of `{dictionary}`")]
    UnknownElement { dictionary: String, label: String },
    #[error("`{label}` appears more than once in `{dictionary}`")]
    DuplicateElement { dictionary: String, label: String },
    #[error("universe mismatch: `{left}` vs `{right}`")]
    UniverseMismatch { left: String, right: String },
    #[error("`{0}` is not over a numeric universe")]
    NotNumeric(String),
    #[error("`{parameter}` is not a parameter of family `{family}`")]
    UnknownParameter { family: String, parameter: String },
    #[error("family `{0}` needs at least one parameter dictionary")]
    EmptyParameters(String),
    #[error("family `{family}` has no member `{family}({key})`")]
    UnknownMember { family: String, key: String },
    #[error("family `{family}` takes {expected} parameters, got {got}")]
    Arity { family: String, expected: usize, got: usize },
    #[error(transparent)]
    Universe(#[from] UniverseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SetOp {
    Union,
    Intersect,
    Cross,
    Concat,
    Minus,
}

impl SetOp {
    pub const ALL: [SetOp; 5] = [SetOp::Union, SetOp::Intersect, SetOp::Cross, SetOp::Concat, SetOp::Minus];

    pub fn keyword(self) -> &'static str {
        match self {
            SetOp::Union => "union",
            SetOp::Intersect => "intersect",
            SetOp::Cross => "cross",
            SetOp::Concat => "concat",
            SetOp::Minus => "minus",
        }
    }

    pub fn from_keyword(word: &str) -> Option<SetOp> {
        SetOp::ALL.into_iter().find(|op| op.keyword() == word)
    }
}

impl fmt::Display for SetOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderKind {
    Lexicographic,
    Numeric,
}

/// One dictionary entry. `depth` and `header` are only meaningful for sectioned
/// dictionaries produced by [`Family::expand`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Element {
    pub label: String,
    pub genesis: Genesis,
    pub header: bool,
    pub depth: usize,
}

impl Element {
    pub fn new(label: impl Into<String>, genesis: Genesis) -> Self {
        Element {
            label: label.into(),
            genesis,
            header: false,
            depth: 0,
        }
    }

    pub fn is_tuple(&self) -> bool {
        is_tuple_label(&self.label)
    }
}

pub(crate) fn is_tuple_label(label: &str) -> bool {
    label.starts_with('(') && label.ends_with(')')
}

fn tuple_parts(label: &str) -> Vec<&str> {
    if is_tuple_label(label) {
        label[1..label.len() - 1].split(',').collect()
    } else {
        vec![label]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dictionary {
    pub name: String,
    /// `None` for dictionaries whose universe is not yet known (empty family members).
    pub universe: Option<String>,
    pub kind: Option<UniverseKind>,
    pub entries: Vec<Element>,
}

impl Dictionary {
    /// Dictionary over `universe`; each element's genesis is `{label ∈ name}`.
    pub fn make(name: impl Into<String>, universe: &Universe, labels: &[&str]) -> Result<Self, DictError> {
        let name = name.into();
        let mut entries: Vec<Element> = Vec::with_capacity(labels.len());
        for raw in labels {
            let label = raw.trim();
            universe.resolve(label).map_err(|_| DictError::UnknownElement {
                dictionary: name.clone(),
                label: label.to_string(),
            })?;
            if entries.iter().any(|e| e.label == label) {
                return Err(DictError::DuplicateElement {
                    dictionary: name,
                    label: label.to_string(),
                });
            }
            entries.push(Element::new(label, Genesis::single(name.clone(), label)));
        }
        Ok(Dictionary {
            name,
            universe: Some(universe.name().to_string()),
            kind: Some(universe.kind()),
            entries,
        })
    }

    pub fn empty(name: impl Into<String>, universe: Option<&Universe>) -> Self {
        Dictionary {
            name: name.into(),
            universe: universe.map(|u| u.name().to_string()),
            kind: universe.map(Universe::kind),
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.label.as_str()).collect()
    }

    pub fn get(&self, label: &str) -> Option<&Element> {
        let label = label.trim();
        self.entries.iter().find(|e| e.label == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.get(label).is_some()
    }

    pub fn is_sectioned(&self) -> bool {
        self.entries.iter().any(|e| e.header)
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn genesis_of(&self, label: &str) -> Result<&Genesis, DictError> {
        self.get(label).map(|e| &e.genesis).ok_or_else(|| DictError::UnknownElement {
            dictionary: self.name.clone(),
            label: label.trim().to_string(),
        })
    }

    /// The dimension bindings an element of this dictionary pins down: the element
    /// itself (unless it is a header or a tuple) plus every entry of its genesis.
    pub fn coordinates(&self, element: &Element) -> Genesis {
        let mut g = element.genesis.clone();
        if !element.header && !element.is_tuple() {
            g.insert(GenesisEntry::new(base_name(&self.name), element.label.clone()));
        }
        g
    }

    fn check_universe(&self, other: &Dictionary) -> Result<(), DictError> {
        match (&self.universe, &other.universe) {
            (Some(a), Some(b)) if a != b => Err(DictError::UniverseMismatch {
                left: a.clone(),
                right: b.clone(),
            }),
            _ => Ok(()),
        }
    }

    fn deduplicated(&self) -> IndexMap<&str, Element> {
        let mut out: IndexMap<&str, Element> = IndexMap::new();
        for e in &self.entries {
            match out.get_mut(e.label.as_str()) {
                Some(existing) => existing.genesis.extend(&e.genesis),
                None => {
                    out.insert(e.label.as_str(), e.clone());
                }
            }
        }
        out
    }

    fn shape_from(&self, other: &Dictionary, name: String) -> Dictionary {
        Dictionary {
            name,
            universe: self.universe.clone().or_else(|| other.universe.clone()),
            kind: self.kind.or(other.kind),
            entries: Vec::new(),
        }
    }

    /// Binary set operation. Result order is the left operand's order followed by
    /// the right operand's new elements.
    pub fn binary(op: SetOp, a: &Dictionary, b: &Dictionary) -> Result<Dictionary, DictError> {
        let name = format!("({} {} {})", a.name, op, b.name);
        if op == SetOp::Cross {
            return Ok(Dictionary::cross(a, b, name));
        }
        a.check_universe(b)?;
        let mut out = a.shape_from(b, name);
        match op {
            SetOp::Concat => {
                out.entries = a.entries.iter().chain(&b.entries).cloned().collect();
            }
            SetOp::Union => {
                let mut merged = a.deduplicated();
                for (label, e) in b.deduplicated() {
                    match merged.get_mut(label) {
                        Some(existing) => existing.genesis.extend(&e.genesis),
                        None => {
                            merged.insert(label, e);
                        }
                    }
                }
                out.entries = merged.into_values().collect();
            }
            SetOp::Intersect => {
                let right = b.deduplicated();
                out.entries = a
                    .deduplicated()
                    .into_iter()
                    .filter_map(|(label, mut e)| {
                        right.get(label).map(|r| {
                            e.genesis.extend(&r.genesis);
                            e
                        })
                    })
                    .collect();
            }
            SetOp::Minus => {
                let right = b.deduplicated();
                out.entries = a
                    .deduplicated()
                    .into_iter()
                    .filter(|(label, _)| !right.contains_key(label))
                    .map(|(_, e)| e)
                    .collect();
            }
            SetOp::Cross => unreachable!(),
        }
        Ok(out)
    }

    fn cross(a: &Dictionary, b: &Dictionary, name: String) -> Dictionary {
        let universe = format!(
            "cross({},{})",
            a.universe.as_deref().unwrap_or("?"),
            b.universe.as_deref().unwrap_or("?")
        );
        let mut entries = Vec::with_capacity(a.len() * b.len());
        for x in &a.entries {
            for y in &b.entries {
                let mut parts = tuple_parts(&x.label);
                parts.extend(tuple_parts(&y.label));
                entries.push(Element::new(format!("({})", parts.join(",")), x.genesis.union(&y.genesis)));
            }
        }
        Dictionary {
            name,
            universe: Some(universe),
            kind: None,
            entries,
        }
    }

    pub fn order(kind: OrderKind, a: &Dictionary) -> Result<Dictionary, DictError> {
        let mut out = a.clone();
        match kind {
            OrderKind::Lexicographic => out.entries.sort_by(|x, y| x.label.cmp(&y.label)),
            OrderKind::Numeric => {
                if !a.kind.is_some_and(UniverseKind::is_numeric) {
                    return Err(DictError::NotNumeric(a.name.clone()));
                }
                let key = |e: &Element| e.label.parse::<f64>().unwrap_or(f64::NAN);
                out.entries.sort_by(|x, y| key(x).total_cmp(&key(y)));
            }
        }
        Ok(out)
    }

    /// Keep elements whose coordinates do not contradict `bindings`.
    pub fn filter_compatible(&self, bindings: &Bindings, aliases: &Aliases) -> Dictionary {
        let mut out = self.clone();
        out.entries.retain(|e| compatible(&self.coordinates(e), bindings, aliases));
        out
    }
}

impl fmt::Display for Dictionary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "{}{}, genesis {}", "  ".repeat(e.depth), e.label, e.genesis)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn universe(name: &str, members: &[&str]) -> Universe {
        Universe::define(name, UniverseKind::String, Some(members.iter().map(|s| s.to_string()).collect())).unwrap()
    }

    fn dict(name: &str, u: &Universe, labels: &[&str]) -> Dictionary {
        Dictionary::make(name, u, labels).unwrap()
    }

    #[test]
    fn make_dictionary_sets_self_genesis() {
        let dep = universe("DEPARTMENT", &["IT", "HR"]);
        let d = dict("D", &dep, &["IT", "HR"]);
        assert_eq!(d.len(), 2);
        assert_eq!(d.genesis_of("IT").unwrap(), &Genesis::single("D", "IT"));
        let br = universe("BRANCH", &["USA", "Can", "EMU"]);
        assert_eq!(dict("B", &br, &["USA", "Can", "EMU"]).len(), 3);
        assert!(dict("E", &br, &[]).is_empty());
    }

    #[test]
    fn make_dictionary_errors() {
        let dep = universe("DEPARTMENT", &["IT", "HR"]);
        assert!(matches!(Dictionary::make("D", &dep, &["IT", "Hr"]), Err(DictError::UnknownElement { .. })));
        assert!(matches!(Dictionary::make("D", &dep, &["IT", "IT"]), Err(DictError::DuplicateElement { .. })));
    }

    #[test]
    fn union_genesis_rule() {
        let u = universe("U", &["v", "w", "x"]);
        let a = dict("A", &u, &["v", "w"]);
        let b = dict("B", &u, &["w", "x"]);
        let c = Dictionary::binary(SetOp::Union, &a, &b).unwrap();
        assert_eq!(c.labels(), vec!["v", "w", "x"]);
        let both: Genesis = [("A", "w"), ("B", "w")].into_iter().collect();
        assert_eq!(c.genesis_of("w").unwrap(), &both);
        assert_eq!(c.genesis_of("x").unwrap(), &Genesis::single("B", "x"));
        assert_eq!(c.genesis_of("v").unwrap(), &Genesis::single("A", "v"));
    }

    #[test]
    fn minus_self_is_empty() {
        let u = universe("U", &["v", "w"]);
        let a = dict("A", &u, &["v", "w"]);
        assert!(Dictionary::binary(SetOp::Minus, &a, &a).unwrap().is_empty());
    }

    #[test]
    fn cross_cardinality_and_genesis() {
        let dep = universe("DEPARTMENT", &["IT", "HR"]);
        let br = universe("BRANCH", &["USA", "Can", "EMU"]);
        let d = dict("D", &dep, &["IT", "HR"]);
        let b = dict("B", &br, &["USA", "Can", "EMU"]);
        let x = Dictionary::binary(SetOp::Cross, &d, &b).unwrap();
        assert_eq!(x.len(), 6);
        let first = &x.entries[0];
        assert_eq!(first.label, "(IT,USA)");
        let expected: Genesis = [("D", "IT"), ("B", "USA")].into_iter().collect();
        assert_eq!(first.genesis, expected);
    }

    #[test]
    fn concat_keeps_duplicates_union_does_not() {
        let u = universe("U", &["v", "w"]);
        let a = dict("A", &u, &["v", "w"]);
        assert_eq!(Dictionary::binary(SetOp::Concat, &a, &a).unwrap().len(), 4);
        assert_eq!(Dictionary::binary(SetOp::Union, &a, &a).unwrap().len(), 2);
    }

    #[test]
    fn universe_mismatch() {
        let a = dict("A", &universe("U", &["v"]), &["v"]);
        let b = dict("B", &universe("V", &["v"]), &["v"]);
        assert!(matches!(Dictionary::binary(SetOp::Union, &a, &b), Err(DictError::UniverseMismatch { .. })));
        assert!(Dictionary::binary(SetOp::Cross, &a, &b).is_ok());
    }

    #[test]
    fn orderings() {
        let dep = universe("DEPARTMENT", &["IT", "HR"]);
        let d = dict("D", &dep, &["HR", "IT"]);
        assert_eq!(Dictionary::order(OrderKind::Lexicographic, &d).unwrap().labels(), vec!["HR", "IT"]);
        assert!(matches!(Dictionary::order(OrderKind::Numeric, &d), Err(DictError::NotNumeric(_))));
        let q = Universe::define("Q", UniverseKind::Natural, Some(vec!["1".into(), "2".into(), "3".into(), "10".into()])).unwrap();
        let n = dict("N", &q, &["3", "10", "1", "2"]);
        assert_eq!(Dictionary::order(OrderKind::Numeric, &n).unwrap().labels(), vec!["1", "2", "3", "10"]);
        assert_eq!(Dictionary::order(OrderKind::Lexicographic, &n).unwrap().labels(), vec!["1", "10", "2", "3"]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        const POOL: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];

        fn subset() -> impl Strategy<Value = Vec<&'static str>> {
            proptest::sample::subsequence(POOL.to_vec(), 0..=POOL.len()).prop_shuffle()
        }

        fn pool() -> Universe {
            universe("U", &POOL)
        }

        fn sorted(d: &Dictionary) -> Vec<(String, Genesis)> {
            let mut v: Vec<_> = d.entries.iter().map(|e| (e.label.clone(), e.genesis.clone())).collect();
            v.sort_by(|x, y| x.0.cmp(&y.0));
            v
        }

        proptest! {
            #[test]
            fn union_commutative_associative(x in subset(), y in subset(), z in subset()) {
                let u = pool();
                let (a, b, c) = (dict("A", &u, &x), dict("B", &u, &y), dict("C", &u, &z));
                let ab = Dictionary::binary(SetOp::Union, &a, &b).unwrap();
                let ba = Dictionary::binary(SetOp::Union, &b, &a).unwrap();
                prop_assert_eq!(sorted(&ab), sorted(&ba));
                let left = Dictionary::binary(SetOp::Union, &ab, &c).unwrap();
                let bc = Dictionary::binary(SetOp::Union, &b, &c).unwrap();
                let right = Dictionary::binary(SetOp::Union, &a, &bc).unwrap();
                prop_assert_eq!(sorted(&left), sorted(&right));
            }

            #[test]
            fn intersect_commutative_and_minus_disjoint(x in subset(), y in subset()) {
                let u = pool();
                let (a, b) = (dict("A", &u, &x), dict("B", &u, &y));
                let ab = Dictionary::binary(SetOp::Intersect, &a, &b).unwrap();
                let ba = Dictionary::binary(SetOp::Intersect, &b, &a).unwrap();
                prop_assert_eq!(sorted(&ab), sorted(&ba));
                let diff = Dictionary::binary(SetOp::Minus, &a, &b).unwrap();
                prop_assert!(Dictionary::binary(SetOp::Intersect, &diff, &b).unwrap().is_empty());
            }

            #[test]
            fn genesis_monotone(x in subset(), y in subset(), op in proptest::sample::select(vec![SetOp::Union, SetOp::Intersect, SetOp::Minus, SetOp::Concat])) {
                let u = pool();
                let (a, b) = (dict("A", &u, &x), dict("B", &u, &y));
                let r = Dictionary::binary(op, &a, &b).unwrap();
                for e in &r.entries {
                    let mut allowed = Genesis::new();
                    for src in [&a, &b] {
                        if let Some(s) = src.get(&e.label) {
                            allowed.extend(&s.genesis);
                            if op != SetOp::Concat {
                                prop_assert!(s.genesis.is_subset(&e.genesis));
                            }
                        }
                    }
                    prop_assert!(e.genesis.is_subset(&allowed));
                }
            }

            #[test]
            fn cross_size_and_genesis(x in subset(), y in subset()) {
                let u = pool();
                let v = universe("V", &POOL);
                let (a, b) = (dict("A", &u, &x), dict("B", &v, &y));
                let c = Dictionary::binary(SetOp::Cross, &a, &b).unwrap();
                prop_assert_eq!(c.len(), a.len() * b.len());
                for (i, e) in c.entries.iter().enumerate() {
                    let (l, r) = (&a.entries[i / b.len()], &b.entries[i % b.len()]);
                    prop_assert_eq!(&e.genesis, &l.genesis.union(&r.genesis));
                }
            }
        }
    }
}
