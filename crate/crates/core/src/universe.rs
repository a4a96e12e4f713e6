//! Local universes: the value domains dictionary elements are drawn from.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

/// Built-in a-priori universes registered in every workspace.
pub const NATURALS: &str = "NaturN";
pub const REALS: &str = "RealR";
pub const STRINGS: &str = "CharC";
pub const INTERVALS: &str = "Intervals";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UniverseError {
    #[error("universe `{0}` is already defined")]
    DuplicateUniverse(String),
    #[error("universe `{universe}` lists member `{member}` more than once")]
    DuplicateMember { universe: String, member: String },
    #[error("`{literal}` is not a valid {kind} literal")]
    KindMismatch { kind: UniverseKind, literal: String },
    #[error("`{label}` is not an element of universe `{universe}`")]
    UnknownElement { universe: String, label: String },
    #[error("unsupported universe kind `{0}`")]
    UnsupportedKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UniverseKind {
    Natural,
    Real,
    String,
    Interval,
}

impl UniverseKind {
    pub fn is_numeric(self) -> bool {
        matches!(self, UniverseKind::Natural | UniverseKind::Real)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            UniverseKind::Natural => "natural",
            UniverseKind::Real => "real",
            UniverseKind::String => "string",
            UniverseKind::Interval => "interval",
        }
    }

    /// Parses `literal` (already trimmed) under this kind.
    pub fn parse_literal(self, literal: &str) -> Result<Literal, UniverseError> {
        let mismatch = || UniverseError::KindMismatch {
            kind: self,
            literal: literal.to_string(),
        };
        match self {
            UniverseKind::Natural => literal.parse::<u64>().map(Literal::Natural).map_err(|_| mismatch()),
            UniverseKind::Real => match literal.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(Literal::Real(v)),
                _ => Err(mismatch()),
            },
            UniverseKind::String => {
                if literal.is_empty() {
                    Err(mismatch())
                } else {
                    Ok(Literal::Str(literal.to_string()))
                }
            }
            UniverseKind::Interval => {
                let (low, high) = literal.split_once("..").ok_or_else(mismatch)?;
                let (low, high) = (low.trim(), high.trim());
                if low.is_empty() || high.is_empty() {
                    return Err(mismatch());
                }
                let bound = |s: &str| match s.parse::<f64>() {
                    Ok(v) if v.is_finite() => Bound::Number(v),
                    _ => Bound::Text(s.to_string()),
                };
                let (low, high) = (bound(low), bound(high));
                match low.partial_cmp(&high) {
                    Some(Ordering::Less | Ordering::Equal) => Ok(Literal::Interval(low, high)),
                    _ => Err(mismatch()),
                }
            }
        }
    }
}

impl fmt::Display for UniverseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for UniverseKind {
    type Err = UniverseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "natural" => Ok(UniverseKind::Natural),
            "real" => Ok(UniverseKind::Real),
            "string" => Ok(UniverseKind::String),
            "interval" => Ok(UniverseKind::Interval),
            other => Err(UniverseError::UnsupportedKind(other.to_string())),
        }
    }
}

/// One endpoint of an interval literal. Numbers and strings do not mix.
#[derive(Debug, Clone, PartialEq)]
pub enum Bound {
    Number(f64),
    Text(String),
}

impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Bound::Number(a), Bound::Number(b)) => a.partial_cmp(b),
            (Bound::Text(a), Bound::Text(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }
}

/// A parsed value literal.
#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Natural(u64),
    Real(f64),
    Str(String),
    Interval(Bound, Bound),
}

impl Literal {
    /// Membership test `self ∈ interval` for interval literals; `None` for other shapes.
    pub fn contains(&self, value: &Bound) -> Option<bool> {
        match self {
            Literal::Interval(low, high) => Some(
                matches!(low.partial_cmp(value), Some(Ordering::Less | Ordering::Equal))
                    && matches!(value.partial_cmp(high), Some(Ordering::Less | Ordering::Equal)),
            ),
            _ => None,
        }
    }
}

/// Result of resolving a label against a universe.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolved {
    /// 0-based position in an enumerated universe.
    Position(usize),
    /// Parsed value in an a-priori (infinite) universe.
    Value(Literal),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Universe {
    name: String,
    kind: UniverseKind,
    members: Option<Vec<String>>,
}

impl Universe {
    /// Defines a universe. `members` is `Some` for enumerated universes.
    pub fn define(
        name: impl Into<String>,
        kind: UniverseKind,
        members: Option<Vec<String>>,
    ) -> Result<Self, UniverseError> {
        let name = name.into();
        let members = match members {
            None => None,
            Some(raw) => {
                let mut seen = std::collections::HashSet::new();
                let mut out = Vec::with_capacity(raw.len());
                for member in raw {
                    let member = member.trim().to_string();
                    kind.parse_literal(&member)?;
                    if !seen.insert(member.clone()) {
                        return Err(UniverseError::DuplicateMember {
                            universe: name,
                            member,
                        });
                    }
                    out.push(member);
                }
                Some(out)
            }
        };
        Ok(Universe { name, kind, members })
    }

    /// The four a-priori universes.
    pub fn builtins() -> Vec<Universe> {
        [
            (NATURALS, UniverseKind::Natural),
            (REALS, UniverseKind::Real),
            (STRINGS, UniverseKind::String),
            (INTERVALS, UniverseKind::Interval),
        ]
        .into_iter()
        .map(|(name, kind)| Universe {
            name: name.to_string(),
            kind,
            members: None,
        })
        .collect()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> UniverseKind {
        self.kind
    }

    pub fn members(&self) -> Option<&[String]> {
        self.members.as_deref()
    }

    pub fn is_enumerated(&self) -> bool {
        self.members.is_some()
    }

    /// Exact, case-sensitive, whitespace-trimmed lookup.
    pub fn resolve(&self, label: &str) -> Result<Resolved, UniverseError> {
        let label = label.trim();
        match &self.members {
            Some(members) => members
                .iter()
                .position(|m| m == label)
                .map(Resolved::Position)
                .ok_or_else(|| UniverseError::UnknownElement {
                    universe: self.name.clone(),
                    label: label.to_string(),
                }),
            None => self.kind.parse_literal(label).map(Resolved::Value).map_err(|_| {
                UniverseError::UnknownElement {
                    universe: self.name.clone(),
                    label: label.to_string(),
                }
            }),
        }
    }

    pub fn contains(&self, label: &str) -> bool {
        self.resolve(label).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(items: &[&str]) -> Option<Vec<String>> {
        Some(items.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn department_universe() {
        let dep = Universe::define("DEPARTMENT", UniverseKind::String, strings(&["IT", "HR"])).unwrap();
        assert_eq!(dep.members().unwrap().len(), 2);
        assert_eq!(dep.resolve("HR").unwrap(), Resolved::Position(1));
        assert!(matches!(dep.resolve("Hr"), Err(UniverseError::UnknownElement { .. })));
        assert_eq!(dep.resolve("  IT ").unwrap(), Resolved::Position(0));
    }

    #[test]
    fn quarters_universe() {
        let q = Universe::define("QUARTERS", UniverseKind::Natural, strings(&["1", "2", "3", "4"])).unwrap();
        assert_eq!(q.members().unwrap().len(), 4);
        assert_eq!(q.resolve("3").unwrap(), Resolved::Position(2));
    }

    #[test]
    fn duplicate_member_rejected() {
        let err = Universe::define("X", UniverseKind::String, strings(&["a", "a"])).unwrap_err();
        assert!(matches!(err, UniverseError::DuplicateMember { .. }));
    }

    #[test]
    fn kind_mismatch_rejected() {
        let err = Universe::define("Q", UniverseKind::Natural, strings(&["1", "two"])).unwrap_err();
        assert!(matches!(err, UniverseError::KindMismatch { .. }));
    }

    #[test]
    fn vector_and_graph_kinds_unsupported() {
        assert!(matches!("vector".parse::<UniverseKind>(), Err(UniverseError::UnsupportedKind(_))));
        assert!(matches!("graph".parse::<UniverseKind>(), Err(UniverseError::UnsupportedKind(_))));
    }

    #[test]
    fn infinite_universe_returns_value() {
        let reals = Universe::builtins().into_iter().find(|u| u.name() == REALS).unwrap();
        assert_eq!(reals.resolve("2.5").unwrap(), Resolved::Value(Literal::Real(2.5)));
        assert!(reals.resolve("abc").is_err());
    }

    #[test]
    fn intervals() {
        let lit = UniverseKind::Interval.parse_literal("1..5").unwrap();
        assert_eq!(lit.contains(&Bound::Number(3.0)), Some(true));
        assert_eq!(lit.contains(&Bound::Number(6.0)), Some(false));
        assert!(UniverseKind::Interval.parse_literal("5..1").is_err());
        assert!(UniverseKind::Interval.parse_literal("a..c").is_ok());
        assert!(UniverseKind::Interval.parse_literal("1..c").is_err());
    }

    proptest::proptest! {
        #[test]
        fn resolve_round_trips(labels in proptest::collection::btree_set("[a-z][a-z0-9]{0,6}", 0..20)) {
            let labels: Vec<String> = labels.into_iter().collect();
            let u = Universe::define("U", UniverseKind::String, Some(labels.clone())).unwrap();
            for (i, l) in labels.iter().enumerate() {
                proptest::prop_assert_eq!(u.resolve(l).unwrap(), Resolved::Position(i));
            }
            proptest::prop_assert_eq!(u.members().unwrap(), labels.as_slice());
        }
    }
}
