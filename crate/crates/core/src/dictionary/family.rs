use indexmap::IndexMap;

use super::{compatible, Aliases, Bindings, DictError, Dictionary, Element, Genesis, GenesisEntry, SetOp};
use crate::universe::{Universe, UniverseKind};

/// One member dictionary of a family with the parameter bindings that name it.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub dictionary: Dictionary,
    pub binding: Genesis,
}

/// A parameterized set of dictionaries `A(b,…,c)`, one per combination of elements of
/// the parameter dictionaries. Members may be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    pub base_name: String,
    pub params: Vec<Dictionary>,
    pub members: IndexMap<Vec<String>, Member>,
    pub universe: Option<String>,
    pub kind: Option<UniverseKind>,
}

fn member_name(base: &str, key: &[String]) -> String {
    if key.is_empty() {
        base.to_string()
    } else {
        format!("{}({})", base, key.join(","))
    }
}

fn distinct(d: &Dictionary) -> Vec<&Element> {
    let mut seen = std::collections::HashSet::new();
    d.entries.iter().filter(|e| !e.header && seen.insert(e.label.as_str())).collect()
}

/// Every combination of the given parameter element lists, first parameter slowest.
fn combinations<'a>(lists: &[Vec<&'a Element>]) -> Vec<Vec<&'a Element>> {
    let mut out: Vec<Vec<&Element>> = vec![Vec::new()];
    for list in lists {
        let mut next = Vec::with_capacity(out.len() * list.len());
        for prefix in &out {
            for e in list {
                let mut c = prefix.clone();
                c.push(*e);
                next.push(c);
            }
        }
        out = next;
    }
    out
}

/// Context inherited from a parameter element: its genesis minus the entries that
/// merely restate the element itself.
fn context_of(e: &Element) -> impl Iterator<Item = &GenesisEntry> {
    e.genesis.iter().filter(move |g| g.element_label != e.label)
}

impl Family {
    /// Define a family with one empty member per parameter combination.
    pub fn hierarchy(base: impl Into<String>, params: Vec<Dictionary>, universe: Option<&Universe>) -> Result<Self, DictError> {
        let base_name = base.into();
        if params.is_empty() {
            return Err(DictError::EmptyParameters(base_name));
        }
        let mut family = Family {
            base_name,
            params,
            members: IndexMap::new(),
            universe: universe.map(|u| u.name().to_string()),
            kind: universe.map(Universe::kind),
        };
        let lists: Vec<Vec<&Element>> = family.params.iter().map(distinct).collect();
        let keys: Vec<Vec<String>> = combinations(&lists)
            .into_iter()
            .map(|c| c.into_iter().map(|e| e.label.clone()).collect())
            .collect();
        for key in keys {
            let binding = family.binding_for(&key)?;
            let dictionary = Dictionary {
                name: member_name(&family.base_name, &key),
                universe: family.universe.clone(),
                kind: family.kind,
                entries: Vec::new(),
            };
            family.members.insert(key, Member { dictionary, binding });
        }
        Ok(family)
    }

    pub fn param_names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }

    fn param_index(&self, name: &str) -> Result<usize, DictError> {
        self.params.iter().position(|p| p.name == name).ok_or_else(|| DictError::UnknownParameter {
            family: self.base_name.clone(),
            parameter: name.to_string(),
        })
    }

    /// Qualified dimension name for parameter `i`: later parameters appear as their
    /// bound element when fixed, otherwise as their dictionary name.
    fn qualified(&self, i: usize, fixed: &dyn Fn(usize) -> Option<String>) -> String {
        let later: Vec<String> = (i + 1..self.params.len())
            .map(|j| fixed(j).unwrap_or_else(|| self.params[j].name.clone()))
            .collect();
        if later.is_empty() {
            self.params[i].name.clone()
        } else {
            format!("{}({})", self.params[i].name, later.join(","))
        }
    }

    /// Genesis shared by every element of member `key`, e.g. `{USA ∈ B, IT ∈ D(USA)}`.
    pub fn binding_for(&self, key: &[String]) -> Result<Genesis, DictError> {
        if key.len() != self.params.len() {
            return Err(DictError::Arity {
                family: self.base_name.clone(),
                expected: self.params.len(),
                got: key.len(),
            });
        }
        let mut g = Genesis::new();
        for (i, label) in key.iter().enumerate() {
            let element = self.params[i].get(label).ok_or_else(|| DictError::UnknownElement {
                dictionary: self.params[i].name.clone(),
                label: label.clone(),
            })?;
            g.insert(GenesisEntry::new(self.qualified(i, &|j| Some(key[j].clone())), label.clone()));
            for c in context_of(element) {
                g.insert(c.clone());
            }
        }
        Ok(g)
    }

    pub fn member(&self, key: &[&str]) -> Option<&Member> {
        let key: Vec<String> = key.iter().map(|s| s.trim().to_string()).collect();
        self.members.get(&key)
    }

    /// Populate member `key` with `labels` drawn from `universe`.
    pub fn fill(&mut self, key: &[&str], universe: &Universe, labels: &[&str]) -> Result<(), DictError> {
        let key: Vec<String> = key.iter().map(|s| s.trim().to_string()).collect();
        let name = member_name(&self.base_name, &key);
        let member = self.members.get_mut(&key).ok_or_else(|| DictError::UnknownMember {
            family: self.base_name.clone(),
            key: key.join(","),
        })?;
        let mut dictionary = Dictionary::make(name, universe, labels)?;
        for e in &mut dictionary.entries {
            e.genesis = member.binding.clone();
        }
        member.dictionary = dictionary;
        if self.universe.is_none() {
            self.universe = Some(universe.name().to_string());
            self.kind = Some(universe.kind());
        }
        Ok(())
    }

    fn fold(op: SetOp, name: String, dicts: &[&Dictionary], universe: Option<String>, kind: Option<UniverseKind>) -> Result<Dictionary, DictError> {
        let mut acc: Option<Dictionary> = None;
        for d in dicts {
            acc = Some(match acc {
                None => (*d).clone(),
                Some(a) => Dictionary::binary(op, &a, d)?,
            });
        }
        let mut out = acc.unwrap_or(Dictionary {
            name: String::new(),
            universe: universe.clone(),
            kind,
            entries: Vec::new(),
        });
        out.name = name;
        if out.universe.is_none() {
            out.universe = universe;
            out.kind = kind;
        }
        Ok(out)
    }

    /// Fold members agreeing on the `kept` parameters with `op`; the result family is
    /// parameterized by `kept` only and element geneses are preserved.
    pub fn collapse(&self, op: SetOp, kept: &[&str]) -> Result<Family, DictError> {
        let kept_idx: Vec<usize> = kept.iter().map(|k| self.param_index(k)).collect::<Result<_, _>>()?;
        let params: Vec<Dictionary> = kept_idx.iter().map(|&i| self.params[i].clone()).collect();
        let mut out = Family {
            base_name: self.base_name.clone(),
            params,
            members: IndexMap::new(),
            universe: self.universe.clone(),
            kind: self.kind,
        };
        let lists: Vec<Vec<&Element>> = out.params.iter().map(distinct).collect();
        for combo in combinations(&lists) {
            let key: Vec<String> = combo.iter().map(|e| e.label.clone()).collect();
            let agreeing: Vec<&Dictionary> = self
                .members
                .iter()
                .filter(|(k, _)| kept_idx.iter().zip(&key).all(|(&i, label)| &k[i] == label))
                .map(|(_, m)| &m.dictionary)
                .collect();
            let dictionary = Self::fold(op, member_name(&out.base_name, &key), &agreeing, self.universe.clone(), self.kind)?;
            let binding = if out.params.is_empty() { Genesis::new() } else { out.binding_for(&key)? };
            out.members.insert(key, Member { dictionary, binding });
        }
        Ok(out)
    }

    /// Join of every member, named by the base name.
    pub fn flatten(&self) -> Dictionary {
        let all: Vec<&Dictionary> = self.members.values().map(|m| &m.dictionary).collect();
        // union over members of one family cannot mismatch once fill() has checked universes
        Self::fold(SetOp::Union, self.base_name.clone(), &all, self.universe.clone(), self.kind)
            .unwrap_or_else(|_| Dictionary::empty(self.base_name.clone(), None))
    }

    /// Sectioned dictionary: for each element of the first section parameter a header
    /// followed by the joined members fixed to it, recursing over later sections.
    pub fn expand(&self, sections: &[&str]) -> Result<Dictionary, DictError> {
        let section_idx: Vec<usize> = sections.iter().map(|s| self.param_index(s)).collect::<Result<_, _>>()?;
        let mut entries = Vec::new();
        self.expand_level(&section_idx, &mut Vec::new(), 0, &mut entries)?;
        Ok(Dictionary {
            name: self.base_name.clone(),
            universe: self.universe.clone(),
            kind: self.kind,
            entries,
        })
    }

    fn expand_level(&self, sections: &[usize], fixed: &mut Vec<(usize, String)>, depth: usize, out: &mut Vec<Element>) -> Result<(), DictError> {
        let Some((&s, rest)) = sections.split_first() else {
            let agreeing: Vec<&Dictionary> = self
                .members
                .iter()
                .filter(|(k, _)| fixed.iter().all(|(i, label)| &k[*i] == label))
                .map(|(_, m)| &m.dictionary)
                .collect();
            let joined = Self::fold(SetOp::Union, String::new(), &agreeing, None, None)?;
            out.extend(joined.entries.into_iter().map(|mut e| {
                e.depth = depth;
                e.header = false;
                e
            }));
            return Ok(());
        };
        for e in distinct(&self.params[s]) {
            let lookup = |j: usize| fixed.iter().find(|(i, _)| *i == j).map(|(_, l)| l.clone());
            let mut genesis = Genesis::single(self.qualified(s, &lookup), e.label.clone());
            for c in context_of(e) {
                genesis.insert(c.clone());
            }
            out.push(Element {
                label: e.label.clone(),
                genesis,
                header: true,
                depth,
            });
            fixed.push((s, e.label.clone()));
            self.expand_level(rest, fixed, depth + 1, out)?;
            fixed.pop();
        }
        Ok(())
    }

    /// Instance view: parameter elements and members contradicting `bindings` are dropped.
    pub fn restrict(&self, bindings: &Bindings, aliases: &Aliases) -> Family {
        let params: Vec<Dictionary> = self.params.iter().map(|p| p.filter_compatible(bindings, aliases)).collect();
        let members = self
            .members
            .iter()
            .filter(|(k, m)| {
                k.iter().zip(&params).all(|(label, p)| p.contains(label)) && compatible(&m.binding, bindings, aliases)
            })
            .map(|(k, m)| (k.clone(), m.clone()))
            .collect();
        Family {
            base_name: self.base_name.clone(),
            params,
            members,
            universe: self.universe.clone(),
            kind: self.kind,
        }
    }
}
