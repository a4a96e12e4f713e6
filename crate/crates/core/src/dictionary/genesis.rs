use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

/// One provenance binding: `element_label ∈ dictionary_name`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct GenesisEntry {
    pub dictionary_name: String,
    pub element_label: String,
}

impl GenesisEntry {
    pub fn new(dictionary_name: impl Into<String>, element_label: impl Into<String>) -> Self {
        GenesisEntry {
            dictionary_name: dictionary_name.into(),
            element_label: element_label.into(),
        }
    }

    /// The dimension this entry binds: the dictionary name without its parameter list,
    /// so `D(USA)` and `D(B)` both bind `D`.
    pub fn dimension(&self) -> &str {
        base_name(&self.dictionary_name)
    }

    /// Element form, `IT ∈ D(USA)`.
    pub fn element_form(&self) -> String {
        format!("{} ∈ {}", self.element_label, self.dictionary_name)
    }

    /// Cell form, `DEP d21`.
    pub fn cell_form(&self) -> String {
        format!("{} {}", self.dictionary_name, self.element_label)
    }
}

/// Strip a parameter list: `P(IT,USA)` → `P`.
pub fn base_name(name: &str) -> &str {
    match name.find('(') {
        Some(0) | None => name,
        Some(i) => &name[..i],
    }
}

/// Set of provenance bindings. Comparison is order-insensitive.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Genesis {
    entries: BTreeSet<GenesisEntry>,
}

impl Genesis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(dictionary_name: impl Into<String>, element_label: impl Into<String>) -> Self {
        let mut g = Genesis::new();
        g.insert(GenesisEntry::new(dictionary_name, element_label));
        g
    }

    pub fn insert(&mut self, entry: GenesisEntry) -> bool {
        self.entries.insert(entry)
    }

    pub fn extend(&mut self, other: &Genesis) {
        self.entries.extend(other.entries.iter().cloned());
    }

    pub fn union(&self, other: &Genesis) -> Genesis {
        let mut g = self.clone();
        g.extend(other);
        g
    }

    pub fn iter(&self) -> impl Iterator<Item = &GenesisEntry> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, entry: &GenesisEntry) -> bool {
        self.entries.contains(entry)
    }

    pub fn is_subset(&self, other: &Genesis) -> bool {
        self.entries.is_subset(&other.entries)
    }

    pub fn dictionary_names(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.dictionary_name.as_str()).collect()
    }

    /// Project every entry onto its canonical dimension name.
    pub fn dimensions(&self, aliases: &Aliases) -> Genesis {
        Genesis {
            entries: self
                .entries
                .iter()
                .map(|e| GenesisEntry::new(aliases.canonical(e.dimension()), e.element_label.clone()))
                .collect(),
        }
    }

    /// Entries rendered in element form, joined by `, `.
    pub fn element_form(&self) -> String {
        self.entries.iter().map(GenesisEntry::element_form).collect::<Vec<_>>().join(", ")
    }

    /// Entries rendered in cell form, joined by `, `.
    pub fn cell_form(&self) -> String {
        self.entries.iter().map(GenesisEntry::cell_form).collect::<Vec<_>>().join(", ")
    }
}

impl FromIterator<GenesisEntry> for Genesis {
    fn from_iter<T: IntoIterator<Item = GenesisEntry>>(iter: T) -> Self {
        Genesis {
            entries: iter.into_iter().collect(),
        }
    }
}

impl<'a> FromIterator<(&'a str, &'a str)> for Genesis {
    fn from_iter<T: IntoIterator<Item = (&'a str, &'a str)>>(iter: T) -> Self {
        iter.into_iter().map(|(d, l)| GenesisEntry::new(d, l)).collect()
    }
}

impl fmt::Display for Genesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.element_form())
    }
}

/// Explicit dimension aliases (`alias BRANCHES = BRANCH`). Never inferred.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Aliases {
    map: BTreeMap<String, String>,
}

impl Aliases {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declare `alias` as another name for `canonical`. Returns false if this would form a cycle.
    pub fn declare(&mut self, alias: impl Into<String>, canonical: impl Into<String>) -> bool {
        let alias = alias.into();
        let canonical = canonical.into();
        if self.canonical(&canonical) == alias {
            return false;
        }
        self.map.insert(alias, canonical);
        true
    }

    pub fn canonical<'a>(&'a self, name: &'a str) -> &'a str {
        let mut current = name;
        // chains are acyclic by construction of `declare`
        while let Some(next) = self.map.get(current) {
            current = next;
        }
        current
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &String)> {
        self.map.iter()
    }
}

/// Single-valued dimension bindings of a table instance, e.g. `DEP → d21`.
pub type Bindings = BTreeMap<String, String>;

/// True when no dimension present in both carries different labels.
pub fn compatible(genesis: &Genesis, bindings: &Bindings, aliases: &Aliases) -> bool {
    let mut by_dim: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for e in genesis.iter() {
        by_dim
            .entry(aliases.canonical(e.dimension()))
            .or_default()
            .insert(e.element_label.as_str());
    }
    bindings.iter().all(|(dim, label)| match by_dim.get(aliases.canonical(dim)) {
        Some(labels) => labels.contains(label.as_str()),
        None => true,
    })
}
