use std::collections::BTreeSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{same_catalog, NodeId, SceneGraph};
use crate::error::{Error, Result};

/// Object `object` moves from `origin` to `destination`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relocation {
    pub object: NodeId,
    pub origin: NodeId,
    pub destination: NodeId,
}

impl Relocation {
    pub fn new(object: NodeId, origin: NodeId, destination: NodeId) -> Result<Self> {
        if origin == destination {
            return Err(Error::InvalidRelocation(format!(
                "{object} has identical origin and destination {origin}"
            )));
        }
        Ok(Relocation {
            object,
            origin,
            destination,
        })
    }
}

/// Relocations keyed by `(object, origin)`, iterated in insertion order.
///
/// Equality is set equality; insertion order only fixes iteration.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RelocationSet {
    moves: IndexMap<(NodeId, NodeId), NodeId>,
}

impl RelocationSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts unless a relocation of the same object from the same origin
    /// is already present. Returns whether it was inserted.
    pub fn insert(&mut self, r: Relocation) -> bool {
        match self.moves.entry((r.object, r.origin)) {
            indexmap::map::Entry::Occupied(_) => false,
            indexmap::map::Entry::Vacant(slot) => {
                slot.insert(r.destination);
                true
            }
        }
    }

    pub fn contains(&self, r: &Relocation) -> bool {
        self.moves.get(&(r.object, r.origin)) == Some(&r.destination)
    }

    pub fn has_move_from(&self, object: NodeId, origin: NodeId) -> bool {
        self.moves.contains_key(&(object, origin))
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = Relocation> + '_ {
        self.moves.iter().map(|(&(object, origin), &destination)| Relocation {
            object,
            origin,
            destination,
        })
    }

    /// Triples present in both sets, in `self`'s order.
    pub fn intersection(&self, other: &RelocationSet) -> RelocationSet {
        self.iter().filter(|r| other.contains(r)).collect()
    }

    pub fn objects(&self) -> BTreeSet<NodeId> {
        self.moves.keys().map(|&(object, _)| object).collect()
    }
}

impl FromIterator<Relocation> for RelocationSet {
    fn from_iter<I: IntoIterator<Item = Relocation>>(iter: I) -> Self {
        let mut set = RelocationSet::new();
        for r in iter {
            set.insert(r);
        }
        set
    }
}

impl<'a> IntoIterator for &'a RelocationSet {
    type Item = Relocation;
    type IntoIter = Box<dyn Iterator<Item = Relocation> + 'a>;

    fn into_iter(self) -> Self::IntoIter {
        Box::new(self.iter())
    }
}

/// Relocations taking `from` to `to`: every node whose parent differs.
pub fn diff(from: &SceneGraph, to: &SceneGraph) -> Result<RelocationSet> {
    if !same_catalog(from.catalog(), to.catalog()) {
        return Err(Error::CatalogMismatch);
    }
    let mut set = RelocationSet::new();
    for (i, (a, b)) in from.parents().iter().zip(to.parents()).enumerate() {
        if let (Some(a), Some(b)) = (a, b) {
            if a != b {
                set.insert(Relocation {
                    object: NodeId(i),
                    origin: *a,
                    destination: *b,
                });
            }
        }
    }
    Ok(set)
}

/// Extends a multi-step prediction with the next step's relocations.
///
/// A step relocation is dropped iff the prefix already moves the same
/// object out of the same origin. Chained moves (l1 -> l2, then l2 -> l3)
/// are both kept.
pub fn compose(prefix: &RelocationSet, step: &RelocationSet) -> RelocationSet {
    let mut out = prefix.clone();
    for r in step.iter() {
        if !prefix.has_move_from(r.object, r.origin) {
            out.insert(r);
        }
    }
    out
}

/// Applies relocations in insertion order, checking each origin.
pub fn apply(graph: &SceneGraph, relocations: &RelocationSet) -> Result<SceneGraph> {
    let catalog = graph.catalog().clone();
    let mut out = graph.clone();
    for r in relocations.iter() {
        for id in [r.object, r.origin, r.destination] {
            if !catalog.contains(id) {
                return Err(Error::InvalidRelocation(format!("unknown node {id}")));
            }
        }
        if r.object == catalog.root() {
            return Err(Error::InvalidRelocation("the root cannot be relocated".into()));
        }
        let current = out.parent(r.object);
        if current != Some(r.origin) {
            return Err(Error::OriginMismatch {
                object: catalog.name(r.object).to_string(),
                expected: catalog.name(r.origin).to_string(),
                actual: current.map_or("<none>", |p| catalog.name(p)).to_string(),
            });
        }
        out.set_parent(r.object, r.destination);
    }
    if let Some(cycle) = out.validate().diagnostics.iter().find_map(|d| match d {
        super::Diagnostic::Cycle(nodes) => Some(nodes.clone()),
        _ => None,
    }) {
        return Err(Error::Cycle(catalog.name(cycle[0]).to_string()));
    }
    out.ensure_valid()?;
    Ok(out)
}

pub fn objects_of(relocations: &RelocationSet) -> BTreeSet<NodeId> {
    relocations.objects()
}
