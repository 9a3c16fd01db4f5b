//! Scene graphs over a fixed catalog of object/location nodes.
//!
//! An arrangement of the household is an in-tree: every node except the
//! root points at exactly one parent location, and following parents from
//! any node ends at the root. Objects may themselves be locations (food on
//! a plate), so the catalog does not split nodes into disjoint kinds; the
//! `is_static` flag only marks rooms and furniture, which evaluation ignores.

mod io;
mod posterior;
mod relocation;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use io::{read_catalog, read_day, write_catalog, write_day, CatalogFile, DaySequence, SceneRecord};
pub use posterior::posterior;
pub use relocation::{apply, compose, diff, objects_of, Relocation, RelocationSet};

/// Grid step between consecutive snapshots, in minutes.
pub const STEP_MINUTES: u32 = 10;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub name: String,
    pub is_root: bool,
    /// Rooms and furniture. Movable objects have this unset.
    pub is_static: bool,
}

/// The fixed node set shared by every graph of a household.
#[derive(Clone, Debug)]
pub struct NodeCatalog {
    nodes: Vec<Node>,
    root: NodeId,
    by_name: HashMap<String, NodeId>,
}

impl PartialEq for NodeCatalog {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes
    }
}

impl Eq for NodeCatalog {}

impl NodeCatalog {
    pub fn new(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidCatalog("no nodes".into()));
        }
        let mut root = None;
        let mut by_name = HashMap::with_capacity(nodes.len());
        for (index, node) in nodes.iter().enumerate() {
            if node.id.index() != index {
                return Err(Error::InvalidCatalog(format!(
                    "node `{}` has id {} at position {index}; ids must be dense 0..N-1",
                    node.name, node.id.0
                )));
            }
            if node.is_root {
                if let Some(previous) = root.replace(node.id) {
                    return Err(Error::InvalidCatalog(format!(
                        "two root nodes: {} and {}",
                        previous, node.id
                    )));
                }
            }
            if by_name.insert(node.name.clone(), node.id).is_some() {
                return Err(Error::InvalidCatalog(format!("duplicate node name `{}`", node.name)));
            }
        }
        let root = root.ok_or_else(|| Error::InvalidCatalog("no root node".into()))?;
        Ok(NodeCatalog { nodes, root, by_name })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn name(&self, id: NodeId) -> &str {
        self.nodes
            .get(id.index())
            .map(|n| n.name.as_str())
            .unwrap_or("<unknown>")
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id.index() < self.nodes.len()
    }

    /// Movable (non-static, non-root) objects in id order.
    pub fn movable(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .filter(|n| !n.is_static && !n.is_root)
            .map(|n| n.id)
    }

    pub fn is_movable(&self, id: NodeId) -> bool {
        self.nodes
            .get(id.index())
            .is_some_and(|n| !n.is_static && !n.is_root)
    }

    pub fn to_file(&self) -> CatalogFile {
        CatalogFile {
            nodes: self.nodes.clone(),
        }
    }

    /// SHA-256 of the canonical catalog file, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(&self.to_file()).expect("catalog serializes");
        hex_digest(&bytes)
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    hash.iter().map(|b| format!("{b:02x}")).collect()
}

pub(crate) fn same_catalog(a: &Arc<NodeCatalog>, b: &Arc<NodeCatalog>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// One problem found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Diagnostic {
    RootHasParent(NodeId),
    MissingParent(NodeId),
    UnknownParent { node: NodeId, parent: NodeId },
    Cycle(Vec<NodeId>),
    /// The node's parent chain ends somewhere other than the root.
    DetachedFromRoot(NodeId),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Validation {
    pub diagnostics: Vec<Diagnostic>,
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        self.diagnostics.is_empty()
    }

    /// Human-readable diagnostics using catalog names.
    pub fn describe(&self, catalog: &NodeCatalog) -> Vec<String> {
        self.diagnostics
            .iter()
            .map(|d| match d {
                Diagnostic::RootHasParent(n) => format!("root `{}` has a parent", catalog.name(*n)),
                Diagnostic::MissingParent(n) => format!("`{}` has no parent", catalog.name(*n)),
                Diagnostic::UnknownParent { node, parent } => {
                    format!("`{}` points at unknown node {}", catalog.name(*node), parent.0)
                }
                Diagnostic::Cycle(nodes) => {
                    let names: Vec<_> = nodes.iter().map(|n| catalog.name(*n)).collect();
                    format!("cycle through {}", names.join(" -> "))
                }
                Diagnostic::DetachedFromRoot(n) => {
                    format!("`{}` does not reach the root", catalog.name(*n))
                }
            })
            .collect()
    }
}

/// A concrete arrangement at one grid time.
#[derive(Clone, Debug)]
pub struct SceneGraph {
    catalog: Arc<NodeCatalog>,
    parents: Vec<Option<NodeId>>,
    minute: u32,
}

impl PartialEq for SceneGraph {
    fn eq(&self, other: &Self) -> bool {
        same_catalog(&self.catalog, &other.catalog)
            && self.parents == other.parents
            && self.minute == other.minute
    }
}

impl SceneGraph {
    /// Builds a graph without checking the in-tree invariants; call
    /// [`SceneGraph::validate`] to inspect them.
    pub fn new(catalog: Arc<NodeCatalog>, parents: Vec<Option<NodeId>>, minute: u32) -> Result<Self> {
        if parents.len() != catalog.len() {
            return Err(Error::InvalidGraph(format!(
                "{} parent entries for a catalog of {} nodes",
                parents.len(),
                catalog.len()
            )));
        }
        Ok(SceneGraph {
            catalog,
            parents,
            minute,
        })
    }

    /// Builds a graph and rejects it unless it is a valid in-tree.
    pub fn new_valid(catalog: Arc<NodeCatalog>, parents: Vec<Option<NodeId>>, minute: u32) -> Result<Self> {
        let graph = Self::new(catalog, parents, minute)?;
        graph.ensure_valid()?;
        Ok(graph)
    }

    pub fn catalog(&self) -> &Arc<NodeCatalog> {
        &self.catalog
    }

    pub fn parents(&self) -> &[Option<NodeId>] {
        &self.parents
    }

    pub fn parent(&self, node: NodeId) -> Option<NodeId> {
        self.parents.get(node.index()).copied().flatten()
    }

    pub fn minute(&self) -> u32 {
        self.minute
    }

    pub fn with_minute(mut self, minute: u32) -> Self {
        self.minute = minute;
        self
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    /// Same catalog and same parent relation, ignoring the timestamp.
    pub fn same_arrangement(&self, other: &SceneGraph) -> bool {
        same_catalog(&self.catalog, &other.catalog) && self.parents == other.parents
    }

    /// Dense N x N adjacency, `adj[i][j] = 1` iff `j` is the parent of `i`.
    pub fn adjacency(&self) -> Array2<f64> {
        let n = self.len();
        let mut adj = Array2::zeros((n, n));
        for (i, p) in self.parents.iter().enumerate() {
            if let Some(p) = p {
                if p.index() < n {
                    adj[[i, p.index()]] = 1.0;
                }
            }
        }
        adj
    }

    pub fn validate(&self) -> Validation {
        validate(self)
    }

    pub(crate) fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidGraph(v.describe(&self.catalog).join("; ")))
        }
    }

    pub(crate) fn set_parent(&mut self, node: NodeId, parent: NodeId) {
        self.parents[node.index()] = Some(parent);
    }
}

/// Checks both in-tree invariants and reports every violating node.
pub fn validate(graph: &SceneGraph) -> Validation {
    const UNVISITED: u8 = 0;
    const ON_PATH: u8 = 1;
    const ROOTED: u8 = 2;
    const BROKEN: u8 = 3;

    let catalog = &graph.catalog;
    let n = graph.parents.len();
    let root = catalog.root();
    let mut diagnostics = Vec::new();

    // Local defects first; they terminate walks below.
    for (i, parent) in graph.parents.iter().enumerate() {
        let node = NodeId(i);
        match parent {
            Some(_) if node == root => diagnostics.push(Diagnostic::RootHasParent(node)),
            None if node != root => diagnostics.push(Diagnostic::MissingParent(node)),
            Some(p) if p.index() >= n => diagnostics.push(Diagnostic::UnknownParent { node, parent: *p }),
            _ => {}
        }
    }

    let mut state = vec![UNVISITED; n];
    if root.index() < n {
        state[root.index()] = ROOTED;
    }
    let mut on_cycle = vec![false; n];
    let mut path = Vec::new();
    for start in 0..n {
        if state[start] != UNVISITED {
            continue;
        }
        path.clear();
        let mut current = start;
        let outcome = loop {
            match state[current] {
                ROOTED => break ROOTED,
                BROKEN => break BROKEN,
                ON_PATH => {
                    let from = path.iter().position(|&p| p == current).expect("node on path");
                    let cycle: Vec<NodeId> = path[from..].iter().map(|&i| NodeId(i)).collect();
                    for id in &cycle {
                        on_cycle[id.index()] = true;
                    }
                    diagnostics.push(Diagnostic::Cycle(cycle));
                    break BROKEN;
                }
                _ => {}
            }
            state[current] = ON_PATH;
            path.push(current);
            match graph.parents[current] {
                Some(p) if p.index() < n && current != root.index() => current = p.index(),
                _ => break BROKEN,
            }
        };
        for &i in &path {
            state[i] = outcome;
        }
    }

    for i in 0..n {
        let node = NodeId(i);
        let locally_broken = node == root || graph.parents[i].is_none() || graph.parents[i].is_some_and(|p| p.index() >= n);
        if state[i] == BROKEN && !on_cycle[i] && !locally_broken {
            diagnostics.push(Diagnostic::DetachedFromRoot(node));
        }
    }

    Validation { diagnostics }
}

/// Per-node categorical distribution over parents.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbGraph {
    catalog: Arc<NodeCatalog>,
    probs: Array2<f64>,
    minute: u32,
}

impl ProbGraph {
    pub const ROW_TOLERANCE: f64 = 1e-6;

    /// Checked constructor: entries in [0, 1], non-root rows sum to one,
    /// root row all zeros.
    pub fn new(catalog: Arc<NodeCatalog>, probs: Array2<f64>, minute: u32) -> Result<Self> {
        let graph = ProbGraph {
            catalog,
            probs,
            minute,
        };
        graph.check()?;
        Ok(graph)
    }

    pub(crate) fn new_unchecked(catalog: Arc<NodeCatalog>, probs: Array2<f64>, minute: u32) -> Self {
        ProbGraph {
            catalog,
            probs,
            minute,
        }
    }

    /// Degenerate distribution placing all mass on the graph's parents.
    pub fn one_hot(graph: &SceneGraph) -> Self {
        ProbGraph {
            catalog: graph.catalog.clone(),
            probs: graph.adjacency(),
            minute: graph.minute,
        }
    }

    pub fn check(&self) -> Result<()> {
        let n = self.catalog.len();
        if self.probs.dim() != (n, n) {
            return Err(Error::InvalidGraph(format!(
                "probability matrix is {:?}, catalog has {n} nodes",
                self.probs.dim()
            )));
        }
        let root = self.catalog.root().index();
        for (i, row) in self.probs.outer_iter().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::InvalidGraph(format!(
                    "row `{}` has entries outside [0, 1]",
                    self.catalog.name(NodeId(i))
                )));
            }
            let sum: f64 = row.sum();
            if i == root {
                if sum != 0.0 {
                    return Err(Error::InvalidGraph("root row must be zero".into()));
                }
            } else if (sum - 1.0).abs() > Self::ROW_TOLERANCE {
                return Err(Error::InvalidGraph(format!(
                    "row `{}` sums to {sum}",
                    self.catalog.name(NodeId(i))
                )));
            }
        }
        Ok(())
    }

    pub fn catalog(&self) -> &Arc<NodeCatalog> {
        &self.catalog
    }

    pub fn probs(&self) -> &Array2<f64> {
        &self.probs
    }

    pub fn prob(&self, node: NodeId, parent: NodeId) -> f64 {
        self.probs[[node.index(), parent.index()]]
    }

    pub fn minute(&self) -> u32 {
        self.minute
    }

    pub fn into_probs(self) -> Array2<f64> {
        self.probs
    }
}
