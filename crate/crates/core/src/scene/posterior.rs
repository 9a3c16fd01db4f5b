use std::cmp::Ordering;

use super::{NodeId, ProbGraph, SceneGraph};

/// Most likely in-tree under a per-node parent distribution.
///
/// Nodes are assigned in descending order of their best probability. A node
/// whose best parent would close a cycle among the already-assigned nodes
/// falls back to its next most probable parent. Ties go to the lowest index.
/// The root never closes a cycle, so the result is always a valid in-tree.
pub fn posterior(p: &ProbGraph) -> SceneGraph {
    let catalog = p.catalog().clone();
    let n = catalog.len();
    let root = catalog.root();
    let probs = p.probs().as_standard_layout();
    let flat = probs.as_slice().expect("standard layout");
    let row = |i: usize| &flat[i * n..(i + 1) * n];

    // Best off-diagonal parent per node; the first maximum wins ties.
    let argmax = |i: usize| -> (usize, f64) {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for (j, &v) in row(i).iter().enumerate() {
            if j != i && (v > best.1 || best.0 == usize::MAX) {
                best = (j, v);
            }
        }
        best
    };
    let mut order: Vec<(usize, usize, f64)> = (0..n)
        .filter(|&i| i != root.index())
        .map(|i| {
            let (j, v) = argmax(i);
            (i, j, v)
        })
        .collect();
    order.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap_or(Ordering::Equal).then(a.0.cmp(&b.0)));

    let mut parents: Vec<Option<NodeId>> = vec![None; n];
    let mut candidates: Vec<usize> = Vec::with_capacity(n);
    for (i, best, _) in order {
        if !reaches(&parents, best, i) {
            parents[i] = Some(NodeId(best));
            continue;
        }
        let row = row(i);
        candidates.clear();
        candidates.extend((0..n).filter(|&j| j != i));
        candidates.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
        let chosen = candidates
            .iter()
            .copied()
            .find(|&j| !reaches(&parents, j, i))
            .unwrap_or(root.index());
        parents[i] = Some(NodeId(chosen));
    }

    SceneGraph::new(catalog, parents, p.minute()).expect("parent vector sized to catalog")
}

/// Whether following assigned parents from `from` arrives at `target`.
fn reaches(parents: &[Option<NodeId>], from: usize, target: usize) -> bool {
    let mut current = from;
    let mut hops = 0;
    loop {
        if current == target {
            return true;
        }
        match parents[current] {
            Some(p) => current = p.index(),
            None => return false,
        }
        hops += 1;
        debug_assert!(hops <= parents.len(), "assigned parents contain a cycle");
    }
}
