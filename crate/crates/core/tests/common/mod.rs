#![allow(dead_code)]

use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use routine_dynamics::scene::{DaySequence, Node, NodeCatalog, NodeId, ProbGraph, SceneGraph};

/// Root, then `locations` static nodes, then `objects` movable ones.
pub fn catalog(locations: usize, objects: usize) -> Arc<NodeCatalog> {
    let nodes = (0..1 + locations + objects)
        .map(|i| Node {
            id: NodeId(i),
            name: if i == 0 {
                "root".into()
            } else if i <= locations {
                format!("loc{i}")
            } else {
                format!("obj{i}")
            },
            is_root: i == 0,
            is_static: i <= locations,
        })
        .collect();
    Arc::new(NodeCatalog::new(nodes).unwrap())
}

/// Static nodes hang below the root or an earlier static node; objects sit
/// on a static node or, now and then, inside an earlier object.
pub fn random_tree(cat: &Arc<NodeCatalog>, rng: &mut impl Rng, minute: u32) -> SceneGraph {
    let locations = cat.nodes().iter().filter(|n| n.is_static && !n.is_root).count();
    let mut parents = vec![None; cat.len()];
    for i in 1..cat.len() {
        let p = if i <= locations {
            rng.random_range(0..i)
        } else if i > locations + 1 && rng.random_bool(0.2) {
            rng.random_range(locations + 1..i)
        } else {
            rng.random_range(1..=locations)
        };
        parents[i] = Some(NodeId(p));
    }
    SceneGraph::new_valid(cat.clone(), parents, minute).unwrap()
}

/// Moves a few objects of `g` to random static locations.
pub fn shuffle_objects(g: &SceneGraph, rng: &mut impl Rng, moves: usize) -> SceneGraph {
    let cat = g.catalog().clone();
    let locations: Vec<usize> = (1..cat.len()).filter(|&i| cat.nodes()[i].is_static).collect();
    let objects: Vec<usize> = cat.movable().map(|o| o.index()).collect();
    let mut parents = g.parents().to_vec();
    for _ in 0..moves {
        let o = objects[rng.random_range(0..objects.len())];
        // Lift anything held by `o` onto its old parent to keep the tree.
        let old = parents[o];
        for p in parents.iter_mut() {
            if *p == Some(NodeId(o)) {
                *p = old;
            }
        }
        parents[o] = Some(NodeId(locations[rng.random_range(0..locations.len())]));
    }
    SceneGraph::new_valid(cat, parents, g.minute() + 10).unwrap()
}

/// Row-normalized random parent distributions; some rows are peaked, some
/// flat, some exactly tied.
pub fn random_probs(cat: &Arc<NodeCatalog>, rng: &mut impl Rng) -> ProbGraph {
    let n = cat.len();
    let mut probs = Array2::zeros((n, n));
    for i in 1..n {
        let style = rng.random_range(0..3);
        for j in 0..n {
            probs[[i, j]] = match style {
                0 => rng.random::<f64>(),
                1 => rng.random::<f64>().powi(8),
                _ => 1.0,
            };
        }
        let s: f64 = probs.row(i).sum();
        probs.row_mut(i).mapv_inplace(|v| v / s);
    }
    ProbGraph::new(cat.clone(), probs, 370).unwrap()
}

/// Days on which `object` moves from `home` to `away` at `minute` and back
/// an hour later, with distractors moving at random times.
pub fn planted_days(
    cat: &Arc<NodeCatalog>,
    base: &SceneGraph,
    object: NodeId,
    away: NodeId,
    minute: u32,
    days: std::ops::Range<u32>,
    rng: &mut impl Rng,
) -> Vec<DaySequence> {
    let home = base.parent(object).unwrap();
    let distractors: Vec<NodeId> = cat.movable().filter(|&o| o != object).collect();
    let locations: Vec<NodeId> = cat.nodes().iter().filter(|n| n.is_static && !n.is_root).map(|n| n.id).collect();
    days.map(|day| {
        let mut parents = base.parents().to_vec();
        let mut graphs = Vec::new();
        let mut events: Vec<(u32, NodeId, NodeId)> = vec![(minute, object, away), (minute + 60, object, home)];
        for &d in &distractors {
            let at = rng.random_range(40..100) * 10;
            let to = locations[rng.random_range(0..locations.len())];
            events.push((at, d, to));
            events.push((at + 10 * rng.random_range(1..12), d, base.parent(d).unwrap()));
        }
        for m in (360..=1440).step_by(10) {
            for &(at, o, to) in &events {
                if at == m {
                    parents[o.index()] = Some(to);
                }
            }
            graphs.push(SceneGraph::new_valid(cat.clone(), parents.clone(), m).unwrap());
        }
        DaySequence { day, graphs }
    })
    .collect()
}
