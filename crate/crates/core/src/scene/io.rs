//! Line-delimited JSON records for scene-graph sequences and the catalog file.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Node, NodeCatalog, NodeId, SceneGraph};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogFile {
    pub nodes: Vec<Node>,
}

/// One snapshot: `{"day": .., "minute": .., "parents": {"<id>": <id>, ..}}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub day: u32,
    pub minute: u32,
    pub parents: BTreeMap<usize, usize>,
}

impl SceneRecord {
    pub fn from_graph(day: u32, graph: &SceneGraph) -> Self {
        let parents = graph
            .parents()
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.map(|p| (i, p.index())))
            .collect();
        SceneRecord {
            day,
            minute: graph.minute(),
            parents,
        }
    }

    pub fn to_graph(&self, catalog: &Arc<NodeCatalog>) -> Result<SceneGraph> {
        let mut parents = vec![None; catalog.len()];
        for (&child, &parent) in &self.parents {
            let slot = parents
                .get_mut(child)
                .ok_or_else(|| Error::InvalidGraph(format!("record names unknown node {child}")))?;
            *slot = Some(NodeId(parent));
        }
        SceneGraph::new(catalog.clone(), parents, self.minute)
    }
}

/// One simulated day of snapshots on the step grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DaySequence {
    pub day: u32,
    pub graphs: Vec<SceneGraph>,
}

pub fn write_catalog(path: &Path, catalog: &NodeCatalog) -> Result<()> {
    let json = serde_json::to_string_pretty(&catalog.to_file())?;
    fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_catalog(path: &Path) -> Result<Arc<NodeCatalog>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: CatalogFile = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    Ok(Arc::new(NodeCatalog::new(file.nodes)?))
}

pub fn write_day(path: &Path, day: &DaySequence) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for graph in &day.graphs {
        let line = serde_json::to_string(&SceneRecord::from_graph(day.day, graph))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_day(path: &Path, catalog: &Arc<NodeCatalog>) -> Result<DaySequence> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut graphs = Vec::new();
    let mut day = None;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SceneRecord = serde_json::from_str(&line).map_err(|e| Error::parse(path, e))?;
        match day {
            None => day = Some(record.day),
            Some(d) if d != record.day => {
                return Err(Error::InvalidGraph(format!(
                    "{}: mixed days {d} and {}",
                    path.display(),
                    record.day
                )))
            }
            _ => {}
        }
        graphs.push(record.to_graph(catalog)?);
    }
    let day = day.ok_or_else(|| Error::NotEnoughData(format!("{} has no records", path.display())))?;
    Ok(DaySequence { day, graphs })
}
