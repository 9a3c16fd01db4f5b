//! Reference predictors: static relation-frequency priors and periodic
//! (spectral) priors over parent relations.

mod fremen;

use std::sync::Arc;

use ndarray::Array2;

pub use fremen::{fremen_fit, fremen_predict, FremenModel, DEFAULT_COMPONENTS, DEFAULT_DECAY_RATE};

use crate::error::{Error, Result};
use crate::scene::{DaySequence, NodeCatalog, ProbGraph, SceneGraph};

pub const DEFAULT_P_CHANGE: f64 = 0.05;

/// Per-node parent frequencies over the training snapshots.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticPrior {
    pub prior: Array2<f64>,
    pub p_change: f64,
}

/// Catalog shared by every snapshot of a training set.
pub(crate) fn training_catalog(train: &[DaySequence]) -> Result<Arc<NodeCatalog>> {
    let first = train
        .iter()
        .flat_map(|d| d.graphs.first())
        .next()
        .ok_or(Error::EmptyDataset)?;
    let catalog = first.catalog().clone();
    if train.iter().flat_map(|d| &d.graphs).any(|g| g.len() != catalog.len()) {
        return Err(Error::CatalogMismatch);
    }
    Ok(catalog)
}

/// Rows of `counts` scaled to sum to one; rows with no mass stay zero.
pub(crate) fn normalize_rows(counts: &mut Array2<f64>) {
    for mut row in counts.rows_mut() {
        let s = row.sum();
        if s > 0.0 {
            row.mapv_inplace(|v| v / s);
        }
    }
}

pub fn static_fit(train: &[DaySequence], p_change: f64) -> Result<StaticPrior> {
    if !(0.0..=1.0).contains(&p_change) {
        return Err(Error::Config(format!("p_change {p_change} outside [0, 1]")));
    }
    let catalog = training_catalog(train)?;
    let n = catalog.len();
    let mut prior = Array2::zeros((n, n));
    for g in train.iter().flat_map(|d| &d.graphs) {
        for (i, p) in g.parents().iter().enumerate() {
            if let Some(p) = p {
                prior[[i, p.index()]] += 1.0;
            }
        }
    }
    normalize_rows(&mut prior);
    Ok(StaticPrior { prior, p_change })
}

/// Geometric mixing of the current one-hot belief toward the prior.
pub fn static_predict(model: &StaticPrior, g_t: &SceneGraph, steps: usize) -> Result<ProbGraph> {
    let catalog = g_t.catalog().clone();
    if model.prior.nrows() != catalog.len() {
        return Err(Error::CatalogMismatch);
    }
    let keep = (1.0 - model.p_change).powi(steps as i32);
    let mut belief = model.prior.mapv(|p| (1.0 - keep) * p);
    for (i, parent) in g_t.parents().iter().enumerate() {
        let Some(parent) = parent else { continue };
        let mut row = belief.row_mut(i);
        if model.prior.row(i).iter().all(|&p| p == 0.0) {
            // Never observed: stay put.
            row[parent.index()] = 1.0;
        } else {
            row[parent.index()] += keep;
        }
    }
    Ok(ProbGraph::new_unchecked(catalog, belief, g_t.minute() + 10 * steps as u32))
}
