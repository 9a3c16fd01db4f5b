//! Relocation-set scoring over proactivity windows and the experiment
//! recipes built on it.

mod experiments;
mod report;

use std::collections::BTreeSet;
use std::ops::AddAssign;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use experiments::{
    ablation_configs, fit_all_kinds, fit_predictor, run_ablations, run_data_efficiency, run_proactivity_sweep, run_table1, tune_fremen, tune_static,
    FitOptions, Fitted, PredictorKind, PredictorSet, ABLATIONS, FREMEN_COMPONENTS, FREMEN_DECAY_RATES, STATIC_GRID, SWEEP_DELTAS,
};
pub use report::{Report, ReportRow};

use crate::baselines::{fremen_predict, static_predict};
use crate::checkpoint::Model;
use crate::error::{Error, Result};
use crate::gnn::rollout;
use crate::scene::{compose, diff, posterior, DaySequence, NodeCatalog, NodeId, ProbGraph, RelocationSet, SceneGraph};

/// Anything that forecasts future arrangements from the current one.
pub trait Predictor: Sync {
    /// Distributions for steps `1..=steps` after `g_t`, observed on `day`.
    fn forecast(&self, g_t: &SceneGraph, day: u32, steps: usize) -> Result<Vec<ProbGraph>>;
}

impl Predictor for Model {
    fn forecast(&self, g_t: &SceneGraph, day: u32, steps: usize) -> Result<Vec<ProbGraph>> {
        match self {
            Model::Gnn(p) => rollout(p, g_t, steps, p.config.rollout),
            Model::Static(m) => (1..=steps).map(|k| static_predict(m, g_t, k)).collect(),
            Model::Fremen(m) => (1..=steps).map(|k| fremen_predict(m, g_t, day, k)).collect(),
        }
    }
}

/// Relocation sets for every horizon `1..=steps`: each step's posterior is
/// diffed against the running predicted graph and folded in with `compose`.
pub fn predicted_relocation_prefixes(
    predictor: &dyn Predictor,
    g_t: &SceneGraph,
    day: u32,
    steps: usize,
) -> Result<Vec<RelocationSet>> {
    let forecast = predictor.forecast(g_t, day, steps)?;
    let mut running = g_t.clone();
    let mut acc = RelocationSet::new();
    let mut out = Vec::with_capacity(steps);
    for p in &forecast {
        let next = posterior(p);
        acc = compose(&acc, &diff(&running, &next)?);
        out.push(acc.clone());
        running = next;
    }
    Ok(out)
}

pub fn predicted_relocations(predictor: &dyn Predictor, g_t: &SceneGraph, day: u32, delta_steps: usize) -> Result<RelocationSet> {
    Ok(predicted_relocation_prefixes(predictor, g_t, day, delta_steps)?
        .pop()
        .unwrap_or_default())
}

/// Relocations the user actually made over `graphs[t..=t + steps]`.
pub fn true_relocations(graphs: &[SceneGraph], t: usize, steps: usize) -> Result<RelocationSet> {
    let mut acc = RelocationSet::new();
    for w in graphs[t..=t + steps].windows(2) {
        acc = compose(&acc, &diff(&w[0], &w[1])?);
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub used_correct: u64,
    pub used_wrong: u64,
    pub used_missed: u64,
    pub unused_correct: u64,
    pub unused_wrong: u64,
}

impl Counts {
    pub fn used(&self) -> u64 {
        self.used_correct + self.used_wrong + self.used_missed
    }

    pub fn unused(&self) -> u64 {
        self.unused_correct + self.unused_wrong
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.used_correct += o.used_correct;
        self.used_wrong += o.used_wrong;
        self.used_missed += o.used_missed;
        self.unused_correct += o.unused_correct;
        self.unused_wrong += o.unused_wrong;
    }
}

/// Scores predicted against true relocations over the catalog's movable
/// objects. Predicted moves of objects the user left alone count as
/// unused-wrong.
pub fn evaluate_window(r_pred: &RelocationSet, r_true: &RelocationSet, catalog: &NodeCatalog) -> Result<Counts> {
    for r in r_pred.iter().chain(r_true.iter()) {
        if [r.object, r.origin, r.destination].iter().any(|&id| !catalog.contains(id)) {
            return Err(Error::CatalogMismatch);
        }
    }
    let movable = |set: BTreeSet<NodeId>| -> BTreeSet<NodeId> { set.into_iter().filter(|&o| catalog.is_movable(o)).collect() };
    let pred = movable(r_pred.objects());
    let truth = movable(r_true.objects());
    let correct = movable(r_pred.intersection(r_true).objects());
    let both = pred.intersection(&truth).count() as u64;
    let n_movable = catalog.movable().count() as u64;
    let unused_wrong = pred.difference(&truth).count() as u64;
    Ok(Counts {
        used_correct: correct.len() as u64,
        used_wrong: both - correct.len() as u64,
        used_missed: truth.difference(&pred).count() as u64,
        unused_wrong,
        unused_correct: n_movable - truth.len() as u64 - unused_wrong,
    })
}

/// Pooled counts per horizon in `deltas` (in steps) over every window of
/// every day. Windows running past the end of a day are dropped.
pub fn evaluate_days(predictor: &dyn Predictor, days: &[DaySequence], deltas: &[usize]) -> Result<Vec<Counts>> {
    let max = deltas.iter().copied().max().unwrap_or(0);
    let starts: Vec<(usize, usize)> = days
        .iter()
        .enumerate()
        .flat_map(|(d, day)| (0..day.graphs.len().saturating_sub(1)).map(move |t| (d, t)))
        .collect();
    let per_window: Vec<Vec<Counts>> = starts
        .par_iter()
        .map(|&(d, t)| {
            let day = &days[d];
            let remaining = day.graphs.len() - 1 - t;
            let horizon = max.min(remaining);
            let g_t = &day.graphs[t];
            let prefixes = predicted_relocation_prefixes(predictor, g_t, day.day, horizon)?;
            let catalog = g_t.catalog();
            deltas
                .iter()
                .map(|&delta| {
                    if delta > remaining || delta == 0 {
                        return Ok(Counts::default());
                    }
                    let truth = true_relocations(&day.graphs, t, delta)?;
                    evaluate_window(&prefixes[delta - 1], &truth, catalog)
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut totals = vec![Counts::default(); deltas.len()];
    for w in per_window {
        for (acc, c) in totals.iter_mut().zip(w) {
            *acc += c;
        }
    }
    Ok(totals)
}

#[cfg(test)]
mod tests;
