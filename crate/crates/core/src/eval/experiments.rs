use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde_json::json;

use super::{evaluate_days, Counts, Predictor, Report, ReportRow};
use crate::baselines::{fremen_fit, static_fit, DEFAULT_P_CHANGE};
use crate::checkpoint::Model;
use crate::error::{Error, Result};
use crate::gnn::{train_with_log, ModelConfig};
use crate::scene::{DaySequence, STEP_MINUTES};
use crate::sim::RoutineDataset;
use crate::timecode::TimeEncodingConfig;

pub const SWEEP_DELTAS: [u32; 12] = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 110, 120];
pub const STATIC_GRID: [f64; 10] = [0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0];
pub const FREMEN_COMPONENTS: [usize; 5] = [0, 1, 2, 3, 5];
/// Decay rates per minute.
pub const FREMEN_DECAY_RATES: [f64; 6] = [1.0 / 120.0, 1.0 / 60.0, 1.0 / 30.0, 1.0 / 10.0, 1.0 / 3.0, 1.0];
pub const ABLATIONS: [&str; 3] = ["full", "no_attention", "linear_time"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PredictorKind {
    Gnn,
    Fremen,
    Static,
}

impl PredictorKind {
    pub const ALL: [PredictorKind; 3] = [PredictorKind::Gnn, PredictorKind::Fremen, PredictorKind::Static];

    pub fn name(self) -> &'static str {
        match self {
            PredictorKind::Gnn => "gnn",
            PredictorKind::Fremen => "fremen",
            PredictorKind::Static => "static",
        }
    }
}

impl fmt::Display for PredictorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PredictorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown predictor `{s}` (expected gnn, fremen or static)")))
    }
}

#[derive(Clone, Debug)]
pub struct FitOptions {
    pub gnn: ModelConfig,
    /// Horizon in steps at which baseline hyper-parameters are tuned.
    pub tune_delta_steps: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            gnn: ModelConfig::default(),
            tune_delta_steps: 3,
        }
    }
}

/// A trained model with the hyper-parameters it was trained with.
#[derive(Clone, Debug)]
pub struct Fitted {
    pub model: Model,
    pub hyper: serde_json::Value,
    /// Mean loss per epoch; empty for the baselines.
    pub epoch_losses: Vec<f64>,
}

impl Predictor for Fitted {
    fn forecast(&self, g_t: &crate::scene::SceneGraph, day: u32, steps: usize) -> Result<Vec<crate::scene::ProbGraph>> {
        self.model.forecast(g_t, day, steps)
    }
}

/// Fitted models of one predictor, one per household.
pub struct PredictorSet {
    pub name: String,
    pub per_household: Vec<Fitted>,
}

/// Trailing train days held out for baseline tuning.
fn validation_split(train: &[DaySequence]) -> Option<(&[DaySequence], &[DaySequence])> {
    let n = train.len();
    (n >= 2).then(|| train.split_at(n - (n / 10).max(1)))
}

/// Net correct relocations, then fewer disturbed unused objects.
fn score(c: &Counts) -> (i64, i64) {
    (c.used_correct as i64 - c.used_wrong as i64, -(c.unused_wrong as i64))
}

fn best_of<T: Copy>(candidates: impl Iterator<Item = Result<(T, Counts)>>) -> Result<T> {
    let mut best: Option<(T, (i64, i64))> = None;
    for c in candidates {
        let (value, counts) = c?;
        let s = score(&counts);
        if best.as_ref().is_none_or(|b| s > b.1) {
            best = Some((value, s));
        }
    }
    Ok(best.expect("nonempty grid").0)
}

/// Mixing probability with the best validation score over [`STATIC_GRID`].
pub fn tune_static(train: &[DaySequence], delta_steps: usize) -> Result<f64> {
    let Some((fit, val)) = validation_split(train) else {
        return Ok(DEFAULT_P_CHANGE);
    };
    best_of(STATIC_GRID.iter().map(|&p| {
        let model = Model::Static(static_fit(fit, p)?);
        Ok((p, evaluate_days(&model, val, &[delta_steps])?[0]))
    }))
}

/// Components and decay rate with the best validation score over
/// [`FREMEN_COMPONENTS`] and [`FREMEN_DECAY_RATES`].
pub fn tune_fremen(train: &[DaySequence], delta_steps: usize) -> Result<(usize, f64)> {
    let Some((fit, val)) = validation_split(train) else {
        return Ok((crate::baselines::DEFAULT_COMPONENTS, crate::baselines::DEFAULT_DECAY_RATE));
    };
    if fit.iter().map(|d| d.graphs.len()).sum::<usize>() < 2 {
        return Ok((crate::baselines::DEFAULT_COMPONENTS, crate::baselines::DEFAULT_DECAY_RATE));
    }
    let wide = fremen_fit(fit, FREMEN_COMPONENTS[FREMEN_COMPONENTS.len() - 1], 0.0)?;
    let grid = FREMEN_COMPONENTS.iter().flat_map(|&k| FREMEN_DECAY_RATES.iter().map(move |&r| (k, r)));
    best_of(grid.map(|(k, rate)| {
        let model = Model::Fremen(wide.truncated(k, rate));
        Ok(((k, rate), evaluate_days(&model, val, &[delta_steps])?[0]))
    }))
}

pub fn fit_predictor(kind: PredictorKind, train_days: &[DaySequence], opts: &FitOptions) -> Result<Fitted> {
    match kind {
        PredictorKind::Gnn => {
            let (params, log) = train_with_log(&opts.gnn, train_days)?;
            Ok(Fitted {
                model: Model::Gnn(params),
                hyper: serde_json::to_value(&opts.gnn)?,
                epoch_losses: log.epoch_losses,
            })
        }
        PredictorKind::Static => {
            let p = tune_static(train_days, opts.tune_delta_steps)?;
            Ok(Fitted {
                model: Model::Static(static_fit(train_days, p)?),
                hyper: json!({ "p_change": p }),
                epoch_losses: Vec::new(),
            })
        }
        PredictorKind::Fremen => {
            let (k, rate) = tune_fremen(train_days, opts.tune_delta_steps)?;
            Ok(Fitted {
                model: Model::Fremen(fremen_fit(train_days, k, rate)?),
                hyper: json!({ "components": k, "decay_rate": rate }),
                epoch_losses: Vec::new(),
            })
        }
    }
}

fn fit_all(datasets: &[RoutineDataset], kind: PredictorKind, budget: Option<usize>, opts: &FitOptions) -> Result<PredictorSet> {
    let per_household = datasets
        .par_iter()
        .map(|d| {
            let days = match budget {
                Some(b) if b > d.train.len() => {
                    return Err(Error::Config(format!("{b} training days requested, {} available", d.train.len())))
                }
                Some(b) => &d.train[..b],
                None => &d.train[..],
            };
            fit_predictor(kind, days, opts)
        })
        .collect::<Result<_>>()?;
    Ok(PredictorSet {
        name: kind.name().to_string(),
        per_household,
    })
}

pub fn fit_all_kinds(datasets: &[RoutineDataset], kinds: &[PredictorKind], budget: Option<usize>, opts: &FitOptions) -> Result<Vec<PredictorSet>> {
    kinds.iter().map(|&k| fit_all(datasets, k, budget, opts)).collect()
}

fn steps_of(delta_minutes: u32) -> Result<usize> {
    if delta_minutes == 0 || delta_minutes % STEP_MINUTES != 0 {
        return Err(Error::Config(format!(
            "delta {delta_minutes} must be a positive multiple of {STEP_MINUTES} minutes"
        )));
    }
    Ok((delta_minutes / STEP_MINUTES) as usize)
}

/// Pooled counts of every predictor at every horizon.
fn pooled(datasets: &[RoutineDataset], predictors: &[PredictorSet], deltas: &[u32]) -> Result<Vec<Vec<Counts>>> {
    if predictors.is_empty() {
        return Err(Error::MissingPredictor("none given".into()));
    }
    let steps: Vec<usize> = deltas.iter().map(|&d| steps_of(d)).collect::<Result<_>>()?;
    predictors
        .iter()
        .map(|set| {
            if set.per_household.len() != datasets.len() {
                return Err(Error::MissingPredictor(format!(
                    "{}: {} models for {} households",
                    set.name,
                    set.per_household.len(),
                    datasets.len()
                )));
            }
            let mut totals = vec![Counts::default(); steps.len()];
            for (model, data) in set.per_household.iter().zip(datasets) {
                for (acc, c) in totals.iter_mut().zip(evaluate_days(model, &data.test, &steps)?) {
                    *acc += c;
                }
            }
            Ok(totals)
        })
        .collect()
}

fn report(experiment: &str, label: String, rows: Vec<ReportRow>, predictors: &[PredictorSet]) -> Report {
    Report {
        experiment: experiment.to_string(),
        label,
        seed: 0,
        config_digest: String::new(),
        rows,
        predictors: predictors
            .iter()
            .map(|p| (p.name.clone(), p.per_household.iter().map(|f| f.hyper.clone()).collect()))
            .collect::<BTreeMap<_, _>>(),
    }
}

/// Every predictor on every test window at one proactivity horizon.
pub fn run_table1(datasets: &[RoutineDataset], predictors: &[PredictorSet], delta_minutes: u32) -> Result<Report> {
    let counts = pooled(datasets, predictors, &[delta_minutes])?;
    let rows = predictors
        .iter()
        .zip(counts)
        .map(|(p, c)| ReportRow::new(&p.name, delta_minutes, None, c[0]))
        .collect();
    Ok(report("table1", format!("d{delta_minutes:03}"), rows, predictors))
}

/// One report per horizon from 10 to 120 minutes.
pub fn run_proactivity_sweep(datasets: &[RoutineDataset], predictors: &[PredictorSet]) -> Result<Vec<Report>> {
    let counts = pooled(datasets, predictors, &SWEEP_DELTAS)?;
    Ok(SWEEP_DELTAS
        .iter()
        .enumerate()
        .map(|(i, &delta)| {
            let rows = predictors
                .iter()
                .zip(&counts)
                .map(|(p, c)| ReportRow::new(&p.name, delta, None, c[i]))
                .collect();
            report("sweep", format!("d{delta:03}"), rows, predictors)
        })
        .collect())
}

/// Retrains every predictor on the first `budget` days of each household.
pub fn run_data_efficiency(
    datasets: &[RoutineDataset],
    kinds: &[PredictorKind],
    budgets: &[usize],
    opts: &FitOptions,
    delta_minutes: u32,
) -> Result<Vec<Report>> {
    budgets
        .iter()
        .map(|&b| {
            let predictors = fit_all_kinds(datasets, kinds, Some(b), opts)?;
            let mut r = run_table1(datasets, &predictors, delta_minutes)?;
            r.experiment = "data-efficiency".into();
            r.label = format!("n{b:02}_d{delta_minutes:03}");
            r.rows.iter_mut().for_each(|row| row.train_days = Some(b));
            Ok(r)
        })
        .collect()
}

/// The three configurations compared by the ablation: the given config,
/// attention disabled, and linear time.
pub fn ablation_configs(base: &ModelConfig) -> [ModelConfig; 3] {
    let no_attention = ModelConfig {
        attention_enabled: false,
        ..base.clone()
    };
    let linear_time = ModelConfig {
        time_encoding: TimeEncodingConfig::linear(),
        ..base.clone()
    };
    [base.clone(), no_attention, linear_time]
}

pub fn run_ablations(datasets: &[RoutineDataset], opts: &FitOptions, delta_minutes: u32) -> Result<Report> {
    let predictors = ablation_configs(&opts.gnn)
        .into_iter()
        .zip(ABLATIONS)
        .map(|(gnn, name)| {
            let variant = FitOptions { gnn, ..opts.clone() };
            let mut set = fit_all(datasets, PredictorKind::Gnn, None, &variant)?;
            set.name = name.to_string();
            Ok(set)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut r = run_table1(datasets, &predictors, delta_minutes)?;
    r.experiment = "ablation".into();
    Ok(r)
}
