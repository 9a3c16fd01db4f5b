use std::f64::consts::TAU;

use ndarray::Array2;

use super::training_catalog;
use crate::error::{Error, Result};
use crate::scene::{DaySequence, ProbGraph, SceneGraph, STEP_MINUTES};

pub const DEFAULT_COMPONENTS: usize = 3;
pub const DEFAULT_DECAY_RATE: f64 = 1.0 / 60.0;
/// Shortest period on the candidate frequency grid.
pub const MIN_PERIOD_MINUTES: u64 = 60;

const MINUTES_PER_DAY: u64 = 1440;

/// Absolute time of a snapshot: days since the dataset start plus minutes.
pub fn absolute_minutes(day: u32, minute: u32) -> f64 {
    (day as u64 * MINUTES_PER_DAY + minute as u64) as f64
}

/// Mean presence plus the strongest periodic components of every
/// `(node, parent)` relation. Component slots of pair `i * N + j` are rows of
/// `amplitude`, `frequency` (cycles per minute) and `phase`, sorted by
/// descending amplitude.
#[derive(Clone, Debug, PartialEq)]
pub struct FremenModel {
    pub decay_rate: f64,
    pub mean: Array2<f64>,
    pub amplitude: Array2<f64>,
    pub frequency: Array2<f64>,
    pub phase: Array2<f64>,
}

impl FremenModel {
    pub fn n_nodes(&self) -> usize {
        self.mean.nrows()
    }

    pub fn components(&self) -> usize {
        self.amplitude.ncols()
    }

    /// The same fit keeping only the `components` strongest terms, which
    /// equals refitting with that many components.
    pub fn truncated(&self, components: usize, decay_rate: f64) -> FremenModel {
        let k = components.min(self.components());
        let cut = |a: &Array2<f64>| a.slice(ndarray::s![.., ..k]).to_owned();
        FremenModel {
            decay_rate,
            mean: self.mean.clone(),
            amplitude: cut(&self.amplitude),
            frequency: cut(&self.frequency),
            phase: cut(&self.phase),
        }
    }

    /// Reconstructed presence of `parent` holding `node` at absolute time
    /// `t`, clamped to `[0, 1]`.
    pub fn presence(&self, node: usize, parent: usize, t: f64) -> f64 {
        let mean = self.mean[[node, parent]];
        if mean == 0.0 {
            return 0.0;
        }
        let pair = node * self.n_nodes() + parent;
        let mut v = mean;
        for k in 0..self.components() {
            let a = self.amplitude[[pair, k]];
            if a > 0.0 {
                v += a * (TAU * self.frequency[[pair, k]] * t + self.phase[[pair, k]]).cos();
            }
        }
        v.clamp(0.0, 1.0)
    }

    /// Row-normalized time-conditioned prior over the parents of `node`, or
    /// `None` when every reconstructed presence is zero.
    pub fn prior_row(&self, node: usize, t: f64) -> Option<Vec<f64>> {
        let n = self.n_nodes();
        let row: Vec<f64> = (0..n).map(|j| self.presence(node, j, t)).collect();
        let total: f64 = row.iter().sum();
        (total > 0.0).then(|| row.into_iter().map(|v| v / total).collect())
    }
}

/// Fits mean and `components` periodic terms per relation by direct
/// correlation against the candidate frequencies `k / T`, where `T` spans
/// the training days and periods are at least [`MIN_PERIOD_MINUTES`].
pub fn fremen_fit(train: &[DaySequence], components: usize, decay_rate: f64) -> Result<FremenModel> {
    if !(decay_rate >= 0.0) {
        return Err(Error::Config(format!("decay rate {decay_rate} must be non-negative")));
    }
    let catalog = training_catalog(train)?;
    let n = catalog.len();
    let samples: Vec<(u64, &SceneGraph)> = train
        .iter()
        .flat_map(|d| d.graphs.iter().map(move |g| (d.day as u64 * MINUTES_PER_DAY + g.minute() as u64, g)))
        .collect();
    if samples.len() < 2 {
        return Err(Error::NotEnoughData(format!(
            "{} snapshot(s); at least 2 are needed",
            samples.len()
        )));
    }
    let step = STEP_MINUTES as u64;
    if samples.iter().any(|(t, _)| t % step != 0) {
        return Err(Error::NotEnoughData("snapshots are not on the step grid".into()));
    }
    let first_day = train.iter().map(|d| d.day).min().unwrap() as u64;
    let last_day = train.iter().map(|d| d.day).max().unwrap() as u64;
    let t0 = first_day * MINUTES_PER_DAY;
    let horizon = (last_day - first_day + 1) * MINUTES_PER_DAY;
    let n_freq = (horizon / MIN_PERIOD_MINUTES) as usize;

    // Phase table: for frequency k/T and sample offset t, the angle is
    // 2π k (t / step) / (T / step), so the table index is an integer.
    let cells = (horizon / step) as usize;
    let cos_table: Vec<f64> = (0..cells).map(|m| (TAU * m as f64 / cells as f64).cos()).collect();
    let sin_table: Vec<f64> = (0..cells).map(|m| (TAU * m as f64 / cells as f64).sin()).collect();
    let ticks: Vec<usize> = samples.iter().map(|(t, _)| ((t - t0) / step) as usize).collect();

    // e^{-iωt} summed over every sample, per frequency.
    let spectrum = |idx: &mut dyn Iterator<Item = usize>| -> Vec<(f64, f64)> {
        let ts: Vec<usize> = idx.map(|s| ticks[s]).collect();
        (1..=n_freq)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for &tick in &ts {
                    let m = (k * tick) % cells;
                    re += cos_table[m];
                    im -= sin_table[m];
                }
                (re, im)
            })
            .collect()
    };
    let total = spectrum(&mut (0..samples.len()));

    let mut present: Vec<Vec<usize>> = vec![Vec::new(); n * n];
    for (s, (_, g)) in samples.iter().enumerate() {
        for (i, p) in g.parents().iter().enumerate() {
            if let Some(p) = p {
                present[i * n + p.index()].push(s);
            }
        }
    }

    let count = samples.len() as f64;
    let mut mean = Array2::zeros((n, n));
    let mut amplitude = Array2::zeros((n * n, components));
    let mut frequency = Array2::zeros((n * n, components));
    let mut phase = Array2::zeros((n * n, components));
    let mut is_present = vec![false; samples.len()];
    for (pair, ones) in present.iter().enumerate() {
        if ones.is_empty() {
            continue;
        }
        let m = ones.len() as f64 / count;
        mean[[pair / n, pair % n]] = m;
        if components == 0 || ones.len() == samples.len() {
            continue;
        }
        // Σ_ones e^{-iωt}, via the complement when that is shorter.
        let ones_sum = if 2 * ones.len() <= samples.len() {
            spectrum(&mut ones.iter().copied())
        } else {
            is_present.iter_mut().for_each(|b| *b = false);
            ones.iter().for_each(|&s| is_present[s] = true);
            let zeros = spectrum(&mut (0..samples.len()).filter(|&s| !is_present[s]));
            total.iter().zip(zeros).map(|(a, z)| (a.0 - z.0, a.1 - z.1)).collect()
        };
        let mut terms: Vec<(f64, usize, f64)> = ones_sum
            .iter()
            .zip(&total)
            .enumerate()
            .map(|(k, (o, a))| {
                let re = (o.0 - m * a.0) / count;
                let im = (o.1 - m * a.1) / count;
                (2.0 * re.hypot(im), k + 1, im.atan2(re))
            })
            .collect();
        terms.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for (slot, &(amp, k, ph)) in terms.iter().take(components).enumerate() {
            let f = k as f64 / horizon as f64;
            amplitude[[pair, slot]] = amp;
            frequency[[pair, slot]] = f;
            // Phase relative to absolute time rather than the first training day.
            phase[[pair, slot]] = (ph - TAU * f * t0 as f64).rem_euclid(TAU);
        }
    }
    Ok(FremenModel {
        decay_rate,
        mean,
        amplitude,
        frequency,
        phase,
    })
}

/// `w * onehot(g_t) + (1 - w) * prior(t + 10 * steps)` per row, with
/// `w = exp(-decay_rate * 10 * steps)`.
pub fn fremen_predict(model: &FremenModel, g_t: &SceneGraph, day: u32, steps: usize) -> Result<ProbGraph> {
    let catalog = g_t.catalog().clone();
    if model.n_nodes() != catalog.len() {
        return Err(Error::CatalogMismatch);
    }
    let elapsed = (STEP_MINUTES as usize * steps) as f64;
    let minute = g_t.minute() + STEP_MINUTES * steps as u32;
    let t = absolute_minutes(day, minute);
    let w = (-model.decay_rate * elapsed).exp();
    let root = catalog.root().index();
    let mut belief = g_t.adjacency();
    for i in 0..catalog.len() {
        if i == root || w == 1.0 {
            continue;
        }
        if let Some(prior) = model.prior_row(i, t) {
            let mut row = belief.row_mut(i);
            for (b, p) in row.iter_mut().zip(prior) {
                *b = w * *b + (1.0 - w) * p;
            }
        }
    }
    Ok(ProbGraph::new_unchecked(catalog, belief, minute))
}
