//! Genetic search for a set of mutually distinct households.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::GeneticConfig;
use super::survey::Habit;
use super::HOURS;
use crate::error::{Error, Result};

const KL_FLOOR: f64 = 1e-6;

/// One habit per activity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Household {
    /// Index into each activity's habit list.
    pub choice: Vec<usize>,
    /// Hourly probabilities per activity.
    pub hourly: Vec<[f64; HOURS]>,
    /// Expected leave-home hour precedes expected come-home hour.
    pub leave_before_come: bool,
}

/// Activities whose expected times must be ordered (leave home, come home).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ordering {
    pub first: usize,
    pub second: usize,
}

#[derive(Clone, Debug)]
pub struct Composition {
    pub households: Vec<Household>,
    pub fitness: f64,
    /// Best fitness seen after each iteration, per run.
    pub history: Vec<Vec<f64>>,
}

fn smoothed(p: &[f64; HOURS]) -> [f64; HOURS] {
    let mut q = p.map(|v| v.max(KL_FLOOR));
    let s: f64 = q.iter().sum();
    q.iter_mut().for_each(|v| *v /= s);
    q
}

fn kl(p: &[f64; HOURS], q: &[f64; HOURS]) -> f64 {
    p.iter().zip(q).map(|(a, b)| a * (a / b).ln()).sum()
}

/// Symmetrized KL divergence between two hourly profiles.
pub fn symmetric_kl(p: &[f64; HOURS], q: &[f64; HOURS]) -> f64 {
    let (p, q) = (smoothed(p), smoothed(q));
    0.5 * (kl(&p, &q) + kl(&q, &p))
}

/// Divergence table per activity: `table[a][i][j]` between habits i and j.
fn divergences(habits: &[Vec<Habit>]) -> Vec<Vec<Vec<f64>>> {
    habits
        .iter()
        .map(|hs| {
            hs.iter()
                .map(|a| hs.iter().map(|b| symmetric_kl(&a.probs, &b.probs)).collect())
                .collect()
        })
        .collect()
}

fn set_fitness(set: &[Vec<usize>], table: &[Vec<Vec<f64>>]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            let d: f64 = table.iter().enumerate().map(|(a, t)| t[set[i][a]][set[j][a]]).sum();
            total += d / table.len() as f64;
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

/// Average over household pairs of the mean per-activity divergence.
pub fn fitness(households: &[Household]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0;
    for i in 0..households.len() {
        for j in i + 1..households.len() {
            let (a, b) = (&households[i].hourly, &households[j].hourly);
            total += a.iter().zip(b).map(|(p, q)| symmetric_kl(p, q)).sum::<f64>() / a.len() as f64;
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

fn valid(choice: &[usize], habits: &[Vec<Habit>], order: Option<Ordering>) -> bool {
    order.is_none_or(|o| habits[o.first][choice[o.first]].expected_hour() < habits[o.second][choice[o.second]].expected_hour())
}

pub fn household(choice: Vec<usize>, habits: &[Vec<Habit>], order: Option<Ordering>) -> Household {
    Household {
        hourly: choice.iter().enumerate().map(|(a, &c)| habits[a][c].probs).collect(),
        leave_before_come: valid(&choice, habits, order),
        choice,
    }
}

struct Sampler<'a> {
    habits: &'a [Vec<Habit>],
    /// Valid (first, second) habit pairs of the ordered activities.
    pairs: Vec<(usize, usize)>,
    order: Option<Ordering>,
}

impl<'a> Sampler<'a> {
    fn new(habits: &'a [Vec<Habit>], order: Option<Ordering>) -> Result<Self> {
        let mut pairs = Vec::new();
        if let Some(o) = order {
            for i in 0..habits[o.first].len() {
                for j in 0..habits[o.second].len() {
                    if habits[o.first][i].expected_hour() < habits[o.second][j].expected_hour() {
                        pairs.push((i, j));
                    }
                }
            }
            if pairs.is_empty() {
                return Err(Error::NoValidHousehold(
                    "every leave-home habit is expected after every come-home habit".into(),
                ));
            }
        }
        Ok(Sampler { habits, pairs, order })
    }

    /// Uniform over habits; the ordered pair is drawn among valid
    /// combinations, which equals rejection sampling.
    fn sample(&self, rng: &mut impl Rng) -> Vec<usize> {
        let mut choice: Vec<usize> = self.habits.iter().map(|h| rng.random_range(0..h.len())).collect();
        if let Some(o) = self.order {
            let &(i, j) = self.pairs.choose(rng).unwrap();
            choice[o.first] = i;
            choice[o.second] = j;
        }
        choice
    }
}

/// Genetic search maximizing [`fitness`] over sets of `n_households`.
///
/// Each iteration mates two random sets of the pool by drawing a new set
/// from their combined members, optionally mutates one member into a fresh
/// sample, and replaces the worst set of the pool when the child beats it.
pub fn compose_households(
    habits: &[Vec<Habit>],
    n_households: usize,
    order: Option<Ordering>,
    ga: &GeneticConfig,
    rng: &mut impl Rng,
) -> Result<Composition> {
    if let Some(a) = habits.iter().position(|h| h.is_empty()) {
        return Err(Error::NoValidHousehold(format!("activity {a} has no habit")));
    }
    let sampler = Sampler::new(habits, order)?;
    let table = divergences(habits);

    let mut best: Option<(Vec<Vec<usize>>, f64)> = None;
    let mut history = Vec::with_capacity(ga.runs);
    for _ in 0..ga.runs {
        let mut pool: Vec<(Vec<Vec<usize>>, f64)> = (0..ga.pool_size)
            .map(|_| {
                let set: Vec<Vec<usize>> = (0..n_households).map(|_| sampler.sample(rng)).collect();
                let f = set_fitness(&set, &table);
                (set, f)
            })
            .collect();
        let mut run_best = pool.iter().map(|p| p.1).fold(f64::MIN, f64::max);
        let mut trace = Vec::with_capacity(ga.iterations);
        for _ in 0..ga.iterations {
            let a = rng.random_range(0..pool.len());
            let b = (a + rng.random_range(1..pool.len())) % pool.len();
            let mut genes: Vec<&Vec<usize>> = pool[a].0.iter().chain(&pool[b].0).collect();
            genes.shuffle(rng);
            let mut child: Vec<Vec<usize>> = genes.into_iter().take(n_households).cloned().collect();
            if rng.random::<f64>() < ga.mutation_rate {
                let slot = rng.random_range(0..n_households);
                child[slot] = sampler.sample(rng);
            }
            let f = set_fitness(&child, &table);
            let worst = (0..pool.len()).min_by(|&i, &j| pool[i].1.total_cmp(&pool[j].1)).unwrap();
            if f > pool[worst].1 {
                pool[worst] = (child, f);
            }
            run_best = run_best.max(f);
            trace.push(run_best);
        }
        history.push(trace);
        let top = pool.into_iter().max_by(|x, y| x.1.total_cmp(&y.1)).unwrap();
        if best.as_ref().is_none_or(|b| top.1 > b.1) {
            best = Some(top);
        }
    }
    let (set, fitness) = best.unwrap();
    Ok(Composition {
        households: set.into_iter().map(|c| household(c, habits, order)).collect(),
        fitness,
        history,
    })
}
