//! Survey samples, per-sample features and habit extraction by clustering.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ActivitySpec;
use super::HOURS;
use crate::error::{Error, Result};

pub const EM_ITERATIONS: usize = 50;
pub const KMEANS_CLUSTERS: usize = 4;
pub const KMEANS_RESTARTS: usize = 10;
/// Clusters with this many members or fewer are discarded.
pub const MIN_CLUSTER_DROP: usize = 3;

/// One respondent's answer for one activity: the hours (6:00 onward) at
/// which they are likely doing it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivitySample {
    pub respondent: usize,
    pub activity: usize,
    pub hour_mask: [bool; HOURS],
}

impl ActivitySample {
    pub fn hours(&self) -> impl Iterator<Item = f64> + '_ {
        self.hour_mask
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(h, _)| (h + 6) as f64)
    }
}

/// Aggregate hourly probabilities of one cluster of samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Habit {
    pub activity: usize,
    pub probs: [f64; HOURS],
    pub support: usize,
}

impl Habit {
    /// Probability-weighted mean hour of day.
    pub fn expected_hour(&self) -> f64 {
        let total: f64 = self.probs.iter().sum();
        if total == 0.0 {
            return 6.0 + HOURS as f64 / 2.0;
        }
        self.probs.iter().enumerate().map(|(h, p)| p * (h as f64 + 6.5)).sum::<f64>() / total
    }
}

pub fn mask_of(hours: &[u32]) -> [bool; HOURS] {
    let mut mask = [false; HOURS];
    for &h in hours {
        mask[(h - 6) as usize] = true;
    }
    mask
}

/// Draws each respondent's answers from one latent habit per activity,
/// flipping every hour independently with probability `flip_noise`.
pub fn synth_survey(
    activities: &[ActivitySpec],
    n_respondents: usize,
    flip_noise: f64,
    rng: &mut impl Rng,
) -> Vec<ActivitySample> {
    let mut out = Vec::with_capacity(activities.len() * n_respondents);
    for respondent in 0..n_respondents {
        for (activity, spec) in activities.iter().enumerate() {
            let total: f64 = spec.habits.iter().map(|h| h.weight).sum();
            let mut pick = rng.random::<f64>() * total;
            let latent = spec
                .habits
                .iter()
                .find(|h| {
                    pick -= h.weight;
                    pick < 0.0
                })
                .unwrap_or_else(|| spec.habits.last().unwrap());
            let clean = mask_of(&latent.hours);
            let hour_mask = loop {
                let mut mask = clean;
                for bit in &mut mask {
                    if rng.random::<f64>() < flip_noise {
                        *bit = !*bit;
                    }
                }
                if mask.iter().any(|&b| b) {
                    break mask;
                }
            };
            out.push(ActivitySample {
                respondent,
                activity,
                hour_mask,
            });
        }
    }
    out
}

/// Reassigns meal hours by time of day: before noon is breakfast, noon to
/// 18:00 lunch, later dinner. `meals` lists the breakfast, lunch and dinner
/// activity ids.
pub fn reclassify_meals(samples: Vec<ActivitySample>, meals: [usize; 3]) -> Vec<ActivitySample> {
    let mut merged: std::collections::BTreeMap<usize, [bool; HOURS]> = Default::default();
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        if meals.contains(&s.activity) {
            let m = merged.entry(s.respondent).or_insert([false; HOURS]);
            for (acc, &b) in m.iter_mut().zip(&s.hour_mask) {
                *acc |= b;
            }
        } else {
            out.push(s);
        }
    }
    for (respondent, mask) in merged {
        for (activity, range) in meals.into_iter().zip([0..6, 6..12, 12..HOURS]) {
            let mut hour_mask = [false; HOURS];
            for h in range {
                hour_mask[h] = mask[h];
            }
            if hour_mask.iter().any(|&b| b) {
                out.push(ActivitySample {
                    respondent,
                    activity,
                    hour_mask,
                });
            }
        }
    }
    out.sort_by_key(|s| (s.activity, s.respondent));
    out
}

/// Sorted means of a two-component Gaussian mixture over the marked hours,
/// followed by the morning, afternoon and evening hour counts.
pub fn habit_features(sample: &ActivitySample) -> [f64; 5] {
    let xs: Vec<f64> = sample.hours().collect();
    assert!(!xs.is_empty(), "habit_features needs at least one marked hour");
    let seed = sample.hour_mask.iter().fold(0u64, |acc, &b| acc << 1 | b as u64);
    let [m0, m1] = gmm_means(&xs, &mut ChaCha8Rng::seed_from_u64(seed));
    let mut counts = [0.0; 3];
    for &x in &xs {
        counts[if x < 12.0 { 0 } else if x < 18.0 { 1 } else { 2 }] += 1.0;
    }
    [m0, m1, counts[0], counts[1], counts[2]]
}

fn gmm_means(xs: &[f64], rng: &mut impl Rng) -> [f64; 2] {
    const VAR_FLOOR: f64 = 1e-2;
    let n = xs.len() as f64;
    let first = xs[rng.random_range(0..xs.len())];
    let second = xs
        .iter()
        .copied()
        .fold(first, |best, x| if (x - first).abs() > (best - first).abs() { x } else { best });
    let mean = xs.iter().sum::<f64>() / n;
    let var = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).max(1.0);
    let mut mu = [first, second];
    let mut sigma2 = [var; 2];
    let mut weight = [0.5; 2];
    let mut resp = vec![[0.0; 2]; xs.len()];
    for _ in 0..EM_ITERATIONS {
        for (r, &x) in resp.iter_mut().zip(xs) {
            let mut dens = [0.0; 2];
            for k in 0..2 {
                dens[k] = weight[k] * (-(x - mu[k]).powi(2) / (2.0 * sigma2[k])).exp() / sigma2[k].sqrt();
            }
            let total = dens[0] + dens[1];
            *r = if total > 0.0 {
                [dens[0] / total, dens[1] / total]
            } else if (x - mu[0]).abs() <= (x - mu[1]).abs() {
                [1.0, 0.0]
            } else {
                [0.0, 1.0]
            };
        }
        for k in 0..2 {
            let nk: f64 = resp.iter().map(|r| r[k]).sum();
            if nk < 1e-12 {
                continue;
            }
            mu[k] = resp.iter().zip(xs).map(|(r, x)| r[k] * x).sum::<f64>() / nk;
            sigma2[k] = (resp.iter().zip(xs).map(|(r, x)| r[k] * (x - mu[k]).powi(2)).sum::<f64>() / nk).max(VAR_FLOOR);
            weight[k] = nk / n;
        }
    }
    if mu[0] <= mu[1] {
        mu
    } else {
        [mu[1], mu[0]]
    }
}

/// Lloyd's algorithm with k-means++ seeding; returns assignments and inertia.
pub(crate) fn kmeans(points: &[[f64; 5]], k: usize, rng: &mut impl Rng) -> (Vec<usize>, f64) {
    let dist2 = |a: &[f64; 5], b: &[f64; 5]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    while centers.len() < k {
        let d: Vec<f64> = points
            .iter()
            .map(|p| centers.iter().map(|c| dist2(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d.iter().sum();
        let next = if total > 0.0 {
            let mut pick = rng.random::<f64>() * total;
            d.iter()
                .position(|&w| {
                    pick -= w;
                    pick < 0.0 && w > 0.0
                })
                .unwrap_or_else(|| d.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            rng.random_range(0..points.len())
        };
        centers.push(points[next]);
    }
    let mut assign = vec![usize::MAX; points.len()];
    loop {
        let mut changed = false;
        for (a, p) in assign.iter_mut().zip(points) {
            let best = (0..k)
                .min_by(|&i, &j| dist2(p, &centers[i]).total_cmp(&dist2(p, &centers[j])))
                .unwrap();
            if *a != best {
                *a = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&[f64; 5]> = points.iter().zip(&assign).filter(|(_, &a)| a == c).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            for d in 0..5 {
                center[d] = members.iter().map(|p| p[d]).sum::<f64>() / members.len() as f64;
            }
        }
    }
    let inertia = points.iter().zip(&assign).map(|(p, &a)| dist2(p, &centers[a])).sum();
    (assign, inertia)
}

/// Clusters one activity's samples and keeps clusters with more than
/// [`MIN_CLUSTER_DROP`] members, largest first.
pub fn extract_habits(activity: usize, samples: &[ActivitySample], rng: &mut impl Rng) -> Result<Vec<Habit>> {
    let samples: Vec<&ActivitySample> = samples.iter().filter(|s| s.activity == activity).collect();
    if samples.len() < KMEANS_CLUSTERS {
        return Err(Error::NoHabit(format!("activity {activity}: {} samples", samples.len())));
    }
    let points: Vec<[f64; 5]> = samples.iter().map(|s| habit_features(s)).collect();
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..KMEANS_RESTARTS {
        let run = kmeans(&points, KMEANS_CLUSTERS, rng);
        if best.as_ref().is_none_or(|b| run.1 < b.1) {
            best = Some(run);
        }
    }
    let (assign, _) = best.unwrap();
    let mut habits: Vec<Habit> = (0..KMEANS_CLUSTERS)
        .filter_map(|c| {
            let members: Vec<&&ActivitySample> = samples.iter().zip(&assign).filter(|(_, &a)| a == c).map(|(s, _)| s).collect();
            if members.len() <= MIN_CLUSTER_DROP {
                return None;
            }
            let mut probs = [0.0; HOURS];
            for m in &members {
                for (p, &b) in probs.iter_mut().zip(&m.hour_mask) {
                    *p += b as u8 as f64;
                }
            }
            probs.iter_mut().for_each(|p| *p /= members.len() as f64);
            Some(Habit {
                activity,
                probs,
                support: members.len(),
            })
        })
        .collect();
    if habits.is_empty() {
        return Err(Error::NoHabit(format!("activity {activity}")));
    }
    habits.sort_by(|a, b| b.support.cmp(&a.support).then(a.probs.partial_cmp(&b.probs).unwrap()));
    Ok(habits)
}
