//! Monte Carlo day schedules and their execution into snapshot sequences.

use rand::Rng;

use super::compose::Household;
use super::config::{ActionScript, World};
use super::{DAY_END, DAY_START, HOURS};
use crate::error::{Error, Result};
use crate::scene::{DaySequence, SceneGraph, STEP_MINUTES};

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduledActivity {
    pub activity: usize,
    pub start: f64,
    pub end: f64,
    /// End time of every script segment; the last equals `end`.
    pub segment_ends: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Schedule {
    pub entries: Vec<ScheduledActivity>,
    /// Every `(minute, activity)` draw, elongations included.
    pub draws: Vec<(f64, usize)>,
}

impl Schedule {
    /// Activity running at `minute`, if any.
    pub fn activity_at(&self, minute: f64) -> Option<usize> {
        self.entries
            .iter()
            .find(|e| e.start <= minute && minute < e.end)
            .map(|e| e.activity)
    }
}

pub fn hour_bin(minute: f64) -> usize {
    (((minute - DAY_START as f64) / 60.0).floor().max(0.0) as usize).min(HOURS - 1)
}

/// Schedule weights over the activities (idle last) at one hour bin.
pub fn distribution(household: &Household, idle_weight: f64, hour: usize) -> Vec<f64> {
    let mut w: Vec<f64> = household.hourly.iter().map(|p| p[hour]).collect();
    let total: f64 = w.iter().sum::<f64>() + idle_weight;
    if total > 0.0 {
        w.push(idle_weight);
        w.iter_mut().for_each(|v| *v /= total);
    } else {
        w.iter_mut().for_each(|v| *v = 0.0);
        w.push(1.0);
    }
    w
}

fn draw(weights: &[f64], rng: &mut impl Rng) -> usize {
    let mut pick = rng.random::<f64>();
    for (i, &w) in weights.iter().enumerate() {
        pick -= w;
        if pick < 0.0 && w > 0.0 {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap()
}

fn uniform(lo: f64, hi: f64, rng: &mut impl Rng) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Samples activities from 6:00 until midnight. Redrawing the running
/// activity elongates it to a new end time drawn between the current
/// boundary and one further maximum script duration.
pub fn sample_schedule(household: &Household, world: &World, idle_weight: f64, rng: &mut impl Rng) -> Schedule {
    let end_of_day = DAY_END as f64;
    let mut schedule = Schedule::default();
    let mut current: Option<(usize, f64, f64)> = None;
    let mut t = DAY_START as f64;
    while t < end_of_day {
        let a = draw(&distribution(household, idle_weight, hour_bin(t)), rng);
        schedule.draws.push((t, a));
        let script = &world.scripts[a];
        match &mut current {
            Some((running, _, end)) if *running == a => {
                *end = uniform(t, (t + script.max_total()).min(end_of_day), rng);
            }
            _ => {
                if let Some(done) = current.take() {
                    schedule.entries.push(finish(done, &world.scripts[done.0], rng));
                }
                let end = (t + uniform(script.min_total(), script.max_total(), rng)).min(end_of_day);
                current = Some((a, t, end));
            }
        }
        t = current.unwrap().2;
    }
    if let Some(done) = current {
        schedule.entries.push(finish(done, &world.scripts[done.0], rng));
    }
    schedule
}

/// Segment durations drawn from their ranges, rescaled to the activity span.
fn finish((activity, start, end): (usize, f64, f64), script: &ActionScript, rng: &mut impl Rng) -> ScheduledActivity {
    let raw: Vec<f64> = script
        .segments
        .iter()
        .map(|s| uniform(s.duration_min, s.duration_max, rng))
        .collect();
    let total: f64 = raw.iter().sum();
    let n = raw.len();
    let mut acc = start;
    let mut segment_ends: Vec<f64> = raw
        .iter()
        .map(|d| {
            acc += if total > 0.0 { d / total } else { 1.0 / n as f64 } * (end - start);
            acc
        })
        .collect();
    *segment_ends.last_mut().unwrap() = end;
    ScheduledActivity {
        activity,
        start,
        end,
        segment_ends,
    }
}

/// Applies each segment's relocations when it ends and snapshots the
/// arrangement on the grid from 6:00 through 24:00.
pub fn execute(schedule: &Schedule, world: &World, initial: &SceneGraph, day: u32) -> Result<DaySequence> {
    initial.ensure_valid()?;
    let catalog = initial.catalog();
    let mut events = schedule.entries.iter().flat_map(|e| {
        let script = &world.scripts[e.activity];
        script
            .segments
            .iter()
            .enumerate()
            .zip(&e.segment_ends)
            .map(move |((k, seg), &time)| (time, script, k, seg))
    });
    let mut pending = events.next();
    let mut graph = initial.clone();
    let mut graphs = Vec::with_capacity(((DAY_END - DAY_START) / STEP_MINUTES + 1) as usize);
    for minute in (DAY_START..=DAY_END).step_by(STEP_MINUTES as usize) {
        while let Some((time, script, k, seg)) = pending {
            if time > minute as f64 {
                break;
            }
            for effect in &seg.effects {
                if graph.parent(effect.object) != Some(effect.from) {
                    return Err(Error::ScriptEffect {
                        script: script.name.clone(),
                        segment: k,
                        object: catalog.name(effect.object).to_string(),
                        expected: catalog.name(effect.from).to_string(),
                    });
                }
                graph.set_parent(effect.object, effect.to);
            }
            pending = events.next();
        }
        graph.ensure_valid()?;
        graphs.push(graph.clone().with_minute(minute));
    }
    Ok(DaySequence { day, graphs })
}

/// Runs a script from `initial`, checking that every effect's origin holds.
pub(crate) fn check_script(script: &ActionScript, initial: &SceneGraph) -> Result<()> {
    if script.max_total() <= 0.0 {
        return Err(Error::Config(format!("script `{}` has zero maximum duration", script.name)));
    }
    let catalog = initial.catalog();
    let mut parents = initial.parents().to_vec();
    for (k, seg) in script.segments.iter().enumerate() {
        for e in &seg.effects {
            if parents[e.object.index()] != Some(e.from) {
                return Err(Error::ScriptEffect {
                    script: script.name.clone(),
                    segment: k,
                    object: catalog.name(e.object).to_string(),
                    expected: catalog.name(e.from).to_string(),
                });
            }
            parents[e.object.index()] = Some(e.to);
        }
    }
    Ok(())
}
