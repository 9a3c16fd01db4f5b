use std::path::Path;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::HOURS;
use crate::error::{Error, Result};
use crate::scene::{hex_digest, Node, NodeCatalog, NodeId, SceneGraph};

const DEFAULT_CONFIG: &str = include_str!("../../configs/default.json");

/// Hours a group of respondents marks for one activity, and how common
/// the group is.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentHabit {
    pub weight: f64,
    /// Hours of the day, 6 through 23.
    pub hours: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    /// Inclusive duration range in minutes.
    pub minutes: [f64; 2],
    /// `[object, from, to]` relocations applied when the segment ends.
    #[serde(default)]
    pub moves: Vec<[String; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivitySpec {
    pub name: String,
    pub habits: Vec<LatentHabit>,
    pub segments: Vec<SegmentSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurveyConfig {
    pub respondents: usize,
    pub flip_noise: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdleConfig {
    pub minutes: [f64; 2],
    /// Unnormalized schedule weight of idling; zero keeps it as a fallback
    /// for hours where no activity has mass.
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneticConfig {
    pub pool_size: usize,
    pub runs: usize,
    pub iterations: usize,
    pub mutation_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub root: String,
    pub rooms: Vec<String>,
    /// Furniture per room.
    pub furniture: IndexMap<String, Vec<String>>,
    /// Movable objects per initial location.
    pub objects: IndexMap<String, Vec<String>>,
    pub activities: Vec<ActivitySpec>,
    pub survey: SurveyConfig,
    pub idle: IdleConfig,
    pub genetic: GeneticConfig,
    pub households: usize,
    pub train_days: usize,
    pub test_days: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_CONFIG).expect("bundled config parses")
    }
}

/// A relocation effect with resolved node ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Effect {
    pub object: NodeId,
    pub from: NodeId,
    pub to: NodeId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub duration_min: f64,
    pub duration_max: f64,
    pub effects: Vec<Effect>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionScript {
    pub activity: usize,
    pub name: String,
    pub segments: Vec<Segment>,
}

impl ActionScript {
    pub fn min_total(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_min).sum()
    }

    pub fn max_total(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_max).sum()
    }
}

/// The config with names resolved against the catalog.
#[derive(Clone, Debug)]
pub struct World {
    pub catalog: Arc<NodeCatalog>,
    pub initial: SceneGraph,
    /// One script per activity, in config order; the idle script is last.
    pub scripts: Vec<ActionScript>,
    pub activity_names: Vec<String>,
}

impl World {
    pub fn n_activities(&self) -> usize {
        self.activity_names.len()
    }

    pub fn idle(&self) -> usize {
        self.scripts.len() - 1
    }

    pub fn activity(&self, name: &str) -> Option<usize> {
        self.activity_names.iter().position(|n| n == name)
    }
}

pub const IDLE: &str = "idle";

impl SimConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: SimConfig = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        config.check()?;
        Ok(config)
    }

    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex_digest(&bytes)
    }

    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.activities.is_empty() {
            return bad("no activities".into());
        }
        for a in &self.activities {
            if a.name == IDLE {
                return bad(format!("activity name `{IDLE}` is reserved"));
            }
            if a.habits.is_empty() {
                return bad(format!("activity `{}` has no latent habits", a.name));
            }
            for h in &a.habits {
                if !(h.weight.is_finite() && h.weight > 0.0) {
                    return bad(format!("activity `{}`: habit weight {} must be positive", a.name, h.weight));
                }
                if h.hours.is_empty() || h.hours.iter().any(|&x| !(6..6 + HOURS as u32).contains(&x)) {
                    return bad(format!("activity `{}`: habit hours must be nonempty and within 6..=23", a.name));
                }
            }
            if a.segments.is_empty() {
                return bad(format!("activity `{}` has no segments", a.name));
            }
            for s in &a.segments {
                check_range(&a.name, s.minutes)?;
            }
        }
        check_range(IDLE, self.idle.minutes)?;
        if !(self.idle.weight.is_finite() && self.idle.weight >= 0.0) {
            return bad(format!("idle weight {} must be nonnegative", self.idle.weight));
        }
        if self.survey.respondents < 8 {
            return bad(format!("{} survey respondents; at least 8 are needed", self.survey.respondents));
        }
        if !(0.0..=0.5).contains(&self.survey.flip_noise) {
            return bad(format!("flip noise {} outside [0, 0.5]", self.survey.flip_noise));
        }
        let g = &self.genetic;
        if g.pool_size < 2 || g.runs == 0 || !(0.0..=1.0).contains(&g.mutation_rate) {
            return bad("genetic search needs pool_size >= 2, runs >= 1 and mutation_rate in [0, 1]".into());
        }
        if self.households == 0 || self.train_days == 0 || self.test_days == 0 {
            return bad("households, train_days and test_days must be positive".into());
        }
        Ok(())
    }

    pub fn catalog(&self) -> Result<NodeCatalog> {
        let mut names = vec![(self.root.clone(), true, true)];
        names.extend(self.rooms.iter().map(|r| (r.clone(), false, true)));
        for (room, items) in &self.furniture {
            if !self.rooms.contains(room) {
                return Err(Error::Config(format!("furniture listed under unknown room `{room}`")));
            }
            names.extend(items.iter().map(|f| (f.clone(), false, true)));
        }
        names.extend(self.objects.values().flatten().map(|o| (o.clone(), false, false)));
        let nodes = names
            .into_iter()
            .enumerate()
            .map(|(i, (name, is_root, is_static))| Node {
                id: NodeId(i),
                name,
                is_root,
                is_static,
            })
            .collect();
        NodeCatalog::new(nodes)
    }

    pub fn world(&self) -> Result<World> {
        self.check()?;
        let catalog = Arc::new(self.catalog()?);
        let id = |name: &str| {
            catalog
                .id(name)
                .ok_or_else(|| Error::Config(format!("unknown node `{name}`")))
        };
        let root = catalog.root();
        let mut parents = vec![None; catalog.len()];
        for room in &self.rooms {
            parents[id(room)?.index()] = Some(root);
        }
        for (room, items) in &self.furniture {
            let room = id(room)?;
            for f in items {
                parents[id(f)?.index()] = Some(room);
            }
        }
        for (home, items) in &self.objects {
            let home = id(home)?;
            for o in items {
                parents[id(o)?.index()] = Some(home);
            }
        }
        let initial = SceneGraph::new_valid(catalog.clone(), parents, super::DAY_START)?;

        let mut scripts = Vec::with_capacity(self.activities.len() + 1);
        for (activity, spec) in self.activities.iter().enumerate() {
            let mut segments = Vec::with_capacity(spec.segments.len());
            for seg in &spec.segments {
                let mut effects = Vec::with_capacity(seg.moves.len());
                for [o, from, to] in &seg.moves {
                    let object = id(o)?;
                    if !catalog.is_movable(object) {
                        return Err(Error::Config(format!("script `{}` moves static node `{o}`", spec.name)));
                    }
                    effects.push(Effect {
                        object,
                        from: id(from)?,
                        to: id(to)?,
                    });
                }
                segments.push(Segment {
                    duration_min: seg.minutes[0],
                    duration_max: seg.minutes[1],
                    effects,
                });
            }
            scripts.push(ActionScript {
                activity,
                name: spec.name.clone(),
                segments,
            });
        }
        scripts.push(ActionScript {
            activity: self.activities.len(),
            name: IDLE.into(),
            segments: vec![Segment {
                duration_min: self.idle.minutes[0],
                duration_max: self.idle.minutes[1],
                effects: Vec::new(),
            }],
        });
        let world = World {
            catalog,
            initial,
            scripts,
            activity_names: self.activities.iter().map(|a| a.name.clone()).collect(),
        };
        for script in &world.scripts {
            super::schedule::check_script(script, &world.initial)?;
        }
        Ok(world)
    }
}

fn check_range(name: &str, [lo, hi]: [f64; 2]) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi {
        Ok(())
    } else {
        Err(Error::Config(format!("`{name}`: duration range [{lo}, {hi}] is invalid")))
    }
}
