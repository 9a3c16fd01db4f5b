//! Synthetic routine datasets: survey samples are clustered into habits,
//! habits are combined into distinct households, and each household's days
//! are sampled as activity schedules and executed into scene graphs.

mod compose;
mod config;
mod schedule;
mod survey;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use compose::{compose_households, fitness, household, symmetric_kl, Composition, Household, Ordering};
pub use config::{
    ActionScript, ActivitySpec, Effect, GeneticConfig, IdleConfig, LatentHabit, Segment, SegmentSpec, SimConfig,
    SurveyConfig, World, IDLE,
};
pub use schedule::{distribution, execute, hour_bin, sample_schedule, Schedule, ScheduledActivity};
pub use survey::{
    extract_habits, habit_features, mask_of, reclassify_meals, synth_survey, ActivitySample, Habit, KMEANS_CLUSTERS,
    MIN_CLUSTER_DROP,
};

use crate::error::{Error, Result};
use crate::scene::{hex_digest, read_catalog, read_day, write_catalog, write_day, DaySequence, NodeCatalog};

/// Hour bins from 6:00 to midnight.
pub const HOURS: usize = 18;
pub const DAY_START: u32 = 6 * 60;
pub const DAY_END: u32 = 24 * 60;

pub const LEAVE_HOME: &str = "leave_home";
pub const COME_HOME: &str = "come_home";
pub const MEALS: [&str; 3] = ["breakfast", "lunch", "dinner"];

/// Train and test days of one household. Test days continue the day count
/// of the train split.
#[derive(Clone, Debug, PartialEq)]
pub struct RoutineDataset {
    pub catalog: Arc<NodeCatalog>,
    pub train: Vec<DaySequence>,
    pub test: Vec<DaySequence>,
}

#[derive(Clone, Debug)]
pub struct HouseholdData {
    pub profile: Household,
    pub data: RoutineDataset,
}

#[derive(Clone, Debug)]
pub struct Generated {
    pub seed: u64,
    pub config_digest: String,
    pub catalog: Arc<NodeCatalog>,
    pub habits: Vec<Vec<Habit>>,
    pub fitness: f64,
    pub households: Vec<HouseholdData>,
}

/// SplitMix64 finalizer over a pair; derives independent child seeds.
pub fn child_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(0x6a09_e667_f3bc_c909);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn ordering(world: &World) -> Option<Ordering> {
    Some(Ordering {
        first: world.activity(LEAVE_HOME)?,
        second: world.activity(COME_HOME)?,
    })
}

/// Survey, reclassification and clustering: habits per activity.
pub fn habits_from_survey(config: &SimConfig, world: &World, seed: u64) -> Result<Vec<Vec<Habit>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, 1));
    let mut samples = synth_survey(&config.activities, config.survey.respondents, config.survey.flip_noise, &mut rng);
    if let [Some(b), Some(l), Some(d)] = MEALS.map(|m| world.activity(m)) {
        samples = reclassify_meals(samples, [b, l, d]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, 2));
    (0..world.n_activities())
        .map(|a| {
            extract_habits(a, &samples, &mut rng).map_err(|e| match e {
                Error::NoHabit(_) => Error::NoHabit(world.activity_names[a].clone()),
                other => other,
            })
        })
        .collect()
}

/// One sampled and executed day of a household.
pub fn simulate_day(world: &World, profile: &Household, idle_weight: f64, seed: u64, day: u32) -> Result<DaySequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, day as u64));
    let schedule = sample_schedule(profile, world, idle_weight, &mut rng);
    execute(&schedule, world, &world.initial, day)
}

pub fn generate_dataset(config: &SimConfig, seed: u64) -> Result<Generated> {
    let world = config.world()?;
    let habits = habits_from_survey(config, &world, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(child_seed(seed, 3));
    let composition = compose_households(&habits, config.households, ordering(&world), &config.genetic, &mut rng)?;
    let total = (config.train_days + config.test_days) as u32;
    let households = composition
        .households
        .into_iter()
        .enumerate()
        .map(|(k, profile)| {
            let day_seed = child_seed(seed, 100 + k as u64);
            let mut days = (0..total)
                .into_par_iter()
                .map(|d| simulate_day(&world, &profile, config.idle.weight, day_seed, d))
                .collect::<Result<Vec<_>>>()?;
            let test = days.split_off(config.train_days);
            Ok(HouseholdData {
                profile,
                data: RoutineDataset {
                    catalog: world.catalog.clone(),
                    train: days,
                    test,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Generated {
        seed,
        config_digest: config.digest(),
        catalog: world.catalog,
        habits,
        fitness: composition.fitness,
        households,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: String,
    pub seed: u64,
    pub config_digest: String,
    pub catalog_digest: String,
    pub households: usize,
    pub train_days: usize,
    pub test_days: usize,
    pub fitness: f64,
    /// SHA-256 of every written file, keyed by relative path.
    pub files: BTreeMap<String, String>,
    /// SHA-256 over the `files` table.
    pub dataset_digest: String,
}

pub const MANIFEST: &str = "manifest.json";
pub const CATALOG: &str = "catalog.json";

pub fn household_dir(root: &Path, k: usize) -> PathBuf {
    root.join(format!("household_{k}"))
}

fn day_file(day: u32) -> String {
    format!("day_{day:03}.jsonl")
}

/// Writes the catalog, each household's profile and days, and a manifest.
pub fn write_dataset(dir: &Path, generated: &Generated) -> Result<DatasetManifest> {
    let mkdir = |p: &Path| fs::create_dir_all(p).map_err(|e| Error::io(p, e));
    mkdir(dir)?;
    let mut written = vec![CATALOG.to_string()];
    write_catalog(&dir.join(CATALOG), &generated.catalog)?;
    for (k, h) in generated.households.iter().enumerate() {
        let home = household_dir(dir, k);
        let rel = format!("household_{k}");
        for (split, days) in [("train", &h.data.train), ("test", &h.data.test)] {
            mkdir(&home.join(split))?;
            for day in days {
                let name = day_file(day.day);
                write_day(&home.join(split).join(&name), day)?;
                written.push(format!("{rel}/{split}/{name}"));
            }
        }
        let profile = home.join("profile.json");
        fs::write(&profile, serde_json::to_string_pretty(&h.profile)? + "\n").map_err(|e| Error::io(&profile, e))?;
        written.push(format!("{rel}/profile.json"));
    }
    let mut files = BTreeMap::new();
    for rel in written {
        let path = dir.join(&rel);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        files.insert(rel, hex_digest(&bytes));
    }
    let first = generated.households.first();
    let manifest = DatasetManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: generated.seed,
        config_digest: generated.config_digest.clone(),
        catalog_digest: generated.catalog.digest(),
        households: generated.households.len(),
        train_days: first.map_or(0, |h| h.data.train.len()),
        test_days: first.map_or(0, |h| h.data.test.len()),
        fitness: generated.fitness,
        dataset_digest: hex_digest(&serde_json::to_vec(&files)?),
        files,
    };
    let path = dir.join(MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn read_split(dir: &Path, catalog: &Arc<NodeCatalog>) -> Result<Vec<DaySequence>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_day(p, catalog)).collect()
}

/// Reads every `household_<k>` directory of a written dataset, in order.
pub fn read_dataset(dir: &Path) -> Result<Vec<RoutineDataset>> {
    let catalog = read_catalog(&dir.join(CATALOG))?;
    let mut out = Vec::new();
    while household_dir(dir, out.len()).is_dir() {
        let home = household_dir(dir, out.len());
        out.push(RoutineDataset {
            catalog: catalog.clone(),
            train: read_split(&home.join("train"), &catalog)?,
            test: read_split(&home.join("test"), &catalog)?,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(out)
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(&path, e))
}
