use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use routine_dynamics::sim::*;

/// Largest per-hour total variation between drawn activities and the
/// household's schedule distribution, with the number of draws per hour.
pub fn hour_frequency_tv(profile: &Household, world: &World, idle_weight: f64, days: usize, seed: u64) -> (f64, usize) {
    let k = world.n_activities() + 1;
    let mut counts = vec![vec![0usize; k]; HOURS];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..days {
        for (t, a) in sample_schedule(profile, world, idle_weight, &mut rng).draws {
            counts[hour_bin(t)][a] += 1;
        }
    }
    let mut worst = 0.0f64;
    let mut fewest = usize::MAX;
    for (h, row) in counts.iter().enumerate() {
        let total: usize = row.iter().sum();
        fewest = fewest.min(total);
        let want = distribution(profile, idle_weight, h);
        let tv = 0.5 * row.iter().zip(&want).map(|(&c, &p)| (c as f64 / total as f64 - p).abs()).sum::<f64>();
        worst = worst.max(tv);
    }
    (worst, fewest)
}

fn default_profile() -> (SimConfig, World, Household) {
    let config = SimConfig::default();
    let world = config.world().unwrap();
    let habits = habits_from_survey(&config, &world, config.seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let composition = compose_households(&habits, 1, ordering(&world), &config.genetic, &mut rng).unwrap();
    (config, world, composition.households.into_iter().next().unwrap())
}

#[test]
fn sampled_hours_match_the_household_distribution() {
    let (config, world, profile) = default_profile();
    let (tv, fewest) = hour_frequency_tv(&profile, &world, config.idle.weight, 1000, 11);
    assert!(fewest >= 500, "{fewest} draws in the sparsest hour");
    assert!(tv < 0.1, "tv {tv}");
}

#[test]
fn sampled_days_tile_the_waking_hours() {
    let (config, world, profile) = default_profile();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..300 {
        let s = sample_schedule(&profile, &world, config.idle.weight, &mut rng);
        assert_eq!(s.entries[0].start, DAY_START as f64);
        assert_eq!(s.entries.last().unwrap().end, DAY_END as f64);
        assert!(s.entries.windows(2).all(|w| w[0].end == w[1].start));
    }
}

#[test]
fn habits_survive_clustering_for_every_activity() {
    let config = SimConfig::default();
    let world = config.world().unwrap();
    let habits = habits_from_survey(&config, &world, 21).unwrap();
    assert_eq!(habits.len(), world.n_activities());
    for per_activity in &habits {
        assert!(!per_activity.is_empty() && per_activity.len() <= KMEANS_CLUSTERS);
        for h in per_activity {
            assert!(h.support > MIN_CLUSTER_DROP);
            assert!(h.probs.iter().all(|p| (0.0..=1.0).contains(p)) && h.probs.iter().any(|&p| p > 0.0));
        }
    }
}

#[test]
fn households_are_distinct_and_days_reset() {
    let mut config = SimConfig::default();
    config.train_days = 4;
    config.test_days = 1;
    config.genetic.runs = 1;
    config.genetic.iterations = 200;
    let generated = generate_dataset(&config, 19).unwrap();
    assert_eq!(generated.households.len(), 5);
    let world = config.world().unwrap();
    let profiles: Vec<_> = generated.households.iter().map(|h| &h.profile.choice).collect();
    assert!(profiles.windows(2).any(|w| w[0] != w[1]));
    for h in &generated.households {
        for d in h.data.train.iter().chain(&h.data.test) {
            assert!(d.graphs[0].same_arrangement(&world.initial));
            assert!(d.graphs.iter().all(|g| g.validate().is_valid()));
        }
    }
}
