use std::sync::Arc;

use super::*;
use crate::scene::tests::{base_kitchen, kitchen_catalog};
use crate::scene::{NodeId, Relocation};
use crate::sim::RoutineDataset;

fn id(cat: &NodeCatalog, name: &str) -> NodeId {
    cat.id(name).unwrap()
}

fn moved(g: &SceneGraph, object: &str, to: &str, minute: u32) -> SceneGraph {
    let cat = g.catalog().clone();
    let mut out = g.clone().with_minute(minute);
    out.set_parent(id(&cat, object), id(&cat, to));
    out
}

/// Cup to the sink at 6:20, bowl to the sink at 6:40, cup back at 6:50.
fn scripted_day(cat: &Arc<NodeCatalog>, day: u32) -> DaySequence {
    let base = base_kitchen(cat);
    let mut graphs = vec![base.clone()];
    for step in 1..=8u32 {
        let prev = graphs.last().unwrap().clone();
        let m = 360 + 10 * step;
        graphs.push(match step {
            2 => moved(&prev, "cup", "sink", m),
            4 => moved(&prev, "bowl", "sink", m),
            5 => moved(&prev, "cup", "shelf", m),
            _ => prev.with_minute(m),
        });
    }
    DaySequence { day, graphs }
}

struct Identity;

impl Predictor for Identity {
    fn forecast(&self, g_t: &SceneGraph, _day: u32, steps: usize) -> Result<Vec<ProbGraph>> {
        Ok((1..=steps)
            .map(|k| ProbGraph::one_hot(&g_t.clone().with_minute(g_t.minute() + 10 * k as u32)))
            .collect())
    }
}

/// Looks the true future up in the recorded days.
struct Oracle(Vec<DaySequence>);

impl Predictor for Oracle {
    fn forecast(&self, g_t: &SceneGraph, day: u32, steps: usize) -> Result<Vec<ProbGraph>> {
        let d = self.0.iter().find(|d| d.day == day).unwrap();
        let t = d.graphs.iter().position(|g| g.minute() == g_t.minute()).unwrap();
        Ok((1..=steps).map(|k| ProbGraph::one_hot(&d.graphs[t + k])).collect())
    }
}

/// Always moves a fixed object to a fixed place at the first step.
struct Mover(&'static str, &'static str);

impl Predictor for Mover {
    fn forecast(&self, g_t: &SceneGraph, day: u32, steps: usize) -> Result<Vec<ProbGraph>> {
        let cat = g_t.catalog();
        let mut out = Identity.forecast(g_t, day, steps)?;
        if g_t.parent(id(cat, self.0)) != Some(id(cat, self.1)) {
            let mut g = g_t.clone();
            g.set_parent(id(cat, self.0), id(cat, self.1));
            for (k, p) in out.iter_mut().enumerate() {
                *p = ProbGraph::one_hot(&g.clone().with_minute(g_t.minute() + 10 * (k as u32 + 1)));
            }
        }
        Ok(out)
    }
}

#[test]
fn identity_predicts_nothing() {
    let cat = kitchen_catalog();
    let day = scripted_day(&cat, 0);
    for t in 0..day.graphs.len() - 1 {
        assert!(predicted_relocations(&Identity, &day.graphs[t], 0, 3).unwrap().is_empty());
    }
}

#[test]
fn true_relocations_compose_steps() {
    let cat = kitchen_catalog();
    let day = scripted_day(&cat, 0);
    let r = true_relocations(&day.graphs, 1, 4).unwrap();
    let (cup, bowl, shelf, sink, table) = ["cup", "bowl", "shelf", "sink", "table"].map(|n| id(&cat, n)).into();
    let want: Vec<Relocation> = vec![
        Relocation::new(cup, shelf, sink).unwrap(),
        Relocation::new(bowl, table, sink).unwrap(),
        Relocation::new(cup, sink, shelf).unwrap(),
    ];
    assert_eq!(r.iter().collect::<Vec<_>>(), want);
    assert!(true_relocations(&day.graphs, 5, 3).unwrap().is_empty());
}

#[test]
fn oracle_and_identity_extremes() {
    let cat = kitchen_catalog();
    let days = vec![scripted_day(&cat, 0), scripted_day(&cat, 1)];
    let oracle = evaluate_days(&Oracle(days.clone()), &days, &[1, 3]).unwrap();
    for c in &oracle {
        assert!(c.used() > 0);
        assert_eq!((c.used_wrong, c.used_missed, c.unused_wrong), (0, 0, 0));
        let r = ReportRow::new("oracle", 10, None, *c);
        assert_eq!((r.used_correct_pct, r.used_wrong_pct, r.used_missed_pct), (100.0, 0.0, 0.0));
        assert_eq!(r.unused_correct_pct, 100.0);
    }
    let identity = evaluate_days(&Identity, &days, &[1, 3]).unwrap();
    for (c, o) in identity.iter().zip(&oracle) {
        assert_eq!((c.used_correct, c.used_wrong, c.unused_wrong), (0, 0, 0));
        assert_eq!(c.used_missed, o.used());
        let r = ReportRow::new("identity", 10, None, *c);
        assert_eq!((r.used_correct_pct, r.used_missed_pct, r.unused_correct_pct), (0.0, 100.0, 100.0));
    }
}

#[test]
fn window_counts_by_hand() {
    let cat = kitchen_catalog();
    let day = scripted_day(&cat, 0);
    // One step from 6:10: the cup goes to the sink.
    let truth = true_relocations(&day.graphs, 1, 1).unwrap();
    let c = |pred: &dyn Predictor| evaluate_window(&predicted_relocations(pred, &day.graphs[1], 0, 1).unwrap(), &truth, &cat).unwrap();
    let right = c(&Mover("cup", "sink"));
    assert_eq!((right.used_correct, right.used_wrong, right.used_missed), (1, 0, 0));
    assert_eq!((right.unused_correct, right.unused_wrong), (2, 0));
    let wrong_place = c(&Mover("cup", "table"));
    assert_eq!((wrong_place.used_correct, wrong_place.used_wrong), (0, 1));
    let wrong_object = c(&Mover("towel", "sink"));
    assert_eq!((wrong_object.used_missed, wrong_object.unused_wrong, wrong_object.unused_correct), (1, 1, 1));
}

#[test]
fn counts_partition_the_movable_objects() {
    let cat = kitchen_catalog();
    let day = scripted_day(&cat, 0);
    let movable = cat.movable().count() as u64;
    for pred in [&Mover("cup", "table") as &dyn Predictor, &Mover("towel", "sink"), &Identity] {
        for t in 0..day.graphs.len() - 1 {
            for steps in 1..day.graphs.len() - t {
                let truth = true_relocations(&day.graphs, t, steps).unwrap();
                let p = predicted_relocations(pred, &day.graphs[t], 0, steps).unwrap();
                let c = evaluate_window(&p, &truth, &cat).unwrap();
                assert_eq!(c.used() + c.unused(), movable);
                assert_eq!(c.used(), truth.objects().len() as u64);
                // Brute force per object.
                let mut brute = Counts::default();
                for o in cat.movable() {
                    let moves_t: Vec<_> = truth.iter().filter(|r| r.object == o).collect();
                    let moves_p: Vec<_> = p.iter().filter(|r| r.object == o).collect();
                    match (moves_t.is_empty(), moves_p.is_empty()) {
                        (true, true) => brute.unused_correct += 1,
                        (true, false) => brute.unused_wrong += 1,
                        (false, true) => brute.used_missed += 1,
                        (false, false) if moves_p.iter().any(|r| moves_t.contains(r)) => brute.used_correct += 1,
                        (false, false) => brute.used_wrong += 1,
                    }
                }
                assert_eq!(c, brute);
            }
        }
    }
}

#[test]
fn foreign_ids_are_rejected() {
    let cat = kitchen_catalog();
    let mut bad = RelocationSet::new();
    bad.insert(Relocation::new(NodeId(40), NodeId(2), NodeId(3)).unwrap());
    assert!(matches!(
        evaluate_window(&bad, &RelocationSet::new(), &cat),
        Err(Error::CatalogMismatch)
    ));
}

#[test]
fn sweep_counts_match_single_horizons() {
    let cat = kitchen_catalog();
    let days = vec![scripted_day(&cat, 0)];
    let pred = Mover("cup", "sink");
    let all = evaluate_days(&pred, &days, &[1, 2, 5]).unwrap();
    for (i, d) in [1, 2, 5].into_iter().enumerate() {
        assert_eq!(all[i], evaluate_days(&pred, &days, &[d]).unwrap()[0]);
    }
    // Eight steps per day: windows of five steps fit at four starts.
    assert_eq!(all[2].used() + all[2].unused(), 4 * 3);
}

#[test]
fn tuning_picks_from_the_grids() {
    let cat = kitchen_catalog();
    let days: Vec<DaySequence> = (0..12).map(|d| scripted_day(&cat, d)).collect();
    let p = tune_static(&days, 3).unwrap();
    assert!(STATIC_GRID.contains(&p));
    let (k, rate) = tune_fremen(&days, 1).unwrap();
    assert!(FREMEN_COMPONENTS.contains(&k) && FREMEN_DECAY_RATES.contains(&rate));
    let fitted = fit_predictor(PredictorKind::Static, &days, &FitOptions::default()).unwrap();
    assert_eq!(fitted.hyper["p_change"], p);
}

#[test]
fn report_csv_and_names() {
    let counts = Counts {
        used_correct: 1,
        used_wrong: 1,
        used_missed: 2,
        unused_correct: 3,
        unused_wrong: 0,
    };
    let r = Report {
        experiment: "table1".into(),
        label: "d030".into(),
        seed: 7,
        config_digest: "0123456789abcdef".into(),
        rows: vec![ReportRow::new("gnn", 30, None, counts)],
        predictors: Default::default(),
    };
    assert_eq!(r.file_stem(), "table1_d030_0123456789ab_seed7");
    let csv = r.to_csv();
    assert_eq!(csv.lines().nth(1).unwrap(), "gnn,30,25.0000,25.0000,50.0000,100.0000,0.0000");
    assert_eq!("fremen".parse::<PredictorKind>().unwrap(), PredictorKind::Fremen);
    assert!("lstm".parse::<PredictorKind>().is_err());
}

#[test]
fn mismatched_predictor_sets_are_reported() {
    let cat = kitchen_catalog();
    let data = RoutineDataset {
        catalog: cat.clone(),
        train: vec![scripted_day(&cat, 0)],
        test: vec![scripted_day(&cat, 1)],
    };
    let set = PredictorSet {
        name: "static".into(),
        per_household: Vec::new(),
    };
    assert!(matches!(run_table1(&[data], &[set], 30), Err(Error::MissingPredictor(_))));
}
