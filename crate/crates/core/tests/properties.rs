use std::collections::BTreeSet;
use std::path::Path;

use proptest::prelude::*;

use side_core::kb::{forward_chain, Atom, Dimension, EntityId, Fact, Rule, SemanticGraph, Term};
use side_core::memory::{WmItem, WorkingMemory};
use side_core::metacog::project_weights;
use side_core::reason::{
    cell_distance, detect_collision, predict_trajectory, temporal_closure, EventSequenceModel, GridBounds,
    ReasonError, TemporalOrder, Trajectory,
};
use side_core::world::{parse_scenario, Action, Dir};

const NAMES: &[&str] = &["a", "b", "c", "d", "e", "f"];

fn id(s: &str) -> EntityId {
    EntityId::new(s).unwrap()
}

fn var(v: &str) -> Term {
    Term::var(v)
}

fn graph_strategy() -> impl Strategy<Value = SemanticGraph> {
    let rel = prop::sample::select(vec!["p", "q", "r"]);
    let name = prop::sample::select(NAMES.to_vec());
    prop::collection::vec((name.clone(), rel, name, 1u32..=10), 0..20).prop_map(|triples| {
        let mut g = SemanticGraph::new(Dimension::Unified);
        for (s, r, o, c) in triples {
            g.insert(Fact::triple(s, r, o).with_confidence(c as f64 / 10.0)).unwrap();
        }
        g
    })
}

fn rules() -> Vec<Rule> {
    vec![
        Rule::new(
            "chain",
            vec![Atom::new("p", var("x"), var("y")), Atom::new("p", var("y"), var("z"))],
            vec![],
            Atom::new("p", var("x"), var("z")),
            0.9,
        )
        .unwrap(),
        Rule::new(
            "lift",
            vec![Atom::new("q", var("x"), var("y"))],
            vec![],
            Atom::new("p", var("y"), var("x")),
            0.8,
        )
        .unwrap(),
        Rule::new(
            "join",
            vec![Atom::new("p", var("x"), var("y")), Atom::new("r", var("y"), var("z"))],
            vec![],
            Atom::new("r", var("x"), var("z")),
            1.0,
        )
        .unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chaining_ignores_rule_order(g in graph_strategy(), perm in Just(rules()).prop_shuffle()) {
        let a = forward_chain(&g, &rules(), 64);
        let b = forward_chain(&g, &perm, 64);
        prop_assert!(!a.truncated);
        prop_assert_eq!(a.graph, b.graph);
    }

    #[test]
    fn chaining_never_lowers_confidence(g in graph_strategy()) {
        let out = forward_chain(&g, &rules(), 64).graph;
        for f in g.facts() {
            prop_assert!(out.get(&f.key()).unwrap().confidence >= f.confidence);
        }
    }

    #[test]
    fn closure_is_transitive_and_idempotent(edges in prop::collection::vec((0usize..6, 0usize..6), 0..12)) {
        // orient every edge low -> high so the input is acyclic
        let pairs: Vec<(String, String)> = edges
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (NAMES[a.min(b)].to_string(), NAMES[a.max(b)].to_string()))
            .collect();
        let order = TemporalOrder::from_pairs(pairs.clone());
        let closed = temporal_closure(&order).unwrap();
        for (a, b) in &pairs {
            prop_assert!(closed.contains(a, b));
        }
        for (a, b) in closed.pairs() {
            for (c, d) in closed.pairs() {
                if b == c {
                    prop_assert!(closed.contains(a, d));
                }
            }
        }
        prop_assert_eq!(temporal_closure(&closed).unwrap(), closed.clone());
        // a back edge over any derived pair makes it cyclic
        if let Some((a, b)) = closed.pairs().iter().next().cloned() {
            let mut with_back = pairs;
            with_back.push((b, a));
            let cyclic = matches!(
                temporal_closure(&TemporalOrder::from_pairs(with_back)),
                Err(ReasonError::TemporalCycle { .. })
            );
            prop_assert!(cyclic);
        }
    }

    #[test]
    fn next_event_distribution_is_normalized(
        seq in prop::collection::vec(prop::sample::select(vec!["move", "grasp", "drop", "wait"]), 2..60),
        order in 1usize..3,
        probe in prop::collection::vec(prop::sample::select(vec!["move", "grasp", "drop", "wait"]), 3),
    ) {
        let mut m = EventSequenceModel::new(order);
        m.train(&seq);
        if seq.len() > order {
            let d = m.predict_next(&probe).unwrap();
            let total: f64 = d.probabilities.values().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(d.probabilities.values().all(|p| *p > 0.0 && *p <= 1.0));
        }
    }

    #[test]
    fn collision_is_symmetric(
        a in prop::collection::vec((0i64..8, 0i64..8), 1..6),
        b in prop::collection::vec((0i64..8, 0i64..8), 1..6),
        start in 0u64..3,
        eps in 0.1f64..3.0,
    ) {
        let ta = Trajectory::new(id("a"), a.iter().enumerate().map(|(i, c)| (i as u64, *c)));
        let tb = Trajectory::new(id("b"), b.iter().enumerate().map(|(i, c)| (start + i as u64, *c)));
        let ab = detect_collision(&ta, &tb, eps).unwrap();
        let ba = detect_collision(&tb, &ta, eps).unwrap();
        prop_assert_eq!(&ab, &ba);
        prop_assert!(ab.risks.iter().all(|(_, d)| *d < eps));
    }

    #[test]
    fn trajectories_stay_on_the_grid(
        p0 in (0i64..6, 0i64..6),
        p1 in (0i64..6, 0i64..6),
        horizon in 1u64..6,
    ) {
        let bounds = GridBounds { width: 6, height: 6 };
        let t = predict_trajectory(id("m"), &[(4, p0), (5, p1)], horizon, bounds).unwrap();
        prop_assert_eq!(t.positions.len() as u64, horizon);
        prop_assert!(t.positions.values().all(|c| bounds.contains(*c)));
    }

    #[test]
    fn distance_is_a_metric(a in (-20i64..20, -20i64..20), b in (-20i64..20, -20i64..20), c in (-20i64..20, -20i64..20)) {
        prop_assert_eq!(cell_distance(a, b), cell_distance(b, a));
        prop_assert_eq!(cell_distance(a, a), 0.0);
        prop_assert!(cell_distance(a, c) <= cell_distance(a, b) + cell_distance(b, c) + 1e-9);
    }

    #[test]
    fn working_memory_respects_capacity(
        cap in 1usize..24,
        ops in prop::collection::vec((0usize..40, 0u32..=10, any::<bool>()), 0..200),
    ) {
        let mut wm = WorkingMemory::new(cap, 0.9);
        for (now, (n, sal, remove)) in ops.into_iter().enumerate() {
            let now = now as u64;
            let fact = Fact::triple(format!("e{n}").as_str(), "seen", "yes").at_tick(now);
            if remove {
                wm.remove(&fact.key());
            } else {
                let evicted = wm.insert(WmItem::new(fact.clone(), sal as f64 / 10.0, now), now);
                if let Some(gone) = evicted {
                    // nothing left behind ranks below what was evicted
                    let floor = wm.effective_salience(&gone, now);
                    prop_assert!(wm.items().all(|i| wm.effective_salience(i, now) >= floor));
                }
            }
            prop_assert!(wm.len() <= cap);
        }
    }

    #[test]
    fn projected_weights_are_a_clamped_simplex(raw in prop::array::uniform3(-1.0f64..2.0)) {
        let w = project_weights(raw, 0.1, 0.8);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(w.iter().all(|x| *x >= 0.1 - 1e-12 && *x <= 0.8 + 1e-12));
    }

    #[test]
    fn random_actions_keep_stacks_well_formed(actions in prop::collection::vec(action_strategy(), 0..80)) {
        let mut world = tabletop();
        for a in &actions {
            world.step(a);
            prop_assert!(world.stacks_well_formed(), "after {a}");
        }
    }
}

fn action_strategy() -> impl Strategy<Value = Action> {
    let item = prop::sample::select(vec!["plate1", "plate2", "cup1"]).prop_map(id);
    let target = prop::sample::select(vec!["plate1", "plate2", "cup1", "table1"]).prop_map(id);
    let dir = prop::sample::select(vec![Dir::North, Dir::East, Dir::South, Dir::West]);
    prop_oneof![
        3 => dir.prop_map(Action::Move),
        2 => item.clone().prop_map(Action::PickUp),
        2 => (item, target).prop_map(|(i, t)| Action::PlaceOn(i, t)),
        1 => Just(Action::Wait),
    ]
}

fn tabletop() -> side_core::world::World {
    let text = "\
scenario props
version 1
grid 5 5
agent robot at 1 1
entity table1 at 2 2 category=table extent=2x1
entity plate1 at 1 2 category=plate class=item size=3
entity plate2 at 2 1 category=plate class=item size=2
entity cup1 at 2 2 category=cup class=item size=1 flags=fragile
";
    parse_scenario(text, Path::new(".")).unwrap().world
}

#[test]
fn compass_directions_cancel() {
    let dirs = [Dir::North, Dir::East, Dir::South, Dir::West];
    let opposite = |d: Dir| dirs[(dirs.iter().position(|x| *x == d).unwrap() + 2) % 4];
    let mut seen = BTreeSet::new();
    for d in dirs {
        let (x, y) = d.delta();
        let (ox, oy) = opposite(d).delta();
        assert_eq!((x + ox, y + oy), (0, 0));
        assert_eq!(x.abs() + y.abs(), 1);
        seen.insert(d.delta());
    }
    assert_eq!(seen.len(), 4);
}
