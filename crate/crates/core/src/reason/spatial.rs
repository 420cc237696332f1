//! Qualitative relation composition and trajectory-based collision checks.

use std::collections::BTreeMap;

use crate::kb::{EntityId, Fact, FactKey, Origin, SemanticGraph};

use super::ReasonError;

/// Relations the composition table may mention.
pub const SPATIAL_VOCABULARY: &[&str] =
    &["LeftOf", "RightOf", "Above", "Below", "OnTopOf", "Inside", "Near"];

/// Grid cell `(x, y)`.
pub type Cell = (i64, i64);

/// `(R1, R2) -> R3`: from `R1(a, b)` and `R2(b, c)` infer `R3(a, c)`.
/// A missing entry means no inference.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompositionTable {
    entries: BTreeMap<(String, String), String>,
}

impl CompositionTable {
    pub fn insert(&mut self, first: &str, second: &str, result: &str) {
        self.entries
            .insert((first.to_string(), second.to_string()), result.to_string());
    }

    pub fn get(&self, first: &str, second: &str) -> Option<&str> {
        self.entries
            .get(&(first.to_string(), second.to_string()))
            .map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.entries
            .iter()
            .map(|((a, b), c)| (a.as_str(), b.as_str(), c.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Apply the table to a fixpoint and return only the facts that were not
/// in `graph`. Confidence of a composed fact is the product of its two
/// premises (best derivation wins). Reflexive conclusions `R(a, a)` are
/// not produced.
pub fn compose_spatial(graph: &SemanticGraph, table: &CompositionTable) -> Vec<Fact> {
    let mut known: BTreeMap<FactKey, Fact> = graph
        .facts()
        .filter(|f| SPATIAL_VOCABULARY.contains(&f.relation.as_str()) && f.object.as_atom().is_some())
        .map(|f| (f.key(), f.clone()))
        .collect();
    loop {
        let mut by_subject: BTreeMap<&EntityId, Vec<&Fact>> = BTreeMap::new();
        for fact in known.values() {
            by_subject.entry(&fact.subject).or_default().push(fact);
        }
        let mut produced = Vec::new();
        for first in known.values() {
            let Some(middle) = first.object.as_atom() else {
                continue;
            };
            for second in by_subject.get(middle).into_iter().flatten() {
                let Some(result) = table.get(&first.relation, &second.relation) else {
                    continue;
                };
                if second.object.as_atom() == Some(&first.subject) {
                    continue;
                }
                produced.push(Fact {
                    subject: first.subject.clone(),
                    relation: result.to_string(),
                    object: second.object.clone(),
                    confidence: first.confidence * second.confidence,
                    tick: first.tick.max(second.tick),
                    origin: Origin::Derived,
                });
            }
        }
        let mut changed = false;
        for fact in produced {
            match known.get_mut(&fact.key()) {
                Some(existing) => {
                    if fact.confidence > existing.confidence {
                        existing.confidence = fact.confidence;
                        changed = true;
                    }
                    if fact.tick > existing.tick {
                        existing.tick = fact.tick;
                        changed = true;
                    }
                }
                None => {
                    known.insert(fact.key(), fact);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    known
        .into_values()
        .filter(|f| graph.get(&f.key()).is_none())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridBounds {
    pub width: i64,
    pub height: i64,
}

impl GridBounds {
    pub fn clamp(&self, (x, y): Cell) -> Cell {
        (x.clamp(0, self.width - 1), y.clamp(0, self.height - 1))
    }

    pub fn contains(&self, (x, y): Cell) -> bool {
        (0..self.width).contains(&x) && (0..self.height).contains(&y)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub entity: EntityId,
    pub positions: BTreeMap<u64, Cell>,
    pub low_confidence: bool,
}

impl Trajectory {
    pub fn new(entity: EntityId, positions: impl IntoIterator<Item = (u64, Cell)>) -> Self {
        Self {
            entity,
            positions: positions.into_iter().collect(),
            low_confidence: false,
        }
    }

    pub fn at(&self, tick: u64) -> Option<Cell> {
        self.positions.get(&tick).copied()
    }
}

pub fn cell_distance(a: Cell, b: Cell) -> f64 {
    let dx = (a.0 - b.0) as f64;
    let dy = (a.1 - b.1) as f64;
    dx.hypot(dy)
}

/// Constant-velocity extrapolation from the last two observed positions,
/// clamped to the grid, for ticks `last + 1 ..= last + horizon`. A single
/// observation yields a stationary, low-confidence trajectory.
pub fn predict_trajectory(
    entity: EntityId,
    history: &[(u64, Cell)],
    horizon: u64,
    bounds: GridBounds,
) -> Result<Trajectory, ReasonError> {
    let (last_tick, last) = *history.last().ok_or(ReasonError::NoHistory)?;
    let (velocity, low_confidence) = match history.len() {
        1 => ((0, 0), true),
        n => {
            let (prev_tick, prev) = history[n - 2];
            if prev_tick + 1 != last_tick {
                return Err(ReasonError::NonConsecutive {
                    first: prev_tick,
                    second: last_tick,
                });
            }
            ((last.0 - prev.0, last.1 - prev.1), false)
        }
    };
    let positions = (1..=horizon).map(|step| {
        let s = step as i64;
        let cell = bounds.clamp((last.0 + velocity.0 * s, last.1 + velocity.1 * s));
        (last_tick + step, cell)
    });
    Ok(Trajectory {
        entity,
        positions: positions.collect(),
        low_confidence,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionReport {
    /// `(tick, distance)` for every shared tick with distance `< epsilon`.
    pub risks: Vec<(u64, f64)>,
    /// The trajectories share no tick at all.
    pub no_overlap: bool,
}

/// `Distance(P_a(t), P_b(t)) < epsilon` over the ticks both trajectories
/// cover.
pub fn detect_collision(
    a: &Trajectory,
    b: &Trajectory,
    epsilon: f64,
) -> Result<CollisionReport, ReasonError> {
    if !(epsilon > 0.0) {
        return Err(ReasonError::InvalidEpsilon(epsilon));
    }
    let mut shared = 0;
    let mut risks = Vec::new();
    for (&tick, &pa) in &a.positions {
        if let Some(pb) = b.at(tick) {
            shared += 1;
            let d = cell_distance(pa, pb);
            if d < epsilon {
                risks.push((tick, d));
            }
        }
    }
    Ok(CollisionReport {
        risks,
        no_overlap: shared == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::RuleSet;

    fn id(s: &str) -> EntityId {
        EntityId::new(s).unwrap()
    }

    fn graph(facts: &[(&str, &str, &str)]) -> SemanticGraph {
        let mut g = SemanticGraph::new(crate::kb::Dimension::Spatial);
        for (s, r, o) in facts {
            g.insert(Fact::triple(s, r, o)).unwrap();
        }
        g
    }

    #[test]
    fn vase_is_left_of_bed_but_not_near_window() {
        let table = RuleSet::shipped().composition;
        let g = graph(&[
            ("vase", "OnTopOf", "table"),
            ("table", "LeftOf", "bed"),
            ("bed", "Near", "window"),
        ]);
        let out = compose_spatial(&g, &table);
        let keys: Vec<String> = out.iter().map(|f| f.key().to_string()).collect();
        assert_eq!(keys, ["LeftOf(vase, bed)"]);
    }

    #[test]
    fn left_of_is_transitive() {
        let table = RuleSet::shipped().composition;
        let g = graph(&[("a", "LeftOf", "b"), ("b", "LeftOf", "c")]);
        let out = compose_spatial(&g, &table);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].key(), Fact::triple("a", "LeftOf", "c").key());
    }

    #[test]
    fn composed_confidence_is_product() {
        let table = RuleSet::shipped().composition;
        let mut g = SemanticGraph::new(crate::kb::Dimension::Spatial);
        g.insert(Fact::triple("a", "LeftOf", "b").with_confidence(0.5)).unwrap();
        g.insert(Fact::triple("b", "LeftOf", "c").with_confidence(0.8)).unwrap();
        g.insert(Fact::triple("c", "LeftOf", "d").with_confidence(0.5)).unwrap();
        let out = compose_spatial(&g, &table);
        let conf: BTreeMap<String, f64> = out
            .iter()
            .map(|f| (f.key().to_string(), f.confidence))
            .collect();
        assert_eq!(conf["LeftOf(a, c)"], 0.4);
        assert_eq!(conf["LeftOf(b, d)"], 0.4);
        // best of (a,c)+(c,d) = 0.2 and (a,b)+(b,d) = 0.2
        assert_eq!(conf["LeftOf(a, d)"], 0.2);
    }

    #[test]
    fn trajectory_extrapolates_constant_velocity() {
        let b = GridBounds { width: 10, height: 10 };
        let t = predict_trajectory(id("a"), &[(0, (0, 0)), (1, (1, 0))], 3, b).unwrap();
        let cells: Vec<Cell> = t.positions.values().copied().collect();
        assert_eq!(cells, [(2, 0), (3, 0), (4, 0)]);
        assert_eq!(t.positions.keys().copied().collect::<Vec<_>>(), [2, 3, 4]);
        assert!(!t.low_confidence);
    }

    #[test]
    fn trajectory_stationary_and_clamped() {
        let b = GridBounds { width: 5, height: 5 };
        let t = predict_trajectory(id("a"), &[(4, (2, 2)), (5, (2, 2))], 2, b).unwrap();
        assert!(t.positions.values().all(|&c| c == (2, 2)));
        let t = predict_trajectory(id("a"), &[(0, (-2, -1)), (1, (0, 0))], 2, b).unwrap();
        assert_eq!(t.positions.values().copied().collect::<Vec<_>>(), [(2, 1), (4, 2)]);
        let t = predict_trajectory(id("a"), &[(0, (2, 1)), (1, (4, 2))], 2, b).unwrap();
        assert_eq!(t.positions.values().copied().collect::<Vec<_>>(), [(4, 3), (4, 4)]);
    }

    #[test]
    fn single_observation_is_low_confidence() {
        let b = GridBounds { width: 5, height: 5 };
        let t = predict_trajectory(id("a"), &[(3, (1, 1))], 2, b).unwrap();
        assert!(t.low_confidence);
        assert_eq!(t.at(5), Some((1, 1)));
        assert!(predict_trajectory(id("a"), &[(0, (0, 0)), (2, (1, 0))], 2, b).is_err());
    }

    #[test]
    fn collision_identical_positions() {
        let a = Trajectory::new(id("a"), [(5, (1, 1))]);
        let b = Trajectory::new(id("b"), [(5, (1, 1))]);
        let r = detect_collision(&a, &b, 1.0).unwrap();
        assert_eq!(r.risks, [(5, 0.0)]);
    }

    #[test]
    fn collision_crossing_paths() {
        let a = Trajectory::new(id("a"), (0..=4).map(|t| (t, (t as i64, 0))));
        let b = Trajectory::new(id("b"), (0..=4).map(|t| (t, (4 - t as i64, 0))));
        let r = detect_collision(&a, &b, 1.0).unwrap();
        assert_eq!(r.risks, [(2, 0.0)]);
        assert_eq!(detect_collision(&b, &a, 1.0).unwrap(), r);
    }

    #[test]
    fn collision_parallel_lanes_and_disjoint() {
        let a = Trajectory::new(id("a"), (0..=4).map(|t| (t, (t as i64, 0))));
        let b = Trajectory::new(id("b"), (0..=4).map(|t| (t, (t as i64, 3))));
        assert!(detect_collision(&a, &b, 1.0).unwrap().risks.is_empty());
        let c = Trajectory::new(id("c"), (10..=12).map(|t| (t, (0, 0))));
        let r = detect_collision(&a, &c, 1.0).unwrap();
        assert!(r.no_overlap && r.risks.is_empty());
        assert!(detect_collision(&a, &b, 0.0).is_err());
    }
}
