//! Unified cognition: union of the temporal, spatial and conceptual graphs
//! on shared entity ids, integration-rule chaining, contradiction flagging
//! and multi-dimension hazard assessment.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::kb::{forward_chain, Dimension, EntityId, Fact, KbError, Object, Origin, Rule, SemanticGraph};
use crate::reason::DEFAULT_MAX_PASSES;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CognitionError {
    #[error("{slot} graph has dimension {found}")]
    WrongDimension { slot: &'static str, found: &'static str },
    #[error(transparent)]
    Kb(#[from] KbError),
}

/// Which dimension graphs mention an entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, PartialOrd, Ord)]
pub struct Presence(u8);

impl Presence {
    pub const TEMPORAL: u8 = 0b001;
    pub const SPATIAL: u8 = 0b010;
    pub const CONCEPTUAL: u8 = 0b100;

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn set(&mut self, dim: Dimension) {
        self.0 |= Self::bit(dim);
    }

    pub fn has(self, dim: Dimension) -> bool {
        self.0 & Self::bit(dim) != 0
    }

    fn bit(dim: Dimension) -> u8 {
        match dim {
            Dimension::Temporal => Self::TEMPORAL,
            Dimension::Spatial => Self::SPATIAL,
            Dimension::Conceptual => Self::CONCEPTUAL,
            Dimension::Unified => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedCognition {
    pub graph: SemanticGraph,
    pub correspondence: BTreeMap<EntityId, Presence>,
    pub contradictions: Vec<(Fact, Fact)>,
    pub hazards: Vec<Fact>,
}

pub fn aggregate(
    t: &SemanticGraph,
    s: &SemanticGraph,
    c: &SemanticGraph,
    integration_rules: &[Rule],
    exclusions: &[(String, String)],
) -> Result<UnifiedCognition, CognitionError> {
    let mut graph = SemanticGraph::new(Dimension::Unified);
    let mut correspondence: BTreeMap<EntityId, Presence> = BTreeMap::new();
    for (slot, dim, g) in [
        ("temporal", Dimension::Temporal, t),
        ("spatial", Dimension::Spatial, s),
        ("conceptual", Dimension::Conceptual, c),
    ] {
        if g.dimension() != dim {
            return Err(CognitionError::WrongDimension {
                slot,
                found: g.dimension().as_str(),
            });
        }
        graph.merge(g);
        for e in g.entities() {
            correspondence.entry(e.clone()).or_default().set(dim);
        }
    }
    if !integration_rules.is_empty() {
        let chained = forward_chain(&graph, integration_rules, DEFAULT_MAX_PASSES);
        for f in chained.derived {
            graph.insert(f.with_origin(Origin::Derived))?;
        }
        // confidence raises on existing keys
        graph.merge(&chained.graph);
    }
    let contradictions = detect_contradictions(&graph, exclusions);
    Ok(UnifiedCognition {
        graph,
        correspondence,
        contradictions,
        hazards: Vec::new(),
    })
}

/// Pairs of facts that cannot both hold: `r1(a,b)` with `r2(a,b)` for a
/// declared exclusion `(r1, r2)`, and `r(a,b)` with `r(b,a)` for any
/// relation named in an exclusion (the pair members are converses, so each
/// is antisymmetric). Ordered by the first fact's key, then the second's.
pub fn detect_contradictions(graph: &SemanticGraph, exclusions: &[(String, String)]) -> Vec<(Fact, Fact)> {
    let mut out: Vec<(Fact, Fact)> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut push = |a: &Fact, b: &Fact| {
        let (x, y) = if a.key() <= b.key() { (a, b) } else { (b, a) };
        if seen.insert((x.key(), y.key())) {
            out.push((x.clone(), y.clone()));
        }
    };
    for (r1, r2) in exclusions {
        for f in graph.with_relation(r1) {
            if let Some(g) = graph.get(&crate::kb::FactKey {
                subject: f.subject.clone(),
                relation: r2.clone(),
                object: f.object.clone(),
            }) {
                push(f, g);
            }
        }
        for rel in [r1, r2] {
            for f in graph.with_relation(rel) {
                let Object::Atom(o) = &f.object else { continue };
                if *o == f.subject {
                    continue;
                }
                let back = crate::kb::FactKey {
                    subject: o.clone(),
                    relation: rel.clone(),
                    object: Object::Atom(f.subject.clone()),
                };
                if let Some(g) = graph.get(&back) {
                    push(f, g);
                }
            }
        }
    }
    out.sort_by_key(|a| (a.0.key(), a.1.key()));
    out
}

/// Chain hazard rules over the unified graph. New hazard facts are added
/// to the graph and to `u.hazards`; every hazard fact present afterwards
/// (new or previously known) is returned in key order.
pub fn assess_hazards(u: &mut UnifiedCognition, hazard_rules: &[Rule]) -> Result<Vec<Fact>, CognitionError> {
    if !hazard_rules.is_empty() {
        let chained = forward_chain(&u.graph, hazard_rules, DEFAULT_MAX_PASSES);
        for f in chained.derived {
            u.graph.insert(f.with_origin(Origin::Derived))?;
        }
        u.graph.merge(&chained.graph);
    }
    u.hazards = u.graph.with_relation("hazard").cloned().collect();
    Ok(u.hazards.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::RuleSet;

    fn g(dim: Dimension, facts: &[(&str, &str, &str)]) -> SemanticGraph {
        let mut graph = SemanticGraph::new(dim);
        for (s, r, o) in facts {
            graph.insert(Fact::triple(s, r, o)).unwrap();
        }
        graph
    }

    fn exclusions() -> Vec<(String, String)> {
        RuleSet::shipped().exclusions
    }

    #[test]
    fn disjoint_union_keeps_everything() {
        let t = g(Dimension::Temporal, &[("a", "active", "move"), ("b", "active", "move")]);
        let s = g(
            Dimension::Spatial,
            &[("a", "Near", "b"), ("c", "Near", "d"), ("e", "LocatedIn", "kitchen")],
        );
        let c = g(
            Dimension::Conceptual,
            &[("a", "isa", "cup"), ("b", "isa", "cup"), ("c", "isa", "plate"), ("d", "isa", "bowl")],
        );
        let u = aggregate(&t, &s, &c, &[], &[]).unwrap();
        assert_eq!(u.graph.len(), 9);
        assert_eq!(u.correspondence[&EntityId::new("a").unwrap()].bits(), 0b111);
        assert_eq!(u.correspondence[&EntityId::new("e").unwrap()].bits(), Presence::SPATIAL);
    }

    #[test]
    fn shared_triple_takes_max_confidence() {
        let mut s = SemanticGraph::new(Dimension::Spatial);
        s.insert(Fact::triple("x", "colocated", "y").with_confidence(0.6)).unwrap();
        let mut c = SemanticGraph::new(Dimension::Conceptual);
        c.insert(Fact::triple("x", "colocated", "y").with_confidence(0.8)).unwrap();
        let u = aggregate(&SemanticGraph::new(Dimension::Temporal), &s, &c, &[], &[]).unwrap();
        assert_eq!(u.graph.len(), 1);
        assert_eq!(u.graph.facts().next().unwrap().confidence, 0.8);
    }

    #[test]
    fn wrong_dimension_rejected() {
        let t = SemanticGraph::new(Dimension::Spatial);
        let err = aggregate(
            &t,
            &SemanticGraph::new(Dimension::Spatial),
            &SemanticGraph::new(Dimension::Conceptual),
            &[],
            &[],
        )
        .unwrap_err();
        assert!(matches!(err, CognitionError::WrongDimension { slot: "temporal", .. }));
    }

    #[test]
    fn converse_pair_conflicts() {
        let graph = g(Dimension::Unified, &[("a", "LeftOf", "b"), ("a", "RightOf", "b")]);
        assert_eq!(detect_contradictions(&graph, &exclusions()).len(), 1);
    }

    #[test]
    fn lone_relation_is_consistent() {
        let graph = g(Dimension::Unified, &[("a", "LeftOf", "b")]);
        assert!(detect_contradictions(&graph, &exclusions()).is_empty());
    }

    #[test]
    fn antisymmetry_violation_conflicts() {
        let graph = g(Dimension::Unified, &[("a", "LeftOf", "b"), ("b", "LeftOf", "a")]);
        let found = detect_contradictions(&graph, &exclusions());
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].0.key(), Fact::triple("a", "LeftOf", "b").key());
    }

    fn coffee_graphs(hot: bool, child: bool) -> (SemanticGraph, SemanticGraph, SemanticGraph) {
        let mut t = vec![];
        let mut s = vec![("coffee1", "Near", "edge1")];
        let mut c = vec![("coffee1", "isa", "cup"), ("edge1", "isa", "table_edge"), ("table1", "isa", "table")];
        if hot {
            c.push(("coffee1", "has_state", "hot"));
        }
        if child {
            t.push(("child1", "active", "move"));
            s.push(("child1", "Near", "table1"));
            c.push(("child1", "isa", "child"));
        }
        (
            g(Dimension::Temporal, &t),
            g(Dimension::Spatial, &s),
            g(Dimension::Conceptual, &c),
        )
    }

    #[test]
    fn hot_coffee_near_edge_with_child_is_hazard() {
        let rules = RuleSet::shipped();
        let (t, s, c) = coffee_graphs(true, true);
        let mut u = aggregate(&t, &s, &c, &rules.integration, &rules.exclusions).unwrap();
        let hazards = assess_hazards(&mut u, &rules.hazard).unwrap();
        assert_eq!(hazards.len(), 1);
        assert_eq!(hazards[0].key(), Fact::triple("coffee1", "hazard", "spill_burn").key());
        assert!(u.graph.contains("coffee1", "hazard", "spill_burn"));
    }

    #[test]
    fn cold_coffee_without_child_is_safe() {
        let rules = RuleSet::shipped();
        let (t, s, c) = coffee_graphs(false, false);
        let mut u = aggregate(&t, &s, &c, &rules.integration, &rules.exclusions).unwrap();
        assert!(assess_hazards(&mut u, &rules.hazard).unwrap().is_empty());
    }

    #[test]
    fn wet_floor_near_live_wire() {
        let rules = RuleSet::shipped();
        let s = g(Dimension::Spatial, &[("floor3", "Near", "wire1")]);
        let c = g(
            Dimension::Conceptual,
            &[("floor3", "has_state", "wet"), ("wire1", "has_state", "powered")],
        );
        let mut u = aggregate(&SemanticGraph::new(Dimension::Temporal), &s, &c, &[], &[]).unwrap();
        let hazards = assess_hazards(&mut u, &rules.hazard).unwrap();
        assert_eq!(hazards[0].key(), Fact::triple("wire1", "hazard", "electrocution").key());
    }

    #[test]
    fn integration_rule_moves_carried_object() {
        let rules = RuleSet::shipped();
        let t = g(Dimension::Temporal, &[("robot", "active", "move")]);
        let s = g(Dimension::Spatial, &[("robot", "holding", "cup1")]);
        let u = aggregate(&t, &s, &SemanticGraph::new(Dimension::Conceptual), &rules.integration, &[]).unwrap();
        assert!(u.graph.contains("cup1", "active", "move"));
        assert_eq!(u.graph.len(), 3);
    }
}
