//! Semantic reasoning: temporal (closure, dependency, prediction),
//! spatial (relation composition, collision) and conceptual (function and
//! role) inference over the per-dimension graphs. Everything here is a pure
//! function of its inputs.

mod sequence;
mod spatial;
mod temporal;

use thiserror::Error;

use crate::kb::{forward_chain, Fact, Origin, Rule, SemanticGraph};

pub use sequence::{EventSequenceModel, NextEventDistribution};
pub use spatial::{
    cell_distance, compose_spatial, detect_collision, predict_trajectory, Cell, CollisionReport,
    CompositionTable, GridBounds, Trajectory, SPATIAL_VOCABULARY,
};
pub use temporal::{temporal_closure, TemporalOrder};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReasonError {
    #[error("temporal order is cyclic: {}", cycle.join(" < "))]
    TemporalCycle { cycle: Vec<String> },
    #[error("history has {got} events, model order needs {needed}")]
    HistoryTooShort { needed: usize, got: usize },
    #[error("unseen context and the model knows no event kinds")]
    EmptyModel,
    #[error("trajectory needs at least one observed position")]
    NoHistory,
    #[error("positions at ticks {first} and {second} are not consecutive")]
    NonConsecutive { first: u64, second: u64 },
    #[error("collision threshold must be positive, got {0}")]
    InvalidEpsilon(f64),
}

/// Default forward-chaining pass budget used by the reasoning engines.
pub const DEFAULT_MAX_PASSES: usize = 64;

/// Dependency (causal) reasoning: chain the rules and return what was
/// newly derived.
pub fn apply_dependency_rules(graph: &SemanticGraph, rules: &[Rule]) -> Vec<Fact> {
    derive(graph, rules)
}

/// Functional and role reasoning over the conceptual vocabulary.
pub fn infer_concepts(graph: &SemanticGraph, rules: &[Rule]) -> Vec<Fact> {
    derive(graph, rules)
}

fn derive(graph: &SemanticGraph, rules: &[Rule]) -> Vec<Fact> {
    forward_chain(graph, rules, DEFAULT_MAX_PASSES)
        .derived
        .into_iter()
        .map(|f| f.with_origin(Origin::Derived))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::Dimension;
    use crate::rules::RuleSet;

    fn graph(facts: &[(&str, &str, &str)]) -> SemanticGraph {
        let mut g = SemanticGraph::new(Dimension::Unified);
        for (s, r, o) in facts {
            g.insert(Fact::triple(s, r, o)).unwrap();
        }
        g
    }

    #[test]
    fn knocked_over_cup_spills() {
        let rules = RuleSet::shipped();
        let g = graph(&[
            ("cup1", "isa", "cup"),
            ("cup1", "active", "knocked_over"),
            ("cup1", "contains", "liq1"),
        ]);
        let out = apply_dependency_rules(&g, &rules.dependency);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].key(), Fact::triple("liq1", "has_state", "spilling").key());
        assert_eq!(out[0].origin, Origin::Derived);
    }

    #[test]
    fn no_matching_premises_derives_nothing() {
        let rules = RuleSet::shipped();
        let g = graph(&[("cup1", "isa", "cup"), ("cup1", "contains", "liq1")]);
        assert!(apply_dependency_rules(&g, &rules.dependency).is_empty());
    }

    #[test]
    fn two_knocked_cups_spill_twice() {
        let rules = RuleSet::shipped();
        let g = graph(&[
            ("cup1", "isa", "cup"),
            ("cup1", "active", "knocked_over"),
            ("cup1", "contains", "liq1"),
            ("cup2", "isa", "cup"),
            ("cup2", "active", "knocked_over"),
            ("cup2", "contains", "liq2"),
            ("cup3", "isa", "cup"),
            ("cup3", "contains", "liq3"),
        ]);
        let spilled: Vec<String> = apply_dependency_rules(&g, &rules.dependency)
            .iter()
            .map(|f| f.subject.to_string())
            .collect();
        assert_eq!(spilled, ["liq1", "liq2"]);
    }

    #[test]
    fn edible_in_kitchen_is_food() {
        let rules = RuleSet::shipped();
        let g = graph(&[("apple1", "has_state", "edible"), ("apple1", "LocatedIn", "kitchen")]);
        let out = infer_concepts(&g, &rules.concept);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].key(), Fact::triple("apple1", "has_function", "food").key());
    }

    #[test]
    fn waxfruit_elsewhere_is_not_food() {
        let rules = RuleSet::shipped();
        let g = graph(&[
            ("waxfruit1", "has_state", "edible"),
            ("waxfruit1", "LocatedIn", "livingroom"),
        ]);
        let out = infer_concepts(&g, &rules.concept);
        assert!(out.iter().all(|f| f.object.to_string() != "food"));
    }

    #[test]
    fn scrubs_in_clinic_is_nurse() {
        let rules = RuleSet::shipped();
        let g = graph(&[("p1", "wears", "scrubs"), ("p1", "LocatedIn", "clinic")]);
        let out = infer_concepts(&g, &rules.concept);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].key(), Fact::triple("p1", "has_role", "nurse").key());
        assert!((out[0].confidence - 0.9).abs() < 1e-12);
    }
}
